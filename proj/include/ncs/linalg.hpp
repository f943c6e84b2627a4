#ifndef NCS_LINALG_HPP
#define NCS_LINALG_HPP

#include "ncs/types.hpp"

namespace ncs {

/// Matrix exponential by scaling and squaring with a Padé approximant.
Mat expm(const Mat& A);

/// Spectral radius max |eig(A)|.
double spectral_radius(const Mat& A);

/// Smallest eigenvalue of the symmetric part of A.
double min_sym_eig(const Mat& A);

/// Solves P = A P Aᵀ + W for Schur-stable A (Kronecker form, small L).
Mat dlyap(const Mat& A, const Mat& W);

/// Solves Aᵀ X + X A + C = 0 (Kronecker form, small L).
Mat clyap(const Mat& A, const Mat& C);

}  // namespace ncs

#endif  // NCS_LINALG_HPP
