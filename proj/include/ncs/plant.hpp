#ifndef NCS_PLANT_HPP
#define NCS_PLANT_HPP

#include "ncs/types.hpp"

namespace ncs {

/// Continuous-time plant dx = Ã x dt + B̃ u dt + dw, dw ~ N(0, W̃ dt).
struct ContinuousPlant {
  Mat A_tilde;  ///< L×L, 1/s
  Mat B_tilde;  ///< L×M
  Mat W_tilde;  ///< L×L disturbance covariance rate

  int L() const { return static_cast<int>(A_tilde.rows()); }
  int M() const { return static_cast<int>(B_tilde.cols()); }

  /// Throws ParameterError on inconsistent dimensions.
  void validate() const;
};

/// Zero-order-hold sampled plant x(n+1) = A x(n) + B u(n) + w(n).
struct DiscretePlant {
  Mat A;
  Mat B;
  Mat W;
  double tau = 0.0;

  int L() const { return static_cast<int>(A.rows()); }
  int M() const { return static_cast<int>(B.cols()); }
};

/// Certainty-equivalent controller u = Psi x̂ from the DARE.
struct CEControllerGain {
  Mat Z;
  Mat Psi;
  Mat Q;
  Mat R;
  int iterations = 0;
};

/// Result of whitening: x_M = M x has diagonal disturbance covariance T.
struct WhitenResult {
  ContinuousPlant plant;
  Mat M;
  Vec T;
};

/// Diagonalizes W̃ by an orthonormal change of coordinates (descending
/// variances). A diagonal W̃ is returned unchanged with M = I.
WhitenResult whiten(const ContinuousPlant& plant);

/// A = exp(Ãτ), B = ∫₀^τ exp(Ãs)ds B̃, W = ∫₀^τ exp(Ãs) W̃ exp(Ãᵀs) ds.
/// Both integrals come from exponentials of block matrices, so singular Ã
/// needs no special casing.
DiscretePlant discretize(const ContinuousPlant& plant, double tau);

/// Rank of the controllability matrix [B AB ... A^{L-1}B] equals L.
bool is_controllable(const Mat& A, const Mat& B);

struct DareOptions {
  double tol = 1e-12;
  int max_iter = 200000;
};

/// Fixed-point Riccati recursion from Z₀ = Q.
CEControllerGain solve_dare(const DiscretePlant& disc, const Mat& Q,
                            const Mat& R, const DareOptions& opt = {});

/// ‖Z − (AᵀZA − AᵀZB(BᵀZB+R)⁻¹BᵀZA + Q)‖_F.
double dare_residual(const DiscretePlant& disc, const CEControllerGain& g);

/// A x + B u + w.
Vec step_plant(const Vec& x, const Vec& u, const Vec& w,
               const DiscretePlant& disc);

}  // namespace ncs

#endif  // NCS_PLANT_HPP
