#ifndef NCS_TYPES_HPP
#define NCS_TYPES_HPP

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace ncs {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

// Error taxonomy. The CLI maps these onto exit codes.
struct NcsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : NcsError {
  using NcsError::NcsError;
};
struct ConfigError : NcsError {
  using NcsError::NcsError;
};
struct InvalidCovarianceError : NcsError {
  using NcsError::NcsError;
};
struct NumericError : NcsError {
  using NcsError::NcsError;
};
struct ConvergenceError : NcsError {
  using NcsError::NcsError;
};
struct DivergenceError : NcsError {
  DivergenceError(const std::string& what, long slot)
      : NcsError(what), slot(slot) {}
  long slot;
};

/// Symmetric part (A + Aᵀ)/2.
inline Mat symmetrize(const Mat& A) { return 0.5 * (A + A.transpose()); }

/// Largest absolute imaginary entry of a complex matrix.
inline double max_imag(const CMat& A) {
  return A.size() == 0 ? 0.0 : A.imag().cwiseAbs().maxCoeff();
}

/// Real part of a complex matrix that must be real up to `tol`.
/// Throws NumericError with `what` when the residue is larger.
inline Mat real_or_throw(const CMat& A, double tol, const char* what) {
  const double r = max_imag(A);
  if (!(r <= tol)) {
    throw NumericError(std::string(what) + ": imaginary residue " +
                       std::to_string(r));
  }
  return A.real();
}

}  // namespace ncs

#endif  // NCS_TYPES_HPP
