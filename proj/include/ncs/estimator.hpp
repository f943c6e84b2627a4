#ifndef NCS_ESTIMATOR_HPP
#define NCS_ESTIMATOR_HPP

#include "ncs/plant.hpp"
#include "ncs/types.hpp"

namespace ncs {

/// Estimator-side state of one episode.
struct EstimatorState {
  Vec x_hat;          ///< controller estimate x̂(n)
  Vec Delta;          ///< x(n) − x̂(n), from ground truth
  Mat Sigma;          ///< one-step prediction covariance Σ(n+1)
  Vec Delta_virtual;  ///< sensor-side surrogate Δ̃(n)

  /// Δ = 0, Σ = 0, x̂ = x₀.
  static EstimatorState initial(const Vec& x0);
};

/// [E; conj(E)], 2N_r×L.
CMat augment(const CMat& E);
/// [y; conj(y)].
CVec augment(const CVec& y);

/// K_a = Σ E_aᴴ (E_a Σ E_aᴴ + I)⁻¹ by a Hermitian solve.
CMat kalman_gain(const Mat& Sigma, const CMat& E_a);

/// Real part of I − K_a E_a (exactly real for an augmented pair).
Mat gain_contraction(const CMat& K_a, const CMat& E_a);

struct CovarianceOptions {
  bool joseph = false;
};

/// Σ' = A(Σ − Σ E_aᴴ(E_a Σ E_aᴴ + I)⁻¹ E_a Σ)Aᵀ + W, symmetrized.
Mat update_covariance(const Mat& Sigma, const CMat& E_a,
                      const DiscretePlant& disc,
                      const CovarianceOptions& opt = {});

/// Posterior covariance Σ − K_a E_a Σ (before the time update).
Mat posterior_covariance(const Mat& Sigma, const CMat& E_a,
                         const CMat& K_a, const CovarianceOptions& opt = {});

/// x̂(n) = p + K_a (y_a − E_a p), p = A x̂(n−1) + B u(n−1).
/// The imaginary residue must stay below 1e-9 relative to the terms.
Vec update_estimate(const Vec& x_hat_prev, const Vec& u_prev,
                    const CVec& y_a, const CMat& E_a, const CMat& K_a,
                    const DiscretePlant& disc);

/// Δ̃(n) = (I − K_a E_a)(A Δ̃(n−1) + d). With d = 0 this is the
/// conditional mean drift; the closed loop passes the disturbance the
/// sensor can reconstruct from its own observations.
Vec update_virtual_error(const Vec& Delta_virtual, const CMat& K_a,
                         const CMat& E_a, const DiscretePlant& disc,
                         const Vec& disturbance = Vec());

}  // namespace ncs

#endif  // NCS_ESTIMATOR_HPP
