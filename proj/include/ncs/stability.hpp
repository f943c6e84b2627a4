#ifndef NCS_STABILITY_HPP
#define NCS_STABILITY_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "ncs/channel.hpp"
#include "ncs/plant.hpp"
#include "ncs/priority.hpp"
#include "ncs/types.hpp"

namespace ncs {

/// One draw of the dynamic threshold: ν* and its beam q1 (unit norm).
struct ThresholdSample {
  double nu = 0.0;
  Vec q;
  Vec delta;  ///< error the policy evaluated, when known
};

/// Surrogate sampler: q1 uniform on the unit sphere, ν* resampled from
/// `nu_pool` (e.g. the ν* values of a pilot run).
std::vector<ThresholdSample> surrogate_samples(const std::vector<double>& nu_pool,
                                               int L, std::size_t n,
                                               std::uint64_t seed);

/// G(P) = mean over samples of
///   ∫_{λ/ν}^∞ 2F̄x / (1 + 2F̄x qᵀPq) dF_{σ*}(x) · q qᵀ.
Mat g_operator(const Mat& P, double F_bar, double lambda,
               const SigmaStarDistribution& dist,
               const std::vector<ThresholdSample>& samples);

/// Same integrand with (ν*, q1) re-evaluated at Σ = P from error samples
/// Δ(n−1): ν* grows with P exactly as in the policy's trigger.
Mat g_operator_policy(const Mat& P, const PriorityCoefficients& co,
                      const std::vector<Vec>& deltas,
                      const SigmaStarDistribution& dist);

struct BoundResult {
  Mat P;
  Mat G;
  double mse_bound = 0.0;  ///< Tr(P − P G P)
  int iterations = 0;
  double residual = 0.0;   ///< ‖P − (A(P−PGP)Aᵀ + W)‖_F / ‖P‖_F
};

struct FixedPointOptions {
  double damping = 0.5;
  double tol = 1e-8;
  int max_iter = 20000;
  int growth_window = 50;  ///< consecutive residual increases → divergence
  double blowup = 1e12;
};

/// Damped Picard iteration P ← (1−β)P + β(A(P − PGP)Aᵀ + W) from P₀ = W.
/// β is halved when the residual grows while the update reverses direction.
BoundResult solve_fixed_point(const DiscretePlant& disc,
                              const SigmaStarDistribution& dist, double F_bar,
                              double lambda,
                              const std::vector<ThresholdSample>& samples,
                              const FixedPointOptions& opt = {});

/// Generic form: G supplied as a function of P.
BoundResult solve_fixed_point(const DiscretePlant& disc,
                              const std::function<Mat(const Mat&)>& G,
                              const FixedPointOptions& opt = {});

/// P-consistent variant built on g_operator_policy.
BoundResult solve_fixed_point_policy(const DiscretePlant& disc,
                                     const PriorityCoefficients& co,
                                     const std::vector<Vec>& deltas,
                                     const SigmaStarDistribution& dist,
                                     const FixedPointOptions& opt = {});

struct ScalingReport {
  double slope_F = 0.0;      ///< d log(bound) / d log(F̄)
  double r2_F = 0.0;
  bool lambda_increasing = false;
  double lambda_affine_slope = 0.0;  ///< of log(bound) − λ + d log λ vs λ
  double lambda_affine_r2 = 0.0;
};

/// Needs ≥ 4 points per axis.
ScalingReport scaling_diagnostics(const std::vector<double>& F_values,
                                  const std::vector<double>& F_bounds,
                                  const std::vector<double>& lambda_values,
                                  const std::vector<double>& lambda_bounds,
                                  int d);

/// Least-squares line y = a + b x; returns (a, b, r²).
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ncs

#endif  // NCS_STABILITY_HPP
