#include "ncs/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ncs/rng.hpp"

namespace ncs {

std::vector<ThresholdSample> surrogate_samples(const std::vector<double>& nu_pool,
                                               int L, std::size_t n,
                                               std::uint64_t seed) {
  if (nu_pool.empty()) throw ParameterError("surrogate_samples: empty ν pool");
  RngStream rng(seed);
  std::vector<ThresholdSample> out(n);
  for (auto& s : out) {
    Vec q = rng.normal_vec(L);
    while (q.norm() == 0.0) q = rng.normal_vec(L);
    s.q = q.normalized();
    const auto k = static_cast<std::size_t>(rng.uniform() * nu_pool.size());
    s.nu = nu_pool[std::min(k, nu_pool.size() - 1)];
  }
  return out;
}

Mat g_operator(const Mat& P, double F_bar, double lambda,
               const SigmaStarDistribution& dist,
               const std::vector<ThresholdSample>& samples) {
  if (samples.empty()) throw ParameterError("g_operator: empty sample set");
  const int L = static_cast<int>(P.rows());
  Mat G = Mat::Zero(L, L);
  const double two_f = 2.0 * F_bar;
  for (const auto& s : samples) {
    if (!(s.nu > 0.0)) continue;
    const double thr = lambda / s.nu;
    if (thr >= dist.x_max()) continue;
    const double p = s.q.dot(P * s.q);
    const double h = dist.tail_sum(
        [&](double x) { return two_f * x / (1.0 + two_f * x * p); }, thr);
    G.noalias() += h * s.q * s.q.transpose();
  }
  return G / static_cast<double>(samples.size());
}

Mat g_operator_policy(const Mat& P, const PriorityCoefficients& co,
                      const std::vector<Vec>& deltas,
                      const SigmaStarDistribution& dist) {
  if (deltas.empty()) throw ParameterError("g_operator_policy: empty sample set");
  const int L = static_cast<int>(P.rows());
  Mat G = Mat::Zero(L, L);
  const double two_f = 2.0 * co.F_bar;
  for (const auto& d : deltas) {
    const ThresholdEvaluation ev = threshold(co, d, P, co.tau);
    if (!(ev.nu_star > 0.0)) continue;
    const double thr = co.lambda / ev.nu_star;
    if (thr >= dist.x_max()) continue;
    const double p = ev.q1.dot(P * ev.q1);
    const double h = dist.tail_sum(
        [&](double x) { return two_f * x / (1.0 + two_f * x * p); }, thr);
    G.noalias() += h * ev.q1 * ev.q1.transpose();
  }
  return G / static_cast<double>(deltas.size());
}

namespace {

Mat picard_map(const DiscretePlant& disc, const Mat& P, const Mat& G) {
  return symmetrize(disc.A * (P - P * G * P) * disc.A.transpose() + disc.W);
}

}  // namespace

BoundResult solve_fixed_point(const DiscretePlant& disc,
                              const SigmaStarDistribution& dist, double F_bar,
                              double lambda,
                              const std::vector<ThresholdSample>& samples,
                              const FixedPointOptions& opt) {
  if (!(F_bar > 0.0) || !(lambda > 0.0)) {
    throw ParameterError("solve_fixed_point: F_bar and lambda must be > 0");
  }
  if (samples.empty()) throw ParameterError("solve_fixed_point: empty sample set");
  return solve_fixed_point(
      disc, [&](const Mat& P) { return g_operator(P, F_bar, lambda, dist, samples); },
      opt);
}

BoundResult solve_fixed_point_policy(const DiscretePlant& disc,
                                     const PriorityCoefficients& co,
                                     const std::vector<Vec>& deltas,
                                     const SigmaStarDistribution& dist,
                                     const FixedPointOptions& opt) {
  if (deltas.empty()) throw ParameterError("solve_fixed_point: empty sample set");
  return solve_fixed_point(
      disc, [&](const Mat& P) { return g_operator_policy(P, co, deltas, dist); },
      opt);
}

BoundResult solve_fixed_point(const DiscretePlant& disc,
                              const std::function<Mat(const Mat&)>& gfun,
                              const FixedPointOptions& opt) {
  BoundResult r;
  Mat P = disc.W;
  Mat last_step;
  double beta = opt.damping;
  double prev = std::numeric_limits<double>::infinity();
  int growth = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const Mat G = gfun(P);
    const Mat T = picard_map(disc, P, G);
    const double res = (P - T).norm() / std::max(P.norm(), 1e-300);
    r.iterations = it;
    r.residual = res;
    if (!std::isfinite(res) || P.norm() > opt.blowup) {
      throw DivergenceError("solve_fixed_point: iterate blew up (insufficient "
                            "F_bar/lambda regime)", it);
    }
    if (res <= opt.tol) {
      r.P = P;
      r.G = G;
      r.mse_bound = (P - P * G * P).trace();
      return r;
    }
    const Mat step = T - P;
    if (res > prev) {
      if (++growth >= opt.growth_window) {
        std::ostringstream os;
        os << "solve_fixed_point: residual grew for " << growth
           << " consecutive iterations (last " << res
           << "); insufficient F_bar/lambda regime";
        throw DivergenceError(os.str(), it);
      }
      // Oscillation: the update reverses direction.
      if (last_step.size() && (step.cwiseProduct(last_step)).sum() < 0.0) {
        beta = std::max(0.5 * beta, opt.damping / 64.0);
      }
    } else {
      growth = 0;
      beta = std::min(opt.damping, 1.25 * beta);
    }
    prev = res;
    last_step = step;
    P = symmetrize(P + beta * step);
  }
  std::ostringstream os;
  os << "solve_fixed_point: no convergence in " << opt.max_iter
     << " iterations (residual " << r.residual << ")";
  throw ConvergenceError(os.str());
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ParameterError("fit_line: need matching inputs of size >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ParameterError("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

ScalingReport scaling_diagnostics(const std::vector<double>& F_values,
                                  const std::vector<double>& F_bounds,
                                  const std::vector<double>& lambda_values,
                                  const std::vector<double>& lambda_bounds,
                                  int d) {
  if (F_values.size() < 4 || lambda_values.size() < 4) {
    throw ParameterError("scaling_diagnostics: need at least 4 points per axis");
  }
  if (F_values.size() != F_bounds.size() ||
      lambda_values.size() != lambda_bounds.size()) {
    throw ParameterError("scaling_diagnostics: size mismatch");
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < F_values.size(); ++i) {
    if (!(F_values[i] > 0.0) || !(F_bounds[i] > 0.0)) {
      throw ParameterError("scaling_diagnostics: nonpositive point");
    }
    lx.push_back(std::log(F_values[i]));
    ly.push_back(std::log(F_bounds[i]));
  }
  ScalingReport rep;
  const LineFit fF = fit_line(lx, ly);
  rep.slope_F = fF.slope;
  rep.r2_F = fF.r2;

  std::vector<std::size_t> idx(lambda_values.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](auto a, auto b) { return lambda_values[a] < lambda_values[b]; });
  rep.lambda_increasing = true;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    if (!(lambda_bounds[idx[k]] > lambda_bounds[idx[k - 1]])) {
      rep.lambda_increasing = false;
    }
  }
  std::vector<double> xs, ys;
  for (auto i : idx) {
    xs.push_back(lambda_values[i]);
    ys.push_back(std::log(lambda_bounds[i]) - lambda_values[i] +
                 d * std::log(lambda_values[i]));
  }
  const LineFit fl = fit_line(xs, ys);
  rep.lambda_affine_slope = fl.slope;
  rep.lambda_affine_r2 = fl.r2;
  return rep;
}

}  // namespace ncs
