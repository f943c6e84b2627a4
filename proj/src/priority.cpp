#include "ncs/priority.hpp"

#include <boost/math/tools/roots.hpp>
#include <algorithm>
#include <cmath>

#include "ncs/linalg.hpp"

namespace ncs {

namespace {

constexpr double kResidueHard = 1e-6;

// Real part of an assembled matrix. Residue up to 1e-9 is roundoff and is
// dropped; above 1e-6 (relative) it signals a conjugation or ordering bug.
Mat assemble_real(const CMat& A, const char* what) {
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  const double r = max_imag(A) / scale;
  if (r > kResidueHard) {
    throw NumericError(std::string(what) + ": imaginary residue " +
                       std::to_string(r) + " (conjugation or ordering bug)");
  }
  return A.real();
}

// Eigenframe solution of Aᵀ X + X A = −2 W:
// X^M_kl = −2 w^M_kl / (conj(μ_k) + μ_l), X = V⁻ᴴ X^M V⁻¹.
Mat eigenframe_lyapunov(const CMat& V, const CMat& Vinv, const CVec& mu,
                        const Mat& Wt) {
  const auto L = mu.size();
  CMat WM = V.adjoint() * Wt.cast<cd>() * V;
  CMat XM(L, L);
  for (Eigen::Index k = 0; k < L; ++k) {
    for (Eigen::Index l = 0; l < L; ++l) {
      XM(k, l) = -2.0 * WM(k, l) / (std::conj(mu(k)) + mu(l));
    }
  }
  return symmetrize(
      assemble_real(Vinv.adjoint() * XM * Vinv, "eigenframe_lyapunov"));
}

// Ω_kl(Σ): mean of Σ_jj/w̃_jj over j ∈ {k, l} with w̃_jj > 0.
Mat omega(const Vec& w, const Mat& Sigma) {
  const auto L = w.size();
  Mat O = Mat::Zero(L, L);
  for (Eigen::Index k = 0; k < L; ++k) {
    for (Eigen::Index l = 0; l < L; ++l) {
      double s = 0.0;
      int n = 0;
      if (w(k) > 0.0) {
        s += Sigma(k, k) / w(k);
        ++n;
      }
      if (l != k && w(l) > 0.0) {
        s += Sigma(l, l) / w(l);
        ++n;
      } else if (l == k && w(k) > 0.0) {
        s += Sigma(k, k) / w(k);
        ++n;
      }
      if (n > 0) O(k, l) = s / n;
    }
  }
  return O;
}

Mat skew_of(const PriorityCoefficients& co, int regime) {
  if (regime == 1) return co.K1;
  return co.K1 + co.shift() * co.KY;
}

double nu_at(const PriorityCoefficients& co, double c) {
  const Mat X = co.X1 + c * co.sigma_bar * co.F_bar * co.Y;
  const Vec& D = co.Delta_anchor;
  const Vec x = D / co.tau;
  const Vec y = co.Sigma_anchor * (X * D);
  return rank2_max_eig(x, y, D).nu_star;
}

}  // namespace

SigmaAnchor parse_sigma_anchor(const std::string& s) {
  if (s == "auto") return SigmaAnchor::Auto;
  if (s == "lyapunov") return SigmaAnchor::Lyapunov;
  if (s == "process-noise") return SigmaAnchor::ProcessNoise;
  if (s == "explicit") return SigmaAnchor::Explicit;
  throw ConfigError("unknown sigma anchor '" + s + "'");
}

std::string to_string(SigmaAnchor a) {
  switch (a) {
    case SigmaAnchor::Auto: return "auto";
    case SigmaAnchor::Lyapunov: return "lyapunov";
    case SigmaAnchor::ProcessNoise: return "process-noise";
    case SigmaAnchor::Explicit: return "explicit";
  }
  return "auto";
}

Mat PriorityCoefficients::sym(int regime) const {
  if (regime == 1) return X1;
  return X1 + shift() * Y;
}

Mat PriorityCoefficients::weight(int regime) const {
  if (regime == 1) return S;
  return S - shift() * Mat::Identity(L(), L());
}

double c_fixed_point_residual(const PriorityCoefficients& co, double c) {
  const double dd = co.Delta_anchor.squaredNorm();
  return nu_at(co, c) / dd - c;
}

PriorityCoefficients build_coefficients(const ContinuousPlant& plant,
                                        double tau, const Mat& S,
                                        double sigma_bar, double F_bar,
                                        double lambda, double eta_th,
                                        const PriorityOptions& opt) {
  plant.validate();
  const int L = plant.L();
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  if (!(sigma_bar > 0.0) || !(F_bar > 0.0) || !(lambda > 0.0)) {
    throw ParameterError("sigma_bar, F_bar and lambda must be positive");
  }
  if (!(eta_th >= 0.0)) throw ParameterError("eta_th must be nonnegative");
  if (S.rows() != L || S.cols() != L) throw ParameterError("S must be L×L");
  if (min_sym_eig(S) < -1e-12) throw ParameterError("S must be PSD");
  Mat Woff = plant.W_tilde;
  Woff.diagonal().setZero();
  if (Woff.cwiseAbs().maxCoeff() > 0.0) {
    throw ParameterError("build_coefficients: W_tilde must be diagonal "
                         "(whiten the plant first)");
  }
  if (plant.W_tilde.diagonal().maxCoeff() <= 0.0) {
    throw ParameterError("build_coefficients: W_tilde is zero");
  }

  PriorityCoefficients co;
  co.A_tilde = plant.A_tilde;
  co.w_tilde = plant.W_tilde.diagonal();
  co.S = S;
  co.sigma_bar = sigma_bar;
  co.F_bar = F_bar;
  co.lambda = lambda;
  co.eta_th = eta_th;
  co.tau = tau;

  Eigen::EigenSolver<Mat> es(plant.A_tilde);
  if (es.info() != Eigen::Success) {
    throw NumericError("build_coefficients: eigendecomposition failed");
  }
  co.M_eig = es.eigenvectors();
  co.mu = es.eigenvalues();
  Eigen::FullPivLU<CMat> lu(co.M_eig);
  if (!lu.isInvertible() || lu.rcond() < 1e-10) {
    throw NumericError("build_coefficients: A_tilde is defective "
                       "(eigenvector matrix is singular)");
  }
  const double mu_scale = std::max(1.0, co.mu.cwiseAbs().maxCoeff());
  for (int k = 0; k < L; ++k) {
    for (int l = 0; l < L; ++l) {
      if (std::abs(co.mu(k) + co.mu(l)) <= 1e-12 * mu_scale ||
          std::abs(std::conj(co.mu(k)) + co.mu(l)) <= 1e-12 * mu_scale) {
        throw NumericError("build_coefficients: eigenvalue pair sums to "
                           "zero (mu_k + mu_l = 0)");
      }
    }
  }
  const CMat Vinv = lu.inverse();
  co.S_M = co.M_eig.adjoint() * S.cast<cd>() * co.M_eig;

  const Mat I = Mat::Identity(L, L);
  co.X1 = eigenframe_lyapunov(co.M_eig, Vinv, co.mu, S);
  co.Y = eigenframe_lyapunov(co.M_eig, Vinv, co.mu, -I);
  co.K1 = -(S + co.X1 * co.A_tilde);
  co.KY = I - co.Y * co.A_tilde;
  // The Σ-affine part must be skew for Φ + Φᵀ to stay Σ-free.
  co.K1 = 0.5 * (co.K1 - co.K1.transpose());
  co.KY = 0.5 * (co.KY - co.KY.transpose());

  // Anchor point of the fixed point.
  const DiscretePlant disc = discretize(plant, tau);
  SigmaAnchor anchor = opt.anchor;
  if (anchor == SigmaAnchor::Auto) {
    anchor = spectral_radius(disc.A) < 1.0 ? SigmaAnchor::Lyapunov
                                           : SigmaAnchor::ProcessNoise;
  }
  switch (anchor) {
    case SigmaAnchor::Lyapunov:
      co.Sigma_anchor = dlyap(disc.A, disc.W);
      break;
    case SigmaAnchor::ProcessNoise:
      co.Sigma_anchor = disc.W;
      break;
    case SigmaAnchor::Explicit:
      if (opt.sigma_explicit.rows() != L || opt.sigma_explicit.cols() != L) {
        throw ConfigError("explicit sigma anchor must be L×L");
      }
      co.Sigma_anchor = opt.sigma_explicit;
      break;
    case SigmaAnchor::Auto:
      break;
  }
  Vec dir = opt.delta_direction.size() == L ? opt.delta_direction
                                            : Vec::Ones(L);
  if (dir.norm() == 0.0) throw ConfigError("anchor direction is zero");
  co.Delta_anchor = dir.normalized() * 2.0 * std::max(eta_th, 1e-3);

  // f(c)/ΔᵀΔ = c can have several positive roots. Every sign change on a
  // log grid is refined; the first root at which Φ2 + Φ2ᵀ is PSD wins, so
  // the high-urgency value grows with ‖Δ‖. Without such a root the one
  // with the largest min eigenvalue of Φ2 + Φ2ᵀ is used.
  const double rel_tol = opt.tol;
  auto h = [&](double v) { return c_fixed_point_residual(co, v); };
  auto accept = [&](double v) {
    return v > 0.0 && std::abs(h(v)) <= rel_tol * v;
  };
  auto x2_min_eig = [&](double v) {
    return min_sym_eig(co.X1 + v * sigma_bar * F_bar * co.Y);
  };
  std::vector<double> roots;
  int evals = 0;
  {
    double prev_c = 1e-12;
    double prev_h = h(prev_c);
    for (double v = prev_c * 1.25; v <= 1e12; v *= 1.25) {
      const double hv = h(v);
      ++evals;
      if ((prev_h < 0.0 && hv >= 0.0) || (prev_h > 0.0 && hv <= 0.0)) {
        boost::uintmax_t max_it = 400;
        auto tol = [](double x, double y) {
          return std::abs(y - x) <= 1e-15 * std::max(std::abs(x), std::abs(y));
        };
        auto r = boost::math::tools::toms748_solve(h, prev_c, v, tol, max_it);
        evals += static_cast<int>(max_it);
        const double root = 0.5 * (r.first + r.second);
        if (accept(root)) roots.push_back(root);
      }
      prev_c = v;
      prev_h = hv;
    }
  }
  double c = 0.0;
  if (!roots.empty()) {
    const double scale = std::max(1.0, co.X1.norm());
    auto best = roots.end();
    for (auto itr = roots.begin(); itr != roots.end(); ++itr) {
      if (x2_min_eig(*itr) >= -1e-12 * scale) {
        best = itr;
        break;
      }
    }
    if (best == roots.end()) {
      best = std::max_element(roots.begin(), roots.end(), [&](double x, double y) {
        return x2_min_eig(x) < x2_min_eig(y);
      });
    }
    c = *best;
    co.c_method = "bracketing";
    co.c_iterations = evals;
  } else {
    // A root touching zero without a sign change: damped iteration.
    c = std::max(S.trace() / L, 1e-6) / (sigma_bar * F_bar);
    bool done = false;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
      const double target = nu_at(co, c) / co.Delta_anchor.squaredNorm();
      const double next = (1.0 - opt.damping) * c + opt.damping * target;
      if (!std::isfinite(next)) break;
      const bool small_step = std::abs(next - c) <= rel_tol * std::abs(next);
      c = next;
      if (small_step) {
        done = accept(c);
        break;
      }
    }
    if (!done) {
      throw ConvergenceError(
          "build_coefficients: no positive root of the fixed point for c "
          "(calibration error)");
    }
    co.c_method = "damped-iteration";
    co.c_iterations = evals + it + 1;
  }
  co.c_roots = roots;
  co.c_star = c;
  co.c_residual = std::abs(c_fixed_point_residual(co, c)) / c;
  return co;
}

Mat phi(const PriorityCoefficients& co, int regime, const Mat& Sigma) {
  if (regime != 1 && regime != 2) throw ParameterError("regime is 1 or 2");
  if (Sigma.rows() != co.L() || Sigma.cols() != co.L()) {
    throw ParameterError("phi: Sigma must be L×L");
  }
  return 0.5 * co.sym(regime) +
         skew_of(co, regime).cwiseProduct(omega(co.w_tilde, Sigma));
}

Mat phi1(const PriorityCoefficients& co, const Mat& Sigma) {
  return phi(co, 1, Sigma);
}

Mat phi2(const PriorityCoefficients& co, const Mat& Sigma) {
  return phi(co, 2, Sigma);
}

Mat phi_dsigma(const PriorityCoefficients& co, int regime, int j) {
  const int L = co.L();
  Mat E = Mat::Zero(L, L);
  E(j, j) = 1.0;
  const Mat O = omega(co.w_tilde, E);
  return skew_of(co, regime).cwiseProduct(O);
}

Mat phi_residual(const PriorityCoefficients& co, int regime,
                 const Mat& Sigma) {
  const Mat P = phi(co, regime, Sigma);
  Mat R = co.weight(regime) + (P + P.transpose()) * co.A_tilde;
  for (int j = 0; j < co.L(); ++j) {
    R += co.w_tilde(j) * phi_dsigma(co, regime, j);
  }
  return R;
}

int regime_of(const PriorityCoefficients& co, const Vec& Delta) {
  return Delta.norm() < co.eta_th ? 1 : 2;
}

Vec gradient(const PriorityCoefficients& co, const Vec& Delta,
             const Mat& Sigma) {
  (void)Sigma;  // Φ + Φᵀ does not depend on Σ
  return co.sym(regime_of(co, Delta)) * Delta;
}

ThresholdEvaluation rank2_max_eig(const Vec& x, const Vec& y,
                                  const Vec& fallback) {
  ThresholdEvaluation ev;
  const auto L = x.size();
  ev.Xi = x * y.transpose();
  const double nx = x.norm();
  const double ny = y.norm();
  auto unit_or_e1 = [L](const Vec& v) {
    if (v.size() == L && v.norm() > 0.0) return Vec(v.normalized());
    Vec e = Vec::Zero(L);
    if (L > 0) e(0) = 1.0;
    return e;
  };
  if (ny == 0.0 || nx == 0.0) {
    ev.nu_star = 0.0;
    ev.q1 = unit_or_e1(fallback);
    return ev;
  }
  const Vec s = x / nx + y / ny;
  ev.nu_star = 0.5 * nx * ny * s.squaredNorm();
  const double ns = s.norm();
  if (ns > 1e-8) {
    ev.q1 = s / ns;
    return ev;
  }
  // x and y (nearly) antiparallel: the top eigenvalue 0 lives on x⊥.
  const Vec xh = x / nx;
  if (L == 1) {
    ev.q1 = unit_or_e1(fallback);
    return ev;
  }
  Eigen::Index j;
  xh.cwiseAbs().minCoeff(&j);
  Vec e = Vec::Zero(L);
  e(j) = 1.0;
  Vec q = e - xh.dot(e) * xh;
  ev.q1 = q.normalized();
  ev.nu_star = std::max(ev.nu_star, 0.0);
  return ev;
}

ThresholdEvaluation threshold_from_gradient(const Vec& Delta, const Vec& grad,
                                            const Mat& Sigma, double tau) {
  if (!(tau > 0.0)) throw ParameterError("tau must be positive");
  const Vec x = Delta / tau;
  const Vec y = Sigma * grad;
  return rank2_max_eig(x, y, Delta);
}

ThresholdEvaluation threshold(const PriorityCoefficients& co,
                              const Vec& Delta, const Mat& Sigma, double tau) {
  return threshold_from_gradient(Delta, gradient(co, Delta, Sigma), Sigma,
                                 tau);
}

}  // namespace ncs
