#include "ncs/estimator.hpp"

#include <sstream>

#include <cmath>

#include "ncs/linalg.hpp"

namespace ncs {

namespace {
constexpr double kImagTol = 1e-9;
}

EstimatorState EstimatorState::initial(const Vec& x0) {
  const auto L = x0.size();
  EstimatorState s;
  s.x_hat = x0;
  s.Delta = Vec::Zero(L);
  s.Sigma = Mat::Zero(L, L);
  s.Delta_virtual = Vec::Zero(L);
  return s;
}

CMat augment(const CMat& E) {
  CMat Ea(2 * E.rows(), E.cols());
  Ea.topRows(E.rows()) = E;
  Ea.bottomRows(E.rows()) = E.conjugate();
  return Ea;
}

CVec augment(const CVec& y) {
  CVec ya(2 * y.size());
  ya.head(y.size()) = y;
  ya.tail(y.size()) = y.conjugate();
  return ya;
}

CMat kalman_gain(const Mat& Sigma, const CMat& E_a) {
  if (!Sigma.allFinite() || !E_a.allFinite()) {
    throw NumericError("kalman_gain: non-finite input");
  }
  const CMat Sc = Sigma.cast<cd>();
  const CMat SEh = Sc * E_a.adjoint();                     // L×2N_r
  CMat G = E_a * SEh;                                      // 2N_r×2N_r
  G.diagonal().array() += 1.0;
  // K = SEh G⁻¹  ⇔  G K ᴴ = SEhᴴ (G Hermitian PD).
  CMat Kh = G.ldlt().solve(SEh.adjoint());
  CMat K = Kh.adjoint();
  // Exact gain is [K₁, conj(K₁)]; project out rounding drift, which grows
  // with cond(G) when Σ is large.
  if (E_a.rows() % 2 == 0) {
    const auto n = E_a.rows() / 2;
    if ((E_a.bottomRows(n) - E_a.topRows(n).conjugate()).cwiseAbs().maxCoeff() == 0.0) {
      const CMat K1 = 0.5 * (K.leftCols(n) + K.rightCols(n).conjugate());
      K.leftCols(n) = K1;
      K.rightCols(n) = K1.conjugate();
    }
  }
  if (!K.allFinite()) throw NumericError("kalman_gain: non-finite gain");
  return K;
}

Mat gain_contraction(const CMat& K_a, const CMat& E_a) {
  const auto L = E_a.cols();
  CMat KE = K_a * E_a;
  const double scale = std::max(1.0, KE.cwiseAbs().maxCoeff());
  return Mat::Identity(L, L) - real_or_throw(KE / scale, kImagTol,
                                             "gain_contraction") * scale;
}

Mat posterior_covariance(const Mat& Sigma, const CMat& E_a, const CMat& K_a,
                         const CovarianceOptions& opt) {
  if (E_a.size() == 0 || E_a.cwiseAbs().maxCoeff() == 0.0) return Sigma;
  if (opt.joseph) {
    const Mat IKE = gain_contraction(K_a, E_a);
    const Mat KKh = (K_a * K_a.adjoint()).real();
    return symmetrize(IKE * Sigma * IKE.transpose() + KKh);
  }
  const CMat Sc = Sigma.cast<cd>();
  CMat P = Sc - K_a * E_a * Sc;
  const double scale = std::max(1.0, Sigma.cwiseAbs().maxCoeff());
  Mat Pr = real_or_throw(P / scale, kImagTol, "posterior_covariance") * scale;
  return symmetrize(Pr);
}

Mat update_covariance(const Mat& Sigma, const CMat& E_a,
                      const DiscretePlant& disc,
                      const CovarianceOptions& opt) {
  const CMat K = kalman_gain(Sigma, E_a);
  const Mat P = posterior_covariance(Sigma, E_a, K, opt);
  Mat next = symmetrize(disc.A * P * disc.A.transpose() + disc.W);
  const double scale = std::max(1.0, next.norm());
  if (!next.allFinite() || min_sym_eig(next) < -1e-10 * scale) {
    Eigen::JacobiSVD<Mat> svd(Sigma);
    const double cond =
        svd.singularValues()(0) /
        std::max(svd.singularValues()(svd.singularValues().size() - 1),
                 1e-300);
    throw NumericError("update_covariance: lost positive semidefiniteness "
                       "(cond(Sigma) = " + std::to_string(cond) + ")");
  }
  return next;
}

Vec update_estimate(const Vec& x_hat_prev, const Vec& u_prev,
                    const CVec& y_a, const CMat& E_a, const CMat& K_a,
                    const DiscretePlant& disc) {
  const Vec pred = disc.A * x_hat_prev + disc.B * u_prev;
  if (E_a.size() == 0 || K_a.cwiseAbs().maxCoeff() == 0.0) return pred;
  const CVec innov = y_a - E_a * pred.cast<cd>();
  const CVec corr = K_a * innov;
  // Cancellation error of the conjugate pair is relative to |K|·|innov|.
  const double scale =
      std::max({1.0, pred.cwiseAbs().maxCoeff(),
                K_a.cwiseAbs().maxCoeff() * innov.cwiseAbs().sum()});
  const double resid = corr.imag().cwiseAbs().maxCoeff();
  if (resid > kImagTol * scale) {
    std::ostringstream os;
    os << "update_estimate: imaginary residue " << resid << " at scale " << scale;
    throw NumericError(os.str() +
                       " (conjugate symmetry of the augmented pair broken)");
  }
  return pred + corr.real();
}

Vec update_virtual_error(const Vec& Delta_virtual, const CMat& K_a,
                         const CMat& E_a, const DiscretePlant& disc,
                         const Vec& disturbance) {
  Vec prior = disc.A * Delta_virtual;
  if (disturbance.size() == prior.size()) prior += disturbance;
  if (E_a.size() == 0 || K_a.cwiseAbs().maxCoeff() == 0.0) return prior;
  return gain_contraction(K_a, E_a) * prior;
}

}  // namespace ncs
