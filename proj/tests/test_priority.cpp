#include <gtest/gtest.h>

#include <cmath>

#include "ncs/channel.hpp"
#include "ncs/linalg.hpp"
#include "ncs/priority.hpp"
#include "ncs/rng.hpp"

using namespace ncs;

namespace {

ContinuousPlant reference_plant() {
  ContinuousPlant p;
  p.A_tilde.resize(2, 2);
  p.A_tilde << 1, 2, -1, 3;
  p.B_tilde.resize(2, 2);
  p.B_tilde << 1, 0.2, 0.1, 1;
  p.W_tilde = Eigen::Vector2d(1, 2).asDiagonal().toDenseMatrix();
  return p;
}

ContinuousPlant scalar_plant(double mu, double w = 1.0) {
  ContinuousPlant p;
  p.A_tilde = Mat::Constant(1, 1, mu);
  p.B_tilde = Mat::Constant(1, 1, 1.0);
  p.W_tilde = Mat::Constant(1, 1, w);
  return p;
}

PriorityCoefficients reference_coefficients() {
  const SigmaStarDistribution d(3, 2);
  return build_coefficients(reference_plant(), 0.05, Mat::Identity(2, 2), d.mean(),
                            2.0, 1500.0, 0.31);
}

Mat random_psd(RngStream& rng, int L) {
  Mat G(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) G(i, j) = rng.normal();
  return G * G.transpose();
}

// S_i + (Φ+Φᵀ)Ã + Σ_j w̃_jj ∂Φ/∂Σ_jj with the derivative taken by central
// differences of phi() (exact for an affine map up to rounding).
Mat fd_residual(const PriorityCoefficients& co, int regime, const Mat& Sigma) {
  const Mat P = phi(co, regime, Sigma);
  Mat r = co.weight(regime) + (P + P.transpose()) * co.A_tilde;
  for (int j = 0; j < co.L(); ++j) {
    Mat up = Sigma, dn = Sigma;
    up(j, j) += 0.5;
    dn(j, j) -= 0.5;
    r += co.w_tilde(j) * (phi(co, regime, up) - phi(co, regime, dn));
  }
  return r;
}

}  // namespace

TEST(Coefficients, ScalarClosedForms) {
  const double mu = 0.7, s = 2.5;
  const auto co = build_coefficients(scalar_plant(mu), 0.05, Mat::Constant(1, 1, s),
                                     1.0, 1.0, 10.0, 0.3);
  const Mat S0 = Mat::Zero(1, 1), S1 = Mat::Constant(1, 1, 4.0);
  EXPECT_NEAR(phi1(co, S0)(0, 0), -s / (2 * mu), 1e-14);
  EXPECT_NEAR(phi1(co, S1)(0, 0), -s / (2 * mu), 1e-14);
  const double c = co.c_star;
  EXPECT_GT(c, 0.0);
  EXPECT_NEAR(phi2(co, S1)(0, 0), -(s - c * co.sigma_bar * co.F_bar) / (2 * mu), 1e-12);
}

TEST(Coefficients, DiagonalPlantAtZeroSigma) {
  ContinuousPlant p;
  p.A_tilde = Eigen::Vector2d(1.0, 3.0).asDiagonal().toDenseMatrix();
  p.B_tilde = Mat::Identity(2, 2);
  p.W_tilde = Eigen::Vector2d(1, 2).asDiagonal().toDenseMatrix();
  Mat S(2, 2);
  S << 2.0, 0.0, 0.0, 5.0;
  const auto co = build_coefficients(p, 0.05, S, 1.5, 2.0, 100.0, 0.3);
  const Mat P = phi1(co, Mat::Zero(2, 2));
  EXPECT_NEAR(P(0, 0), -0.5 * 2.0 / 1.0, 1e-12);
  EXPECT_NEAR(P(1, 1), -0.5 * 5.0 / 3.0, 1e-12);
  EXPECT_NEAR(P(0, 1), 0.0, 1e-12);
}

TEST(Coefficients, OpposingEigenvaluesRejected) {
  ContinuousPlant p;
  p.A_tilde = Eigen::Vector2d(1.0, -1.0).asDiagonal().toDenseMatrix();
  p.B_tilde = Mat::Identity(2, 2);
  p.W_tilde = Mat::Identity(2, 2);
  EXPECT_THROW(build_coefficients(p, 0.05, Mat::Identity(2, 2), 1.0, 1.0, 1.0, 0.3),
               NumericError);
}

TEST(Coefficients, EigenDataAndFixedPoint) {
  const auto co = reference_coefficients();
  const CMat lhs = co.A_tilde.cast<cd>() * co.M_eig;
  const CMat rhs = co.M_eig * co.mu.asDiagonal();
  EXPECT_LE((lhs - rhs).norm(), 1e-9 * lhs.norm());
  EXPECT_GT(co.c_star, 0.0);
  EXPECT_LE(std::abs(c_fixed_point_residual(co, co.c_star)), 1e-8 * std::max(1.0, co.c_star));
  // The selected root leaves the high-urgency quadratic form PSD.
  EXPECT_GE(min_sym_eig(co.sym(2)), -1e-12);
}

TEST(Coefficients, ZeroShiftRecoversLowUrgency) {
  auto co = reference_coefficients();
  co.c_star = 0.0;
  RngStream rng(1);
  const Mat S = random_psd(rng, 2);
  EXPECT_LE((phi2(co, S) - phi1(co, S)).norm(), 1e-14);
}

TEST(Coefficients, DefiningEquationResiduals) {
  const auto co = reference_coefficients();
  RngStream rng(2);
  for (int t = 0; t < 1000; ++t) {
    const Mat S = random_psd(rng, 2) * (1.0 + 10.0 * rng.uniform());
    for (int regime : {1, 2}) {
      ASSERT_LE(phi_residual(co, regime, S).norm(), 1e-8) << regime;
      ASSERT_LE(fd_residual(co, regime, S).norm(), 1e-8) << regime;
    }
  }
}

TEST(Coefficients, AffineInSigma) {
  const auto co = reference_coefficients();
  RngStream rng(3);
  const Mat S = random_psd(rng, 2);
  Mat E = random_psd(rng, 2);
  E /= E.norm();
  for (int regime : {1, 2}) {
    const double eps = 1e-3;
    Mat pred = phi(co, regime, S);
    for (int j = 0; j < 2; ++j) pred += eps * E(j, j) * phi_dsigma(co, regime, j);
    EXPECT_LE((phi(co, regime, S + eps * E) - pred).norm(), 1e-12);
  }
  // ‖Φ1(tI)‖ grows at most linearly in t.
  const double n1 = phi1(co, Mat::Identity(2, 2)).norm();
  const double n10 = phi1(co, 10.0 * Mat::Identity(2, 2)).norm();
  const double n0 = phi1(co, Mat::Zero(2, 2)).norm();
  EXPECT_LE(n10, n0 + 10.0 * (n1 + n0) + 1e-12);
}

TEST(Gradient, LinearityAndRegimes) {
  const auto co = reference_coefficients();
  const Mat S = Mat::Identity(2, 2);
  EXPECT_TRUE(gradient(co, Vec::Zero(2), S).isZero());
  const Vec small = Eigen::Vector2d(0.05, 0.02);
  EXPECT_LE((gradient(co, 2.0 * small, S) - 2.0 * gradient(co, small, S)).norm(), 1e-14);
  const Vec big = Eigen::Vector2d(1.0, -2.0);
  EXPECT_LE((gradient(co, 2.0 * big, S) - 2.0 * gradient(co, big, S)).norm(), 1e-12);
  const Vec edge = Vec::Unit(2, 0) * co.eta_th;
  EXPECT_EQ(regime_of(co, edge), 2);
  EXPECT_EQ(regime_of(co, 0.999 * edge), 1);
}

TEST(Gradient, FiniteDifference) {
  const auto co = reference_coefficients();
  RngStream rng(4);
  for (int t = 0; t < 50; ++t) {
    const Mat S = random_psd(rng, 2);
    Vec D = rng.normal_vec(2);
    const int r = regime_of(co, D);
    const Mat P = phi(co, r, S);
    auto V = [&](const Vec& v) { return v.dot(P * v); };
    Vec fd(2);
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i) {
      Vec a = D, b = D;
      a(i) += h;
      b(i) -= h;
      fd(i) = (V(a) - V(b)) / (2 * h);
    }
    ASSERT_LE((gradient(co, D, S) - fd).norm(), 1e-6 * std::max(1.0, fd.norm()));
  }
}

TEST(Rank2, HandCases) {
  const Vec e1 = Vec::Unit(2, 0), e2 = Vec::Unit(2, 1);
  auto a = rank2_max_eig(e1, e2, e1);
  EXPECT_NEAR(a.nu_star, 1.0, 1e-15);
  EXPECT_NEAR(a.q1(0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(a.q1(1), 1.0 / std::sqrt(2.0), 1e-15);
  auto b = rank2_max_eig(e1, e1, e2);
  EXPECT_NEAR(b.nu_star, 2.0, 1e-15);
  EXPECT_NEAR(std::abs(b.q1(0)), 1.0, 1e-15);
  auto c = rank2_max_eig(e1, Vec::Zero(2), e2);
  EXPECT_EQ(c.nu_star, 0.0);
  EXPECT_TRUE(c.q1.isApprox(e2));
}

TEST(Rank2, DenseEigensolverOracle) {
  // Extended-precision reference: near antiparallel (x, y) the top
  // eigenvalue is tiny next to ‖M‖ and a double solver cannot resolve it.
  using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  RngStream rng(5);
  for (int L : {2, 3, 5}) {
    for (int t = 0; t < 10000; ++t) {
      const Vec x = rng.normal_vec(L), y = rng.normal_vec(L);
      const auto ev = rank2_max_eig(x, y, Vec::Unit(L, 0));
      const MatL xl = x.cast<long double>(), yl = y.cast<long double>();
      const MatL Ml = xl * yl.transpose() + yl * xl.transpose();
      Eigen::SelfAdjointEigenSolver<MatL> es(Ml);
      const long double ref = es.eigenvalues()(L - 1);
      ASSERT_LE(std::abs(ev.nu_star - ref), 1e-10 * std::abs(ref));
      ASSERT_NEAR(ev.q1.norm(), 1.0, 1e-12);
      const Mat M = Ml.cast<double>();
      ASSERT_LE((M * ev.q1 - ev.nu_star * ev.q1).norm(), 1e-12 * M.norm());
      if (ref > 1e-3 * M.norm()) {
        const Vec v = es.eigenvectors().col(L - 1).cast<double>();
        ASSERT_NEAR(std::abs(ev.q1.dot(v)), 1.0, 1e-9);
      }
    }
  }
}

TEST(Threshold, Properties) {
  const auto co = reference_coefficients();
  RngStream rng(6);
  for (int t = 0; t < 200; ++t) {
    const Mat S = random_psd(rng, 2);
    const Vec D = rng.normal_vec(2) * 2.0;
    const auto ev = threshold(co, D, S, 0.05);
    const Mat sym = ev.Xi + ev.Xi.transpose();
    ASSERT_NEAR(ev.q1.norm(), 1.0, 1e-12);
    ASSERT_LE((sym * ev.q1 - ev.nu_star * ev.q1).norm(), 1e-9 * std::max(1.0, ev.nu_star));
    if (gradient(co, D, S).dot(S * D) >= 0.0) ASSERT_GE(ev.nu_star, 0.0);
    // Both x = Δ/τ and y = Σ∇V are linear in Δ, so ν* is quadratic in t.
    if (regime_of(co, D) == 2) {
      for (double k : {2.0, 10.0}) {
        const auto s = threshold(co, k * D, S, 0.05);
        ASSERT_NEAR(s.nu_star, k * k * ev.nu_star, 1e-9 * std::abs(k * k * ev.nu_star) + 1e-12);
        ASSERT_GE(s.nu_star, ev.nu_star - 1e-9 * std::abs(ev.nu_star));
      }
    }
  }
  const auto z = threshold(co, Vec::Zero(2), Mat::Identity(2, 2), 0.05);
  EXPECT_EQ(z.nu_star, 0.0);
  EXPECT_NEAR(z.q1.norm(), 1.0, 1e-15);
}

TEST(Threshold, TauScaling) {
  const auto co = reference_coefficients();
  const Vec D = Eigen::Vector2d(1.0, 0.5);
  const Mat S = Mat::Identity(2, 2);
  const double a = threshold(co, D, S, 0.05).nu_star;
  const double b = threshold(co, D, S, 0.1).nu_star;
  EXPECT_NEAR(a, 2.0 * b, 1e-12 * a);
}
