#include <gtest/gtest.h>

#include <cmath>

#include "ncs/channel.hpp"
#include "ncs/precoder.hpp"
#include "ncs/priority.hpp"

using namespace ncs;

namespace {

PriorityCoefficients reference_coefficients(double lambda = 1500.0) {
  ContinuousPlant p;
  p.A_tilde.resize(2, 2);
  p.A_tilde << 1, 2, -1, 3;
  p.B_tilde.resize(2, 2);
  p.B_tilde << 1, 0.2, 0.1, 1;
  p.W_tilde = Eigen::Vector2d(1, 2).asDiagonal().toDenseMatrix();
  const SigmaStarDistribution d(3, 2);
  return build_coefficients(p, 0.05, Mat::Identity(2, 2), d.mean(), 2.0, lambda, 0.31);
}

Mat random_psd(RngStream& rng, int L) {
  Mat G(L, L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) G(i, j) = rng.normal();
  return G * G.transpose();
}

}  // namespace

TEST(Decide, ThresholdComparison) {
  RngStream rng(1);
  const auto chan = draw_channel(rng, 3, 2);
  ThresholdEvaluation ev;
  ev.q1 = Vec::Unit(2, 0);
  ev.nu_star = 10.0 / chan.sigma_star;
  const auto off = decide(ev, chan, 2.0, 30.0);
  EXPECT_FALSE(off.active);
  EXPECT_TRUE(off.F.isZero());
  EXPECT_EQ(off.power_gain, 0.0);
  const auto on = decide(ev, chan, 2.0, 5.0);
  EXPECT_TRUE(on.active);
  // Ties stay dormant.
  ev.nu_star = 1.0;
  EXPECT_FALSE(decide(ev, chan, 2.0, chan.sigma_star).active);
}

TEST(Propose, ActiveStructure) {
  const auto co = reference_coefficients(1.0);
  RngStream rng(2);
  int active = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto chan = draw_channel(rng, 3, 2);
    const Mat S = random_psd(rng, 2);
    const Vec D = rng.normal_vec(2);
    const auto a = propose(co, D, S, chan, 0.05);
    ASSERT_EQ(a.active, co.lambda < a.sigma_star * a.nu_star);
    ASSERT_LE(a.power_gain, co.F_bar + 1e-9);
    if (!a.active) {
      ASSERT_TRUE(a.F.isZero());
      continue;
    }
    ++active;
    ASSERT_NEAR(a.power_gain, co.F_bar, 1e-9);
    Eigen::JacobiSVD<CMat> svd(a.F);
    ASSERT_LE(svd.singularValues()(1), 1e-9 * svd.singularValues()(0));
    // The received energy is maximized along q1 with gain F̄σ*.
    const CMat HF = chan.H * a.F;
    const double along = (HF * a.q1.cast<cd>()).squaredNorm();
    ASSERT_NEAR(along, co.F_bar * chan.sigma_star, 1e-9 * co.F_bar * chan.sigma_star);
    Eigen::JacobiSVD<CMat> hs(HF);
    ASSERT_NEAR(hs.singularValues()(0) * hs.singularValues()(0), along, 1e-9 * along);
  }
  EXPECT_GT(active, 100);
}

TEST(Propose, MonotoneInErrorScale) {
  const auto co = reference_coefficients();
  RngStream rng(3);
  for (int t = 0; t < 2000; ++t) {
    const auto chan = draw_channel(rng, 3, 2);
    const Mat S = random_psd(rng, 2);
    Vec D = rng.normal_vec(2);
    if (D.norm() < co.eta_th) D *= 1.01 * co.eta_th / D.norm();
    const bool base = propose(co, D, S, chan, 0.05).active;
    for (double k : {1.5, 3.0, 10.0}) {
      if (base) ASSERT_TRUE(propose(co, k * D, S, chan, 0.05).active);
    }
  }
}

TEST(Epds, Construction) {
  RngStream rng(4);
  const auto chan = draw_channel(rng, 3, 2);
  const auto a = baseline_epds(chan, 2.0, 2);
  EXPECT_NEAR(a.power_gain, 2.0, 1e-12);
  EXPECT_TRUE(a.active);
  // F = √(F̄/L)·U·Ῡ: F's columns are the top L eigenvectors.
  EXPECT_LE((a.F - std::sqrt(1.0) * chan.U.leftCols(2)).norm(), 1e-12);
  const CMat Ups = chan.U.adjoint() * a.F / std::sqrt(1.0);
  EXPECT_LE(Ups.row(2).norm(), 1e-12);
  // L = 1 coincides with beamforming on the top eigenchannel.
  const auto b = baseline_epds(chan, 2.0, 1);
  const auto c = beam_action(chan, 2.0, Vec::Ones(1));
  EXPECT_LE((b.F - c.F).norm(), 1e-12);
  EXPECT_THROW(baseline_epds(draw_channel(rng, 1, 1), 1.0, 2), ParameterError);
}

TEST(Adp, ZeroTdErrorKeepsParameters) {
  AdpParameters p = adp_init(2);
  p.r1 = 0.3;
  p.r2 = Eigen::Vector2d(0.1, -0.2);
  p.rho = 1.5;
  const Vec D = Eigen::Vector2d(0.4, 0.2);
  const Mat S = Mat::Identity(2, 2);
  const auto n = baseline_adp_step(p, p.rho, D, S, D, S);
  EXPECT_EQ(n.r1, p.r1);
  EXPECT_EQ(n.r2, p.r2);
  EXPECT_EQ(n.rho, p.rho);
  EXPECT_EQ(n.k, 1);
}

TEST(Adp, AverageCostOfConstantStream) {
  AdpParameters p = adp_init(2);
  const Vec Z = Vec::Zero(2);
  const Mat S = Mat::Identity(2, 2);
  for (int i = 0; i < 200000; ++i) p = baseline_adp_step(p, 3.0, Z, S, Z, S);
  EXPECT_NEAR(p.rho, 3.0, 1e-3);
}

TEST(Adp, GradientAndReset) {
  AdpParameters p = adp_init(2);
  p.r1 = 0.7;
  p.r2 = Eigen::Vector2d(1.0, 2.0);
  Mat S(2, 2);
  S << 2.0, 0.3, 0.1, 1.0;
  const Vec D = Eigen::Vector2d(0.5, -1.0);
  Vec fd(2);
  for (int i = 0; i < 2; ++i) {
    Vec a = D, b = D;
    a(i) += 1e-6;
    b(i) -= 1e-6;
    fd(i) = (p.value(a, S) - p.value(b, S)) / 2e-6;
  }
  EXPECT_LE((p.gradient(D, S) - fd).norm(), 1e-6);

  AdpOptions o;
  o.norm_cap = 1.0;
  const auto r = baseline_adp_step(p, 1e9, D, S, 10.0 * D, S, o);
  EXPECT_EQ(r.resets, 1);
  EXPECT_EQ(r.r1, o.r1_init);
  EXPECT_TRUE(r.r2.isZero());
}

TEST(Policies, ParseRoundTrip) {
  for (auto k : {PolicyKind::ProposedFeedback, PolicyKind::ProposedVirtual, PolicyKind::Epds,
                 PolicyKind::EfcVia, PolicyKind::SpsisVia, PolicyKind::Adp, PolicyKind::Oracle,
                 PolicyKind::Dormant}) {
    EXPECT_EQ(parse_policy(to_string(k)), k);
  }
  EXPECT_THROW(parse_policy("bf-epds"), ConfigError);
}

TEST(ThresholdVia, LookupAndEpds) {
  DiscretePlant d;
  d.A = Mat::Constant(1, 1, std::exp(0.05));
  d.B = Mat::Constant(1, 1, 1.0);
  d.W = Mat::Constant(1, 1, 0.05);
  d.tau = 0.05;
  const SigmaStarDistribution dist(1, 1);
  MdpConfig cfg;
  cfg.model = MdpModel::ErrorFree;
  cfg.n_delta = 41;
  cfg.lambda = 2.0;
  ViaPolicy vp;
  vp.mdp = discretize_mdp(d, dist, cfg);
  vp.sol = relative_value_iteration(vp.mdp);
  EXPECT_EQ(monotonicity_violations(vp.mdp, vp.sol), 0);
  RngStream rng(5);
  const auto chan = draw_channel(rng, 1, 1);
  long oor = 0;
  int idle = 0, busy = 0;
  for (int s = 0; s < vp.mdp.n_states; ++s) {
    const MdpPoint p = vp.mdp.point(s);
    const auto a = baseline_threshold_via(vp, p, chan, 1.0, 1, &oor);
    ASSERT_EQ(a.active, vp.sol.policy[s] != 0);
    if (a.active) {
      ++busy;
      ASSERT_NEAR(a.power_gain, 1.0, 1e-12);
    } else {
      ++idle;
      ASSERT_TRUE(a.F.isZero());
    }
  }
  EXPECT_GT(idle, 0);
  EXPECT_GT(busy, 0);
  EXPECT_EQ(oor, 0);
  MdpPoint far;
  far.Delta = Vec::Constant(1, 1e3);
  far.Sigma = d.W;
  baseline_threshold_via(vp, far, chan, 1.0, 1, &oor);
  EXPECT_EQ(oor, 1);
}
