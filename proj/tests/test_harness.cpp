#include <gtest/gtest.h>

#include <cmath>

#include "ncs/config.hpp"
#include "ncs/harness.hpp"

using namespace ncs;

namespace {

SimConfig small_reference(PolicyKind k, long horizon = 4000, int episodes = 3) {
  SimConfig c = SimConfig::paper_preset();
  c.policy.kind = k;
  c.horizon = horizon;
  c.episodes = episodes;
  c.threads = 1;
  return c;
}

SimConfig scalar_config() {
  SimConfig c;
  c.plant.A_tilde = Mat::Constant(1, 1, 1.0);
  c.plant.B_tilde = Mat::Constant(1, 1, 1.0);
  c.plant.W_tilde = Mat::Constant(1, 1, 1.0);
  c.Q = Mat::Constant(1, 1, 1.0);
  c.R = Mat::Constant(1, 1, 1.0);
  c.Nt = 1;
  c.Nr = 1;
  c.tau = 0.05;
  c.F_bar = 1.0;
  c.lambda = 2.0;
  c.policy.eta_th = 0.8;
  c.horizon = 3000;
  c.episodes = 2;
  c.threads = 1;
  return c;
}

}  // namespace

TEST(Episode, NoiselessPlantWithKnownStart) {
  SimConfig c = small_reference(PolicyKind::Dormant, 500, 1);
  c.plant.W_tilde = Mat::Zero(2, 2);
  c.x0 = Eigen::Vector2d(0.3, -0.2);
  const Runtime rt = prepare(c);
  const auto m = run_episode(rt, 11);
  EXPECT_EQ(m.avg_weighted_error, 0.0);
  EXPECT_EQ(m.mse, 0.0);
  EXPECT_EQ(m.activation_rate, 0.0);
}

TEST(Episode, DormantOnUnstablePlantDiverges) {
  SimConfig c = small_reference(PolicyKind::Dormant, 100000, 2);
  const auto b = run_episodes(prepare(c));
  EXPECT_EQ(b.n_diverged, 2);
  for (const auto& e : b.episodes) {
    EXPECT_TRUE(e.diverged);
    EXPECT_GT(e.divergence_slot, 0);
  }
}

TEST(Episode, ObjectiveIdentityAndTriggerReplay) {
  const SimConfig c = small_reference(PolicyKind::ProposedFeedback);
  const Runtime rt = prepare(c);
  EpisodeOptions o;
  o.record_trace = true;
  const auto m = run_episode(rt, 5, o);
  EXPECT_NEAR(m.objective, m.avg_weighted_error + c.lambda * m.avg_power_gain,
              1e-12 * m.objective);
  EXPECT_NEAR(m.avg_weighted_error, m.mse * c.tau, 1e-12 * m.mse);
  EXPECT_NEAR(m.normalized_mse, m.mse / rt.normalizer, 1e-12 * m.mse);
  ASSERT_EQ(static_cast<long>(m.trace.size()), m.slots);
  long active = 0;
  for (const auto& t : m.trace) {
    ASSERT_EQ(t.mode == 1, c.lambda < t.sigma_star * t.nu_star) << t.slot;
    ASSERT_NEAR(t.power_gain, t.mode == 1 ? c.F_bar : 0.0, 1e-12);
    active += t.mode;
  }
  EXPECT_EQ(active, m.active_slots);
  EXPECT_GT(active, 0);
  EXPECT_LT(active, m.slots);
}

TEST(Episode, DeterministicAcrossThreadCounts) {
  SimConfig c = small_reference(PolicyKind::ProposedFeedback, 2000, 4);
  const auto a = run_episodes(prepare(c));
  c.threads = 3;
  const auto b = run_episodes(prepare(c));
  ASSERT_EQ(a.episodes.size(), b.episodes.size());
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    EXPECT_EQ(a.episodes[i].metrics.objective, b.episodes[i].metrics.objective);
    EXPECT_EQ(a.episodes[i].metrics.active_slots, b.episodes[i].metrics.active_slots);
  }
  EXPECT_EQ(a.normalized_mse.mean, b.normalized_mse.mean);
}

TEST(Episode, BaselinesRun) {
  for (auto k : {PolicyKind::Epds, PolicyKind::Adp, PolicyKind::ProposedVirtual}) {
    const auto b = run_episodes(prepare(small_reference(k, 2000, 2)));
    EXPECT_EQ(b.n_diverged, 0) << to_string(k);
    EXPECT_TRUE(std::isfinite(b.normalized_mse.mean)) << to_string(k);
  }
  // EPDS transmits every slot at full budget.
  const auto e = run_episodes(prepare(small_reference(PolicyKind::Epds, 2000, 1)));
  EXPECT_EQ(e.activation.mean, 1.0);
  EXPECT_NEAR(e.power_gain.mean, 2.0 * 0.05, 1e-12);
}

TEST(Episode, ThresholdSamplesFromPilot) {
  const Runtime rt = prepare(small_reference(PolicyKind::ProposedFeedback));
  const auto s = pilot_threshold_samples(rt, 1500, 100);
  EXPECT_EQ(s.size(), 1400u);
  for (const auto& t : s) {
    ASSERT_NEAR(t.q.norm(), 1.0, 1e-9);
    ASSERT_GE(t.nu, 0.0);
    ASSERT_EQ(t.delta.size(), 2);
  }
}

TEST(Config, JsonRoundTrip) {
  SimConfig c = SimConfig::paper_preset();
  c.lambda = 700.0;
  c.horizon = 1234;
  c.x0 = Eigen::Vector2d(0.5, 1.0);
  c.policy.kind = PolicyKind::Epds;
  const SimConfig b = config_from_json_text(config_to_json_text(c));
  EXPECT_EQ(b.lambda, 700.0);
  EXPECT_EQ(b.horizon, 1234);
  EXPECT_EQ(b.x0, c.x0);
  EXPECT_EQ(b.plant.A_tilde, c.plant.A_tilde);
  EXPECT_EQ(b.policy.kind, PolicyKind::Epds);
  EXPECT_EQ(config_to_json_text(b), config_to_json_text(c));
}

TEST(Config, Rejections) {
  EXPECT_THROW(config_from_json_text(R"({"preset":"paper","lambada":3})"), ConfigError);
  EXPECT_THROW(config_from_json_text(R"({"preset":"paper","plant":{"A":[[1]]}})"), ConfigError);
  EXPECT_THROW(config_from_json_text(R"({"preset":"paper","tau":-1})"), ConfigError);
  EXPECT_THROW(config_from_json_text(R"({"preset":"paper","horizon":10,"burn_in":10})"),
               ConfigError);
  EXPECT_THROW(config_from_json_text("{not json"), ConfigError);
  EXPECT_NO_THROW(config_from_json_text(R"({"preset":"paper"})"));
}

TEST(Calibration, SinglePointGrid) {
  SimConfig c = small_reference(PolicyKind::ProposedFeedback, 1500, 2);
  const auto curve = calibrate_eta(c, {0.31});
  EXPECT_EQ(curve.best_index, 0);
  EXPECT_EQ(curve.best_eta, 0.31);
  EXPECT_EQ(curve.normalized_mse.size(), 1u);
}

TEST(Oracle, OptimumBoundsProposedOnGrid) {
  const SimConfig c = scalar_config();
  MdpConfig g;
  g.n_delta = 21;
  g.n_sigma = 10;
  g.n_channel = 8;
  const auto r = compare_with_oracle(c, g);
  EXPECT_GT(r.theta_optimal, 0.0);
  EXPECT_GE(r.theta_proposed, r.theta_optimal * (1.0 - 1e-6));
  EXPECT_GE(r.loss_model, -1e-4);
  EXPECT_TRUE(std::isfinite(r.loss_sim));
}

TEST(Sweep, RecordsRows) {
  SimConfig c = small_reference(PolicyKind::ProposedFeedback, 1000, 1);
  const auto rows = sweep(c, SweepAxis::FBar, {1.0, 4.0}, {PolicyKind::Epds, PolicyKind::Dormant});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].value, 1.0);
  EXPECT_EQ(rows[0].policy, "epds");
  EXPECT_EQ(parse_sweep_axis(to_string(SweepAxis::Lambda)), SweepAxis::Lambda);
}
