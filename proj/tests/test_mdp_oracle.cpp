#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "ncs/channel.hpp"
#include "ncs/mdp_oracle.hpp"
#include "ncs/plant.hpp"

using namespace ncs;

namespace {

DiscretePlant scalar_disc(double a, double w, double tau = 0.05) {
  DiscretePlant d;
  d.A = Mat::Constant(1, 1, a);
  d.B = Mat::Constant(1, 1, 1.0);
  d.W = Mat::Constant(1, 1, w);
  d.tau = tau;
  return d;
}

// Hand-built chain with one dormant row per state.
DiscretizedMdp chain(const std::vector<double>& cost,
                     const std::vector<std::vector<MdpEntry>>& next) {
  DiscretizedMdp m;
  m.L = 1;
  m.disc = scalar_disc(1.0, 1.0, 1.0);
  m.n_states = static_cast<int>(cost.size());
  m.n_delta_cells = m.n_states;
  m.n_actions = 1;
  m.rows_per_state = 1;
  m.chan_nodes = {1.0};
  m.chan_weights = {1.0};
  m.cost = cost;
  m.row_begin.push_back(0);
  for (const auto& row : next) {
    m.entries.insert(m.entries.end(), row.begin(), row.end());
    m.row_begin.push_back(static_cast<std::int64_t>(m.entries.size()));
  }
  return m;
}

double phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

TEST(Via, SingleState) {
  const auto m = chain({0.7}, {{{0, 1.0}}});
  ViaOptions o;
  o.ref_state = 0;
  const auto sol = relative_value_iteration(m, o);
  EXPECT_NEAR(sol.theta * m.disc.tau, 0.7, 1e-12);
  EXPECT_NEAR(sol.V[0], 0.0, 1e-15);
}

TEST(Via, LazyTwoStateCycle) {
  // A self-loop of weight 1/2 keeps the chain aperiodic without changing
  // the stationary law, so θτ is still the cycle average.
  const auto m = chain({1.0, 3.0}, {{{0, 0.5}, {1, 0.5}}, {{0, 0.5}, {1, 0.5}}});
  ViaOptions o;
  o.ref_state = 0;
  const auto sol = relative_value_iteration(m, o);
  EXPECT_NEAR(sol.theta, 2.0, 1e-6 * 2.0);
}

TEST(Via, DeterministicTwoStateCycle) {
  const auto m = chain({1.0, 3.0}, {{{1, 1.0}}, {{0, 1.0}}});
  ViaOptions o;
  o.ref_state = 0;
  o.aperiodicity = 0.5;
  const auto sol = relative_value_iteration(m, o);
  EXPECT_NEAR(sol.theta, 2.0, 1e-6 * 2.0);
}

TEST(Via, ReferenceStateInvariance) {
  const auto m = chain({1.0, 0.2, 5.0},
                       {{{0, 0.2}, {1, 0.8}}, {{2, 0.6}, {0, 0.4}}, {{0, 1.0}}});
  ViaOptions a, b;
  a.ref_state = 0;
  b.ref_state = 2;
  const double ta = relative_value_iteration(m, a).theta;
  const double tb = relative_value_iteration(m, b).theta;
  EXPECT_NEAR(ta, tb, 2e-6 * ta);
}

TEST(Via, PerformanceLoss) {
  EXPECT_EQ(performance_loss(2.0, 2.0), 0.0);
  EXPECT_NEAR(performance_loss(2.2, 2.0), 10.0, 1e-12);
  EXPECT_THROW(performance_loss(1.0, 0.0), ParameterError);
}

class ScalarMdp : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg.n_delta = 21;
    cfg.n_sigma = 8;
    cfg.n_channel = 4;
    cfg.F_bar = 1.0;
    cfg.lambda = 2.0;
    mdp = discretize_mdp(disc, dist, cfg);
  }
  DiscretePlant disc = scalar_disc(std::exp(0.05), 0.05 * std::exp(0.05));
  SigmaStarDistribution dist{1, 1};
  MdpConfig cfg;
  DiscretizedMdp mdp;
};

TEST_F(ScalarMdp, RowsAreDistributions) {
  const auto rows = static_cast<std::int64_t>(mdp.cost.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (auto e = mdp.row_begin[r]; e < mdp.row_begin[r + 1]; ++e) {
      ASSERT_GE(mdp.entries[e].prob, 0.0);
      ASSERT_LT(mdp.entries[e].state, mdp.n_states);
      s += mdp.entries[e].prob;
    }
    ASSERT_NEAR(s, 1.0, 1e-9);
    ASSERT_TRUE(std::isfinite(mdp.cost[r]));
    ASSERT_GE(mdp.cost[r], 0.0);
  }
}

TEST_F(ScalarMdp, TwoPointChannelHandEnumeration) {
  mdp.chan_nodes = {0.5, 2.0};
  const int s = mdp.n_delta_cells * 3 + 14;
  const MdpPoint p = mdp.point(s);
  const double a = disc.A(0, 0), w = disc.W(0, 0), S = p.Sigma(0, 0), D = p.Delta(0);
  for (double sig : mdp.chan_nodes) {
    const double g = 2.0 * cfg.F_bar * sig;
    const double den = 1.0 + g * S;
    const double mean = a * D / den;
    const double var = w / (den * den) + g * S * S / (den * den);
    const double post = S / den;
    const double sn = a * post * a + w;
    const double cost = (mean * mean + var + cfg.lambda * cfg.F_bar) * disc.tau;
    const MdpRow row = build_row(mdp, p, sig, 1);
    EXPECT_NEAR(row.cost, cost, 1e-12);

    // Enumerate Δ cells by their Gaussian mass and Σ by linear interpolation.
    const auto& gd = mdp.delta_grid;
    const auto& gs = mdp.sigma_grid[0];
    int j = 0;
    while (j + 1 < int(gs.size()) && gs[j + 1] <= sn) ++j;
    const double t = j + 1 < int(gs.size()) ? (sn - gs[j]) / (gs[j + 1] - gs[j]) : 0.0;
    std::vector<double> want(mdp.n_states, 0.0);
    const int n = static_cast<int>(gd.size());
    for (int i = 0; i < n; ++i) {
      const double lo = i == 0 ? -INFINITY : 0.5 * (gd[i - 1] + gd[i]);
      const double hi = i == n - 1 ? INFINITY : 0.5 * (gd[i] + gd[i + 1]);
      const double m = phi((hi - mean) / std::sqrt(var)) - phi((lo - mean) / std::sqrt(var));
      want[i + n * j] += m * (1.0 - t);
      if (t > 0.0) want[i + n * (j + 1)] += m * t;
    }
    std::vector<double> got(mdp.n_states, 0.0);
    for (const auto& e : row.entries) got[e.state] += e.prob;
    for (int k = 0; k < mdp.n_states; ++k) ASSERT_NEAR(got[k], want[k], 1e-9) << k;
  }
}

TEST(MdpKernel, ZeroNoiseDrift) {
  const auto disc = scalar_disc(1.2, 1e-20);
  const SigmaStarDistribution dist(1, 1);
  MdpConfig cfg;
  cfg.model = MdpModel::ErrorFree;
  cfg.n_delta = 41;
  cfg.delta_max = 2.0;
  const auto mdp = discretize_mdp(disc, dist, cfg);
  for (int s = 0; s < mdp.n_states; ++s) {
    const auto r = mdp.row_index(s, 0, 0);
    ASSERT_EQ(mdp.row_begin[r + 1] - mdp.row_begin[r], 1);
    MdpPoint q;
    q.Delta = disc.A * mdp.point(s).Delta;
    q.Sigma = disc.W;
    ASSERT_EQ(mdp.entries[mdp.row_begin[r]].state, mdp.nearest_state(q));
  }
}

TEST(MdpKernel, RefusesLargeDimension) {
  DiscretePlant d;
  d.A = Mat::Identity(3, 3);
  d.B = Mat::Identity(3, 3);
  d.W = Mat::Identity(3, 3);
  d.tau = 0.05;
  EXPECT_THROW(discretize_mdp(d, SigmaStarDistribution(1, 1), MdpConfig{}), ParameterError);
  MdpConfig big;
  big.memory_budget_mb = 1e-3;
  EXPECT_THROW(discretize_mdp(scalar_disc(1.0, 1.0), SigmaStarDistribution(1, 1), big),
               ParameterError);
}

TEST_F(ScalarMdp, ViaPolicyIsUpSetAndPersists) {
  const auto sol = relative_value_iteration(mdp);
  EXPECT_GT(sol.theta, 0.0);
  for (std::size_t k = 20; k + 1 < sol.span_history.size(); ++k) {
    ASSERT_LE(sol.span_history[k + 1], sol.span_history[k] * (1.0 + 1e-9));
  }
  EXPECT_EQ(monotonicity_violations(mdp, sol), 0);
  // Fixed-policy evaluation of the optimum reproduces θ.
  const auto ev = evaluate_policy(mdp, sol.policy);
  EXPECT_NEAR(ev.theta, sol.theta, 1e-5 * sol.theta);
  // Never transmitting is worse than the optimum.
  std::vector<int> idle(sol.policy.size(), 0);
  EXPECT_GT(evaluate_policy(mdp, idle).theta, sol.theta);

  const auto path = (std::filesystem::temp_directory_path() / "ncs_via_test.csv").string();
  save_solution_csv(path, mdp, sol);
  const auto back = load_solution_csv(path, mdp);
  EXPECT_EQ(back.policy, sol.policy);
  for (int s = 0; s < mdp.n_states; ++s) ASSERT_DOUBLE_EQ(back.V[s], sol.V[s]);
  std::filesystem::remove(path);
}

TEST(MdpModels, Parse) {
  EXPECT_EQ(parse_mdp_model("full"), MdpModel::Full);
  EXPECT_EQ(parse_mdp_model("error-free"), MdpModel::ErrorFree);
  EXPECT_EQ(parse_mdp_model("packet-dropout"), MdpModel::PacketDropout);
  EXPECT_THROW(parse_mdp_model("nope"), ConfigError);
}
