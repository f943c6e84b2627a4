#ifndef NCS_HARNESS_HPP
#define NCS_HARNESS_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ncs/channel.hpp"
#include "ncs/config.hpp"
#include "ncs/precoder.hpp"
#include "ncs/priority.hpp"
#include "ncs/stability.hpp"
#include "ncs/stats.hpp"

namespace ncs {

/// Everything an episode needs that does not depend on the seed.
/// Simulation runs in whitened coordinates (identity for a diagonal W̃);
/// the change of basis is orthonormal, so ‖Δ‖ is unchanged and S is
/// rotated along.
struct Runtime {
  SimConfig cfg;
  WhitenResult wh;
  DiscretePlant disc;
  CEControllerGain ce;
  Mat S;
  Mat W_sqrt;
  double normalizer = 1.0;  ///< Tr(S W)
  std::shared_ptr<const SigmaStarDistribution> dist;
  std::shared_ptr<const PriorityCoefficients> co;  ///< proposed policies
  std::shared_ptr<const ViaPolicy> via;            ///< VIA baselines, oracle

  int L() const { return disc.L(); }
};

/// Validates the config, discretizes, solves the DARE (asserting
/// ρ(A+BΨ) < 1) and builds what the policy needs. A distribution or VIA
/// table can be passed in to share it between runtimes.
Runtime prepare(const SimConfig& cfg,
                std::shared_ptr<const SigmaStarDistribution> dist = nullptr,
                std::shared_ptr<const ViaPolicy> via = nullptr);

/// VIA table for the policy kind of `cfg` (EfcVia, SpsisVia or Oracle).
std::shared_ptr<const ViaPolicy> build_via_policy(const Runtime& rt,
                                                  MdpModel model);

struct SlotTrace {
  long slot = 0;
  int mode = 0;  ///< 1 active, 0 dormant
  double sigma_star = 0.0;
  double nu_star = 0.0;
  double power_gain = 0.0;
  double delta_norm_sq = 0.0;
  double trace_sigma = 0.0;
  double weighted_error = 0.0;
};

struct EpisodeMetrics {
  double avg_weighted_error = 0.0;  ///< time average of ΔᵀSΔ·τ
  double avg_power_gain = 0.0;      ///< time average of Tr(FᴴF)·τ
  double avg_abs_power = 0.0;       ///< time average of ‖Fx‖²·τ
  double activation_rate = 0.0;
  double objective = 0.0;           ///< avg_weighted_error + λ·avg_power_gain
  double mse = 0.0;                 ///< time average of ΔᵀSΔ
  double normalized_mse = 0.0;      ///< mse / Tr(S W)
  long slots = 0;                   ///< accumulated (post burn-in)
  long active_slots = 0;
  double sum_weighted_error = 0.0;
  double sum_power_gain = 0.0;
  int adp_resets = 0;
  long via_out_of_range = 0;
  std::vector<SlotTrace> trace;
  std::vector<ThresholdSample> thresholds;
};

struct EpisodeOptions {
  bool record_trace = false;
  bool collect_thresholds = false;  ///< (ν*, q1) per post-burn-in slot
};

/// Slot order: draw (H, w, z); decide F from Δ(n−1) or Δ̃(n−1), Σ(n), H;
/// y = HFx + z; Kalman update; metrics; u = Ψx̂; x ← Ax + Bu + w.
/// Throws DivergenceError once ‖x‖ > 1e12.
EpisodeMetrics run_episode(const Runtime& rt, std::uint64_t seed,
                           const EpisodeOptions& opt = {});

struct EpisodeOutcome {
  EpisodeMetrics metrics;
  bool diverged = false;
  long divergence_slot = -1;
  std::string error;
};

struct BatchResult {
  std::vector<EpisodeOutcome> episodes;
  int n_diverged = 0;
  Summary normalized_mse;
  Summary objective;
  Summary weighted_error;
  Summary power_gain;
  Summary abs_power;
  Summary activation;
};

/// Episode i uses seed derive_seed(cfg.seed, i); results do not depend on
/// the thread count.
BatchResult run_episodes(const Runtime& rt, const EpisodeOptions& opt = {});

/// (ν*, q1) harvested from a proposed-policy pilot run.
std::vector<ThresholdSample> pilot_threshold_samples(const Runtime& rt,
                                                     long slots = 10000,
                                                     long burn_in = 1000,
                                                     std::uint64_t seed = 0);

/// Where the (ν*, q1) pairs of the bound come from. Policy re-evaluates
/// them at Σ = P from pilot errors; Pilot freezes the pilot pairs;
/// Surrogate keeps the pilot ν* with uniform beams.
enum class BoundSampler { Policy, Pilot, Surrogate };
BoundSampler parse_bound_sampler(const std::string& s);

/// Fixed-point MSE bound for the proposed policy of `rt`, fed by a
/// 10⁴-slot pilot run.
BoundResult mse_bound(const Runtime& rt, BoundSampler sampler = BoundSampler::Policy,
                      const FixedPointOptions& opt = {});

struct EtaCurve {
  std::vector<double> eta;
  std::vector<Summary> normalized_mse;
  std::vector<Summary> objective;
  std::vector<int> diverged;
  int best_index = -1;
  double best_eta = 0.0;
};

/// Matched-seed runs of the configured proposed policy per η_th; argmin of
/// the mean normalized MSE.
EtaCurve calibrate_eta(const SimConfig& cfg, const std::vector<double>& grid);

enum class SweepAxis { FBar, Lambda, Policy };
SweepAxis parse_sweep_axis(const std::string& s);
std::string to_string(SweepAxis a);

struct SweepRow {
  std::string axis;
  double value = 0.0;
  std::string policy;
  int episodes = 0;
  int diverged = 0;
  std::string error;
  Summary normalized_mse;
  Summary objective;
  Summary power_gain;
  Summary abs_power;
  Summary activation;
};

/// One row per (value, policy). For SweepAxis::Policy `values` is ignored.
/// Failures are recorded in the row and the sweep continues.
std::vector<SweepRow> sweep(const SimConfig& cfg, SweepAxis axis,
                            const std::vector<double>& values,
                            const std::vector<PolicyKind>& policies);

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

struct OracleComparison {
  double theta_optimal = 0.0;   ///< VIA average cost on the grid
  double theta_proposed = 0.0;  ///< proposed policy evaluated on the grid
  double loss_model = 0.0;      ///< % from the two grid values
  Summary objective_oracle;     ///< matched-seed simulation
  Summary objective_proposed;
  double loss_sim = 0.0;        ///< % from the simulated means
  Summary loss_sim_matched;     ///< per-episode % loss over matched seeds
  long out_of_range = 0;
  int via_iterations = 0;
  ViaSolution solution;
};

/// The proposed policy of `rt` on a full-model grid as a (state, node) →
/// action table; beams snap to the nearest grid direction.
std::vector<int> proposed_policy_table(const Runtime& rt, const DiscretizedMdp& mdp);

/// Solves the full VIA (L ≤ 2) and compares the configured proposed policy
/// against it, on the grid and in matched-seed simulation.
OracleComparison compare_with_oracle(const SimConfig& cfg, const MdpConfig& grid,
                                     const ViaOptions& via_opt = {});

void write_trace_csv(const std::string& path, const std::vector<SlotTrace>& trace);
std::string metrics_json(const SimConfig& cfg, const BatchResult& b);

}  // namespace ncs

#endif  // NCS_HARNESS_HPP
