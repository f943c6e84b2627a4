#ifndef NCS_MDP_ORACLE_HPP
#define NCS_MDP_ORACLE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ncs/channel.hpp"
#include "ncs/plant.hpp"
#include "ncs/types.hpp"

namespace ncs {

/// Which reduced model the table describes.
enum class MdpModel {
  Full,           ///< state (Δ(n−1), diag Σ(n)), beams + dormant, ACKF update
  ErrorFree,      ///< state Θ(n) only; a transmission resets the error
  PacketDropout,  ///< state (Θ(n), CSI); success iff F̄σ*/L ≥ snr_threshold
};

MdpModel parse_mdp_model(const std::string& s);

struct MdpConfig {
  MdpModel model = MdpModel::Full;
  int n_delta = 81;          ///< grid points per Δ coordinate (odd)
  double delta_max = 0.0;    ///< 0: 12·sqrt(max W_ii)
  int n_sigma = 40;          ///< grid points per diagonal Σ entry
  double sigma_max = 0.0;    ///< 0: 40·max W_ii
  int n_channel = 32;        ///< quantile nodes of σ*
  int n_beams = 16;          ///< beam directions for L = 2
  int gh_nodes = 5;          ///< Gauss–Hermite nodes per axis for L = 2
  bool nearest_sigma = false;  ///< nearest Σ cell instead of interpolation
  double F_bar = 1.0;
  double lambda = 1.0;
  Mat S;                     ///< empty: identity
  double snr_threshold = 1.0;
  double memory_budget_mb = 2048.0;
};

/// One successor of a row: (state index, probability).
struct MdpEntry {
  std::int32_t state;
  double prob;
};

/// Continuous decision state. Full uses Delta = Δ(n−1) and Sigma = Σ(n);
/// the reduced models use Delta = Θ(n) and ignore Sigma.
struct MdpPoint {
  Vec Delta;
  Mat Sigma;
};

struct DiscretizedMdp {
  MdpConfig cfg;
  DiscretePlant disc;
  int L = 0;
  std::vector<double> delta_grid;
  std::vector<std::vector<double>> sigma_grid;  ///< per diagonal entry
  double sigma_corr = 0.0;                      ///< frozen Σ12/√(Σ11Σ22)
  std::vector<double> chan_nodes;
  std::vector<double> chan_weights;
  std::vector<Vec> beams;

  int n_delta_cells = 0;
  int n_sigma_cells = 1;
  int n_states = 0;
  int n_actions = 0;  ///< 0 is dormant

  /// Row r = state·rows_per_state + (0 for dormant, else
  /// 1 + node·(n_actions−1) + (a−1)).
  int rows_per_state = 0;
  std::vector<double> cost;
  std::vector<std::int64_t> row_begin;
  std::vector<MdpEntry> entries;

  int row_index(int s, int node, int a) const {
    if (a == 0) return s * rows_per_state;
    return s * rows_per_state + 1 + node * (n_actions - 1) + (a - 1);
  }
  MdpPoint point(int s) const;
  /// Nearest grid state of a continuous point.
  int nearest_state(const MdpPoint& p) const;
};

/// Sizing report for a configuration without building it.
struct MdpSizing {
  int n_states = 0;
  long long rows = 0;
  long long entries_estimate = 0;
  double megabytes = 0.0;
};

MdpSizing size_mdp(const DiscretePlant& disc, const MdpConfig& cfg);

/// Builds the cost and kernel tables. L ≤ 2.
DiscretizedMdp discretize_mdp(const DiscretePlant& disc,
                              const SigmaStarDistribution& dist,
                              const MdpConfig& cfg);

/// Expected stage cost and successor distribution of one decision.
struct MdpRow {
  double cost = 0.0;
  std::vector<MdpEntry> entries;
};
MdpRow build_row(const DiscretizedMdp& mdp, const MdpPoint& p,
                 double sigma_star, int action);

struct ViaSolution {
  double theta = 0.0;          ///< average cost per unit time (offset / τ)
  std::vector<double> V;       ///< relative values, V(ref) = 0
  std::vector<int> policy;     ///< per (state, channel node)
  std::vector<double> span_history;
  int iterations = 0;
  double span = 0.0;
  int ref_state = 0;
};

struct ViaOptions {
  double tol = 1e-6;     ///< span tolerance relative to the per-slot offset
  int max_iter = 200000;
  int ref_state = -1;    ///< −1: state nearest the origin with smallest Σ
  /// κ in V ← (1−κ)V + κTV; below 1 it breaks periodic chains.
  double aperiodicity = 1.0;
};

ViaSolution relative_value_iteration(const DiscretizedMdp& mdp,
                                     const ViaOptions& opt = {});

/// Average cost of a fixed (state, channel node) → action table.
ViaSolution evaluate_policy(const DiscretizedMdp& mdp,
                            const std::vector<int>& policy,
                            const ViaOptions& opt = {});

/// Greedy action at a continuous point under the solved values.
int lookahead_action(const DiscretizedMdp& mdp, const ViaSolution& sol,
                     const MdpPoint& p, double sigma_star);

/// 100·(proposed − optimal)/optimal.
double performance_loss(double proposed, double optimal);

/// CSV persistence: header "# ncs-via v1" then state,node,action,value.
void save_solution_csv(const std::string& path, const DiscretizedMdp& mdp,
                       const ViaSolution& sol);
ViaSolution load_solution_csv(const std::string& path,
                              const DiscretizedMdp& mdp);

/// Count of (Σ cell, node, ray) triples whose transmit set along the ray is
/// not an up-set in ‖Δ‖. The outermost Δ cell absorbs the clamped tail and
/// is left out.
int monotonicity_violations(const DiscretizedMdp& mdp, const ViaSolution& sol);

}  // namespace ncs

#endif  // NCS_MDP_ORACLE_HPP
