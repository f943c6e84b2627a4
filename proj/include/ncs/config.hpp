#ifndef NCS_CONFIG_HPP
#define NCS_CONFIG_HPP

#include <cstdint>
#include <string>

#include "ncs/mdp_oracle.hpp"
#include "ncs/plant.hpp"
#include "ncs/precoder.hpp"
#include "ncs/priority.hpp"
#include "ncs/types.hpp"

namespace ncs {

struct PolicyConfig {
  PolicyKind kind = PolicyKind::ProposedFeedback;
  double eta_th = 0.31;
  PriorityOptions priority;
  AdpOptions adp;
  MdpConfig via;          ///< grids of the VIA baselines and the oracle
  ViaOptions via_solver;
  std::string via_table;  ///< optional saved solution (CSV)
};

struct SimConfig {
  ContinuousPlant plant;
  Mat Q;
  Mat R;
  int Nt = 3;
  int Nr = 2;
  double tau = 0.05;
  double F_bar = 2.0;
  double lambda = 1500.0;
  Mat S;                 ///< empty: identity
  PolicyConfig policy;
  long horizon = 100000;
  long burn_in = -1;     ///< −1: 10% of the horizon
  int episodes = 20;
  std::uint64_t seed = 1;
  int threads = 0;       ///< 0: hardware concurrency
  Vec x0;                ///< empty: zero
  bool noiseless_channel = false;  ///< z ≡ 0
  bool trace = false;
  std::string out_dir;

  int L() const { return plant.L(); }
  long effective_burn_in() const { return burn_in >= 0 ? burn_in : horizon / 10; }
  Mat weight() const;

  /// Throws ConfigError when an invariant fails.
  void validate() const;

  /// Ã=[[1,2],[−1,3]], B̃=[[1,0.2],[0.1,1]], W̃=diag(1,2), Q=diag(1,2),
  /// R=diag(1,0.2), N_t=3, N_r=2, τ=0.05, F̄=2, λ=1500, η_th=0.31.
  static SimConfig paper_preset();
};

/// JSON config. Unknown keys are rejected; `"preset": "paper"` seeds the
/// defaults before the remaining keys are applied.
SimConfig load_config(const std::string& path);
SimConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const SimConfig& cfg);

}  // namespace ncs

#endif  // NCS_CONFIG_HPP
