#ifndef NCS_PRECODER_HPP
#define NCS_PRECODER_HPP

#include <string>

#include "ncs/channel.hpp"
#include "ncs/mdp_oracle.hpp"
#include "ncs/priority.hpp"
#include "ncs/types.hpp"

namespace ncs {

enum class PolicyKind {
  ProposedFeedback,
  ProposedVirtual,
  Epds,
  EfcVia,
  SpsisVia,
  Adp,
  Oracle,   ///< greedy policy of a solved full VIA table (L ≤ 2)
  Dormant,  ///< never transmits
};

PolicyKind parse_policy(const std::string& s);
std::string to_string(PolicyKind p);

struct PrecodingAction {
  CMat F;                 ///< N_t×L
  bool active = false;
  double sigma_star = 0.0;
  double nu_star = 0.0;
  double power_gain = 0.0;  ///< Tr(FᴴF)
  Vec q1;
};

PrecodingAction dormant_action(const ChannelSample& chan, int L);

/// F = √F̄ u₁ qᵀ.
PrecodingAction beam_action(const ChannelSample& chan, double F_bar,
                            const Vec& q);

/// Trigger λ < σ*ν*; ties stay dormant.
PrecodingAction decide(const ThresholdEvaluation& ev,
                       const ChannelSample& chan, double F_bar,
                       double lambda);

/// Proposed policy. Delta_used is Δ(n−1) or Δ̃(n−1).
PrecodingAction propose(const PriorityCoefficients& co, const Vec& Delta_used,
                        const Mat& Sigma, const ChannelSample& chan,
                        double tau);

/// F = √(F̄/L) U Ῡ with Ῡ = [I_L; 0]. Needs L ≤ min(N_t, N_r).
PrecodingAction baseline_epds(const ChannelSample& chan, double F_bar, int L);

struct AdpOptions {
  double alpha0 = 0.05;
  double decay = 1000.0;    ///< α_k = α₀ / (1 + k/decay)
  double norm_cap = 1e6;
  double r1_init = 1.0;
};

/// Ṽ_r(Δ,Σ) = r1 ΔᵀΣΔ + r2ᵀΔ with an average-cost estimate.
struct AdpParameters {
  double r1 = 0.0;
  Vec r2;
  double rho = 0.0;
  long k = 0;
  int resets = 0;

  Vec features(const Vec& Delta, const Mat& Sigma) const;
  double value(const Vec& Delta, const Mat& Sigma) const;
  /// ∇_Δ Ṽ = r1 (Σ + Σᵀ) Δ + r2.
  Vec gradient(const Vec& Delta, const Mat& Sigma) const;
};

AdpParameters adp_init(int L, const AdpOptions& opt = {});

/// One TD(0) average-cost update on the transition (s, cost, s').
/// The step is normalized by 1 + ‖φ(s)‖²; a parameter norm above the cap
/// resets to the initial values and counts the reset.
AdpParameters baseline_adp_step(const AdpParameters& p, double cost,
                                const Vec& Delta, const Mat& Sigma,
                                const Vec& Delta_next, const Mat& Sigma_next,
                                const AdpOptions& opt = {});

PrecodingAction propose_adp(const AdpParameters& p, const Vec& Delta,
                            const Mat& Sigma, const ChannelSample& chan,
                            double tau, double F_bar, double lambda);

/// A solved VIA table used as a policy.
struct ViaPolicy {
  DiscretizedMdp mdp;
  ViaSolution sol;
};

/// Acts greedily on the solved relative values: one-step lookahead at the
/// continuous state and the exact σ*. Reduced models transmit with EPDS,
/// a full-model table with its chosen beam. Points outside the grid are
/// clamped and counted in `out_of_range` when given.
PrecodingAction baseline_threshold_via(const ViaPolicy& policy,
                                       const MdpPoint& p,
                                       const ChannelSample& chan,
                                       double F_bar, int L,
                                       long* out_of_range = nullptr);

}  // namespace ncs

#endif  // NCS_PRECODER_HPP
