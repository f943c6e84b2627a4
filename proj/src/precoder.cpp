#include "ncs/precoder.hpp"

#include <cmath>
#include <iostream>

namespace ncs {

PolicyKind parse_policy(const std::string& s) {
  if (s == "proposed-feedback") return PolicyKind::ProposedFeedback;
  if (s == "proposed-virtual") return PolicyKind::ProposedVirtual;
  if (s == "epds") return PolicyKind::Epds;
  if (s == "efc-via") return PolicyKind::EfcVia;
  if (s == "spsis-via") return PolicyKind::SpsisVia;
  if (s == "adp") return PolicyKind::Adp;
  if (s == "oracle") return PolicyKind::Oracle;
  if (s == "dormant") return PolicyKind::Dormant;
  throw ConfigError("unknown policy '" + s + "'");
}

std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::ProposedFeedback: return "proposed-feedback";
    case PolicyKind::ProposedVirtual: return "proposed-virtual";
    case PolicyKind::Epds: return "epds";
    case PolicyKind::EfcVia: return "efc-via";
    case PolicyKind::SpsisVia: return "spsis-via";
    case PolicyKind::Adp: return "adp";
    case PolicyKind::Oracle: return "oracle";
    case PolicyKind::Dormant: return "dormant";
  }
  return "unknown";
}

PrecodingAction dormant_action(const ChannelSample& chan, int L) {
  PrecodingAction a;
  a.F = CMat::Zero(chan.H.cols(), L);
  a.sigma_star = chan.sigma_star;
  return a;
}

PrecodingAction beam_action(const ChannelSample& chan, double F_bar,
                            const Vec& q) {
  PrecodingAction a;
  a.sigma_star = chan.sigma_star;
  a.q1 = q.normalized();
  a.F = std::sqrt(F_bar) * chan.u1() * a.q1.cast<cd>().transpose();
  a.active = true;
  a.power_gain = a.F.squaredNorm();
  return a;
}

PrecodingAction decide(const ThresholdEvaluation& ev,
                       const ChannelSample& chan, double F_bar,
                       double lambda) {
  const int L = static_cast<int>(ev.q1.size());
  PrecodingAction a;
  if (lambda < chan.sigma_star * ev.nu_star) {
    a = beam_action(chan, F_bar, ev.q1);
  } else {
    a = dormant_action(chan, L);
    a.q1 = ev.q1;
  }
  a.nu_star = ev.nu_star;
  return a;
}

PrecodingAction propose(const PriorityCoefficients& co, const Vec& Delta_used,
                        const Mat& Sigma, const ChannelSample& chan,
                        double tau) {
  const ThresholdEvaluation ev = threshold(co, Delta_used, Sigma, tau);
  return decide(ev, chan, co.F_bar, co.lambda);
}

PrecodingAction baseline_epds(const ChannelSample& chan, double F_bar, int L) {
  const auto Nt = chan.H.cols();
  const auto Nr = chan.H.rows();
  if (L > std::min(Nt, Nr)) {
    throw ParameterError("baseline_epds: L exceeds min(N_t, N_r)");
  }
  PrecodingAction a;
  a.sigma_star = chan.sigma_star;
  a.F = std::sqrt(F_bar / L) * chan.U.leftCols(L);
  a.active = true;
  a.power_gain = a.F.squaredNorm();
  return a;
}

Vec AdpParameters::features(const Vec& Delta, const Mat& Sigma) const {
  Vec f(1 + Delta.size());
  f(0) = Delta.dot(Sigma * Delta);
  f.tail(Delta.size()) = Delta;
  return f;
}

double AdpParameters::value(const Vec& Delta, const Mat& Sigma) const {
  return r1 * Delta.dot(Sigma * Delta) + r2.dot(Delta);
}

Vec AdpParameters::gradient(const Vec& Delta, const Mat& Sigma) const {
  return r1 * (Sigma + Sigma.transpose()) * Delta + r2;
}

AdpParameters adp_init(int L, const AdpOptions& opt) {
  AdpParameters p;
  p.r1 = opt.r1_init;
  p.r2 = Vec::Zero(L);
  return p;
}

AdpParameters baseline_adp_step(const AdpParameters& p, double cost,
                                const Vec& Delta, const Mat& Sigma,
                                const Vec& Delta_next, const Mat& Sigma_next,
                                const AdpOptions& opt) {
  AdpParameters n = p;
  const double alpha = opt.alpha0 / (1.0 + static_cast<double>(p.k) / opt.decay);
  const Vec phi = p.features(Delta, Sigma);
  const double td =
      cost - p.rho + p.value(Delta_next, Sigma_next) - p.value(Delta, Sigma);
  const double scale = 1.0 + phi.squaredNorm();
  n.r1 += alpha * td * phi(0) / scale;
  n.r2 += alpha * td * phi.tail(phi.size() - 1) / scale;
  n.rho += alpha * (cost - p.rho);
  n.k = p.k + 1;
  const double norm = std::sqrt(n.r1 * n.r1 + n.r2.squaredNorm());
  if (!std::isfinite(norm) || norm > opt.norm_cap) {
    AdpParameters r = adp_init(static_cast<int>(p.r2.size()), opt);
    r.k = n.k;
    r.rho = std::isfinite(n.rho) ? n.rho : 0.0;
    r.resets = p.resets + 1;
    std::clog << "adp: parameter norm " << norm << " above cap, reset #"
              << r.resets << "\n";
    return r;
  }
  return n;
}

PrecodingAction propose_adp(const AdpParameters& p, const Vec& Delta,
                            const Mat& Sigma, const ChannelSample& chan,
                            double tau, double F_bar, double lambda) {
  const ThresholdEvaluation ev =
      threshold_from_gradient(Delta, p.gradient(Delta, Sigma), Sigma, tau);
  return decide(ev, chan, F_bar, lambda);
}

PrecodingAction baseline_threshold_via(const ViaPolicy& policy,
                                       const MdpPoint& p,
                                       const ChannelSample& chan,
                                       double F_bar, int L,
                                       long* out_of_range) {
  const auto& mdp = policy.mdp;
  const double dmax = mdp.delta_grid.back();
  bool outside = p.Delta.cwiseAbs().maxCoeff() > dmax;
  if (mdp.cfg.model == MdpModel::Full) {
    for (int i = 0; i < mdp.L; ++i) {
      outside = outside || p.Sigma(i, i) > mdp.sigma_grid[i].back();
    }
  }
  if (outside && out_of_range) ++*out_of_range;
  const int a = lookahead_action(mdp, policy.sol, p, chan.sigma_star);
  if (a == 0) return dormant_action(chan, L);
  if (mdp.cfg.model == MdpModel::Full) {
    return beam_action(chan, F_bar, mdp.beams[a - 1]);
  }
  return baseline_epds(chan, F_bar, L);
}

}  // namespace ncs
