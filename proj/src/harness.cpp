#include "ncs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "ncs/estimator.hpp"
#include "ncs/linalg.hpp"
#include "ncs/rng.hpp"

namespace ncs {

namespace {

constexpr double kDivergence = 1e12;

bool is_proposed(PolicyKind k) {
  return k == PolicyKind::ProposedFeedback || k == PolicyKind::ProposedVirtual;
}

Mat psd_sqrt(const Mat& W) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(W));
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

MdpConfig via_config(const Runtime& rt, MdpModel model) {
  MdpConfig m = rt.cfg.policy.via;
  m.model = model;
  m.F_bar = rt.cfg.F_bar;
  m.lambda = rt.cfg.lambda;
  m.S = rt.S;
  return m;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Runtime prepare(const SimConfig& cfg,
                std::shared_ptr<const SigmaStarDistribution> dist,
                std::shared_ptr<const ViaPolicy> via) {
  cfg.validate();
  Runtime rt;
  rt.cfg = cfg;
  rt.wh = whiten(cfg.plant);
  const Mat& M = rt.wh.M;
  rt.disc = discretize(rt.wh.plant, cfg.tau);
  // Q, R act on x and u; x_M = M x with M orthonormal.
  const Mat Q = M * cfg.Q * M.transpose();
  rt.ce = solve_dare(rt.disc, Q, cfg.R);
  rt.S = M * cfg.weight() * M.transpose();
  rt.W_sqrt = psd_sqrt(rt.disc.W);
  rt.normalizer = (rt.S * rt.disc.W).trace();
  if (!(rt.normalizer > 0.0)) rt.normalizer = 1.0;
  rt.dist = dist ? dist : std::make_shared<SigmaStarDistribution>(cfg.Nt, cfg.Nr);
  const PolicyKind k = cfg.policy.kind;
  if (is_proposed(k)) {
    rt.co = std::make_shared<PriorityCoefficients>(build_coefficients(
        rt.wh.plant, cfg.tau, rt.S, rt.dist->mean(), cfg.F_bar, cfg.lambda,
        cfg.policy.eta_th, cfg.policy.priority));
  }
  if (k == PolicyKind::EfcVia || k == PolicyKind::SpsisVia ||
      k == PolicyKind::Oracle) {
    const MdpModel model = k == PolicyKind::EfcVia     ? MdpModel::ErrorFree
                           : k == PolicyKind::SpsisVia ? MdpModel::PacketDropout
                                                       : MdpModel::Full;
    rt.via = via ? via : build_via_policy(rt, model);
  }
  return rt;
}

std::shared_ptr<const ViaPolicy> build_via_policy(const Runtime& rt,
                                                  MdpModel model) {
  auto p = std::make_shared<ViaPolicy>();
  p->mdp = discretize_mdp(rt.disc, *rt.dist, via_config(rt, model));
  if (!rt.cfg.policy.via_table.empty()) {
    p->sol = load_solution_csv(rt.cfg.policy.via_table, p->mdp);
  } else {
    p->sol = relative_value_iteration(p->mdp, rt.cfg.policy.via_solver);
  }
  return p;
}

EpisodeMetrics run_episode(const Runtime& rt, std::uint64_t seed,
                           const EpisodeOptions& opt) {
  const SimConfig& cfg = rt.cfg;
  const DiscretePlant& disc = rt.disc;
  const int L = rt.L();
  const PolicyKind kind = cfg.policy.kind;
  const long burn = cfg.effective_burn_in();
  RngStream rng(seed);

  EpisodeMetrics m;
  Vec x = cfg.x0.size() ? Vec(rt.wh.M * cfg.x0) : Vec(Vec::Zero(L));
  Vec x_hat = x;
  Vec u = Vec::Zero(disc.M());
  Mat Sigma = Mat::Zero(L, L);
  Vec Delta = Vec::Zero(L);
  Vec Dv = Vec::Zero(L);
  Vec w_prev = Vec::Zero(L);
  AdpParameters adp;
  if (kind == PolicyKind::Adp) adp = adp_init(L, cfg.policy.adp);
  if (opt.record_trace) m.trace.reserve(cfg.horizon - burn);

  for (long n = 0; n < cfg.horizon; ++n) {
    const ChannelSample chan = draw_channel(rng, cfg.Nt, cfg.Nr);
    const Vec w = rt.W_sqrt * rng.normal_vec(L);
    CVec z = rng.complex_normal_vec(cfg.Nr);
    if (cfg.noiseless_channel) z.setZero();

    const Vec pred = n == 0 ? x_hat : Vec(disc.A * x_hat + disc.B * u);
    PrecodingAction act;
    const Vec& delta_used = kind == PolicyKind::ProposedVirtual ? Dv : Delta;
    switch (kind) {
      case PolicyKind::ProposedFeedback:
        act = propose(*rt.co, Delta, Sigma, chan, cfg.tau);
        break;
      case PolicyKind::ProposedVirtual:
        act = propose(*rt.co, Dv, Sigma, chan, cfg.tau);
        break;
      case PolicyKind::Epds:
        act = baseline_epds(chan, cfg.F_bar, L);
        break;
      case PolicyKind::Adp:
        act = propose_adp(adp, Delta, Sigma, chan, cfg.tau, cfg.F_bar, cfg.lambda);
        break;
      case PolicyKind::EfcVia:
      case PolicyKind::SpsisVia: {
        MdpPoint p{x - pred, Sigma};
        act = baseline_threshold_via(*rt.via, p, chan, cfg.F_bar, L,
                                     &m.via_out_of_range);
        break;
      }
      case PolicyKind::Oracle: {
        MdpPoint p{Delta, Sigma};
        act = baseline_threshold_via(*rt.via, p, chan, cfg.F_bar, L,
                                     &m.via_out_of_range);
        break;
      }
      case PolicyKind::Dormant:
        act = dormant_action(chan, L);
        break;
    }

    const CMat E = chan.H * act.F;
    const CMat E_a = augment(E);
    const CVec y = E * x.cast<cd>() + z;
    Vec x_hat_new;
    Mat Sigma_next;
    Vec Dv_new;
    if (n == 0) {
      // Σ(0) = 0: the estimate is exact and no gain applies.
      x_hat_new = x_hat;
      Sigma_next = disc.W;
      Dv_new = Vec::Zero(L);
    } else {
      const CMat K = kalman_gain(Sigma, E_a);
      x_hat_new = update_estimate(x_hat, u, augment(y), E_a, K, disc);
      const Mat post = posterior_covariance(Sigma, E_a, K);
      Sigma_next = symmetrize(disc.A * post * disc.A.transpose() + disc.W);
      Dv_new = update_virtual_error(Dv, K, E_a, disc, w_prev);
    }
    const Vec Delta_new = x - x_hat_new;
    const double werr = Delta_new.dot(rt.S * Delta_new);
    const double pg = act.power_gain;

    if (kind == PolicyKind::Adp) {
      const double cost = (werr + cfg.lambda * pg) * cfg.tau;
      adp = baseline_adp_step(adp, cost, Delta, Sigma, Delta_new, Sigma_next,
                              cfg.policy.adp);
    }
    if (n >= burn) {
      ++m.slots;
      m.sum_weighted_error += werr * cfg.tau;
      m.sum_power_gain += pg * cfg.tau;
      m.avg_abs_power += (act.F * x.cast<cd>()).squaredNorm() * cfg.tau;
      m.mse += werr;
      if (act.active) ++m.active_slots;
      if (opt.record_trace) {
        m.trace.push_back({n, act.active ? 1 : 0, act.sigma_star, act.nu_star,
                           pg, Delta_new.squaredNorm(), Sigma.trace(), werr});
      }
      if (opt.collect_thresholds && act.q1.size() == L) {
        m.thresholds.push_back({act.nu_star, act.q1, delta_used});
      }
    }

    u = rt.ce.Psi * x_hat_new;
    const Vec x_next = disc.A * x + disc.B * u + w;
    if (!x_next.allFinite() || x_next.norm() > kDivergence) {
      throw DivergenceError("state norm exceeded 1e12", n);
    }
    x = x_next;
    x_hat = x_hat_new;
    Sigma = Sigma_next;
    Delta = Delta_new;
    Dv = Dv_new;
    w_prev = w;
  }
  const double cnt = static_cast<double>(std::max(m.slots, 1L));
  m.avg_weighted_error = m.sum_weighted_error / cnt;
  m.avg_power_gain = m.sum_power_gain / cnt;
  m.avg_abs_power /= cnt;
  m.activation_rate = m.active_slots / cnt;
  m.objective = m.avg_weighted_error + cfg.lambda * m.avg_power_gain;
  m.mse /= cnt;
  m.normalized_mse = m.mse / rt.normalizer;
  m.adp_resets = adp.resets;
  return m;
}

BatchResult run_episodes(const Runtime& rt, const EpisodeOptions& opt) {
  const int ne = rt.cfg.episodes;
  BatchResult b;
  b.episodes.resize(ne);
  int nt = rt.cfg.threads > 0 ? rt.cfg.threads
                              : static_cast<int>(std::thread::hardware_concurrency());
  nt = std::clamp(nt, 1, ne);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < ne; i = next++) {
      EpisodeOutcome& o = b.episodes[i];
      try {
        o.metrics = run_episode(rt, derive_seed(rt.cfg.seed, i), opt);
      } catch (const DivergenceError& e) {
        o.diverged = true;
        o.divergence_slot = e.slot;
        o.error = e.what();
      }
    }
  };
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::vector<double> nm, ob, we, pg, ap, ac;
  for (const auto& o : b.episodes) {
    if (o.diverged) {
      ++b.n_diverged;
      continue;
    }
    nm.push_back(o.metrics.normalized_mse);
    ob.push_back(o.metrics.objective);
    we.push_back(o.metrics.avg_weighted_error);
    pg.push_back(o.metrics.avg_power_gain);
    ap.push_back(o.metrics.avg_abs_power);
    ac.push_back(o.metrics.activation_rate);
  }
  b.normalized_mse = summarize(nm);
  b.objective = summarize(ob);
  b.weighted_error = summarize(we);
  b.power_gain = summarize(pg);
  b.abs_power = summarize(ap);
  b.activation = summarize(ac);
  return b;
}

std::vector<ThresholdSample> pilot_threshold_samples(const Runtime& rt,
                                                     long slots, long burn_in,
                                                     std::uint64_t seed) {
  if (!rt.co) throw ParameterError("pilot: needs a proposed policy runtime");
  Runtime pilot = rt;
  pilot.cfg.horizon = slots;
  pilot.cfg.burn_in = burn_in;
  EpisodeOptions o;
  o.collect_thresholds = true;
  auto m = run_episode(pilot, derive_seed(seed ? seed : rt.cfg.seed, 0xb0d),
                       o);
  if (m.thresholds.empty()) throw ParameterError("pilot: no samples collected");
  return std::move(m.thresholds);
}

BoundSampler parse_bound_sampler(const std::string& s) {
  if (s == "policy") return BoundSampler::Policy;
  if (s == "pilot") return BoundSampler::Pilot;
  if (s == "surrogate") return BoundSampler::Surrogate;
  throw ConfigError("unknown sampler '" + s + "'");
}

BoundResult mse_bound(const Runtime& rt, BoundSampler sampler,
                      const FixedPointOptions& opt) {
  auto samples = pilot_threshold_samples(rt);
  const SimConfig& k = rt.cfg;
  switch (sampler) {
    case BoundSampler::Policy: {
      std::vector<Vec> deltas;
      // Every 4th pilot error keeps G cheap; the pilot is serially correlated.
      for (std::size_t i = 0; i < samples.size(); i += 4) deltas.push_back(samples[i].delta);
      return solve_fixed_point_policy(rt.disc, *rt.co, deltas, *rt.dist, opt);
    }
    case BoundSampler::Surrogate: {
      std::vector<double> nu;
      for (const auto& s : samples) nu.push_back(s.nu);
      samples = surrogate_samples(nu, rt.L(), samples.size(), k.seed);
      break;
    }
    case BoundSampler::Pilot:
      break;
  }
  return solve_fixed_point(rt.disc, *rt.dist, k.F_bar, k.lambda, samples, opt);
}

EtaCurve calibrate_eta(const SimConfig& cfg, const std::vector<double>& grid) {
  if (grid.empty()) throw ParameterError("calibrate_eta: empty grid");
  EtaCurve c;
  auto dist = std::make_shared<const SigmaStarDistribution>(cfg.Nt, cfg.Nr);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SimConfig k = cfg;
    k.policy.eta_th = grid[i];
    const Runtime rt = prepare(k, dist);
    const BatchResult b = run_episodes(rt);
    c.eta.push_back(grid[i]);
    c.normalized_mse.push_back(b.normalized_mse);
    c.objective.push_back(b.objective);
    c.diverged.push_back(b.n_diverged);
    if (b.n_diverged < k.episodes && b.normalized_mse.mean < best) {
      best = b.normalized_mse.mean;
      c.best_index = static_cast<int>(i);
    }
  }
  if (c.best_index < 0) {
    throw DivergenceError("calibrate_eta: every grid point diverged", -1);
  }
  c.best_eta = c.eta[c.best_index];
  return c;
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "F_bar" || s == "fbar") return SweepAxis::FBar;
  if (s == "lambda") return SweepAxis::Lambda;
  if (s == "policy") return SweepAxis::Policy;
  throw ConfigError("unknown sweep axis '" + s + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::FBar: return "F_bar";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::Policy: return "policy";
  }
  return "unknown";
}

std::vector<SweepRow> sweep(const SimConfig& cfg, SweepAxis axis,
                            const std::vector<double>& values,
                            const std::vector<PolicyKind>& policies) {
  if (policies.empty()) throw ParameterError("sweep: no policies");
  std::vector<double> vals = values;
  if (axis == SweepAxis::Policy) vals = {0.0};
  if (vals.empty()) throw ParameterError("sweep: empty value list");
  auto dist = std::make_shared<const SigmaStarDistribution>(cfg.Nt, cfg.Nr);
  std::vector<SweepRow> rows;
  for (double v : vals) {
    for (PolicyKind pk : policies) {
      SimConfig k = cfg;
      k.policy.kind = pk;
      if (axis == SweepAxis::FBar) k.F_bar = v;
      if (axis == SweepAxis::Lambda) k.lambda = v;
      SweepRow r;
      r.axis = to_string(axis);
      r.value = axis == SweepAxis::FBar     ? k.F_bar
                : axis == SweepAxis::Lambda ? k.lambda
                                            : 0.0;
      r.policy = to_string(pk);
      r.episodes = k.episodes;
      try {
        const Runtime rt = prepare(k, dist);
        const BatchResult b = run_episodes(rt);
        r.diverged = b.n_diverged;
        r.normalized_mse = b.normalized_mse;
        r.objective = b.objective;
        r.power_gain = b.power_gain;
        r.abs_power = b.abs_power;
        r.activation = b.activation;
      } catch (const NcsError& e) {
        r.error = e.what();
      }
      rows.push_back(r);
    }
  }
  return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << "axis,value,policy,episodes,diverged,nmse_mean,nmse_ci99,objective_mean,"
       "objective_ci99,power_gain_mean,power_gain_ci99,abs_power_mean,"
       "activation_mean,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    f << r.axis << ',' << fmt(r.value) << ',' << r.policy << ',' << r.episodes
      << ',' << r.diverged << ',' << fmt(r.normalized_mse.mean) << ','
      << fmt(r.normalized_mse.half_width) << ',' << fmt(r.objective.mean) << ','
      << fmt(r.objective.half_width) << ',' << fmt(r.power_gain.mean) << ','
      << fmt(r.power_gain.half_width) << ',' << fmt(r.abs_power.mean) << ','
      << fmt(r.activation.mean) << ',' << err << '\n';
  }
}

std::vector<int> proposed_policy_table(const Runtime& rt, const DiscretizedMdp& mdp) {
  if (!rt.co) throw ParameterError("proposed_policy_table: needs a proposed policy runtime");
  const SimConfig& cfg = rt.cfg;
  const int nodes = static_cast<int>(mdp.chan_nodes.size());
  std::vector<int> table(static_cast<std::size_t>(mdp.n_states) * nodes, 0);
  for (int s = 0; s < mdp.n_states; ++s) {
    const MdpPoint p = mdp.point(s);
    const ThresholdEvaluation ev = threshold(*rt.co, p.Delta, p.Sigma, cfg.tau);
    for (int j = 0; j < nodes; ++j) {
      if (!(cfg.lambda < mdp.chan_nodes[j] * ev.nu_star)) continue;
      int best = 1;
      double bd = -1.0;
      for (std::size_t b = 0; b < mdp.beams.size(); ++b) {
        const double d = std::abs(mdp.beams[b].dot(ev.q1));
        if (d > bd) {
          bd = d;
          best = static_cast<int>(b) + 1;
        }
      }
      table[static_cast<std::size_t>(s) * nodes + j] = best;
    }
  }
  return table;
}

OracleComparison compare_with_oracle(const SimConfig& cfg, const MdpConfig& grid,
                                     const ViaOptions& via_opt) {
  if (cfg.L() > 2) throw ParameterError("compare_with_oracle: needs L <= 2");
  OracleComparison out;
  SimConfig pc = cfg;
  if (!is_proposed(pc.policy.kind)) pc.policy.kind = PolicyKind::ProposedFeedback;
  const Runtime prop = prepare(pc);

  auto via = std::make_shared<ViaPolicy>();
  MdpConfig g = grid;
  g.model = MdpModel::Full;
  g.F_bar = cfg.F_bar;
  g.lambda = cfg.lambda;
  g.S = prop.S;
  via->mdp = discretize_mdp(prop.disc, *prop.dist, g);
  via->sol = relative_value_iteration(via->mdp, via_opt);
  out.theta_optimal = via->sol.theta;
  out.via_iterations = via->sol.iterations;

  const auto& mdp = via->mdp;
  const std::vector<int> table = proposed_policy_table(prop, mdp);
  out.theta_proposed = evaluate_policy(mdp, table, via_opt).theta;
  out.loss_model = performance_loss(out.theta_proposed, out.theta_optimal);

  SimConfig oc = cfg;
  oc.policy.kind = PolicyKind::Oracle;
  const Runtime orc = prepare(oc, prop.dist, via);
  const BatchResult bo = run_episodes(orc);
  const BatchResult bp = run_episodes(prop);
  out.objective_oracle = bo.objective;
  out.objective_proposed = bp.objective;
  for (const auto& e : bo.episodes) out.out_of_range += e.metrics.via_out_of_range;
  out.loss_sim = performance_loss(bp.objective.mean, bo.objective.mean);
  std::vector<double> per;
  for (std::size_t i = 0; i < bo.episodes.size(); ++i) {
    if (bo.episodes[i].diverged || bp.episodes[i].diverged) continue;
    per.push_back(performance_loss(bp.episodes[i].metrics.objective,
                                   bo.episodes[i].metrics.objective));
  }
  out.loss_sim_matched = summarize(per);
  out.solution = via->sol;
  return out;
}

void write_trace_csv(const std::string& path, const std::vector<SlotTrace>& trace) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << "slot,mode,sigma_star,nu_star,power_gain,delta_norm_sq,trace_sigma,"
       "weighted_error\n";
  for (const auto& t : trace) {
    f << t.slot << ',' << t.mode << ',' << fmt(t.sigma_star) << ','
      << fmt(t.nu_star) << ',' << fmt(t.power_gain) << ',' << fmt(t.delta_norm_sq)
      << ',' << fmt(t.trace_sigma) << ',' << fmt(t.weighted_error) << '\n';
  }
}

std::string metrics_json(const SimConfig& cfg, const BatchResult& b) {
  using nlohmann::json;
  auto js = [](const Summary& s) {
    return json{{"mean", s.mean}, {"ci99", s.half_width}, {"n", s.n}};
  };
  json j;
  j["policy"] = to_string(cfg.policy.kind);
  j["F_bar"] = cfg.F_bar;
  j["lambda"] = cfg.lambda;
  j["eta_th"] = cfg.policy.eta_th;
  j["episodes"] = cfg.episodes;
  j["horizon"] = cfg.horizon;
  j["seed"] = cfg.seed;
  j["diverged"] = b.n_diverged;
  j["normalized_mse"] = js(b.normalized_mse);
  j["objective"] = js(b.objective);
  j["avg_weighted_error"] = js(b.weighted_error);
  j["avg_power_gain"] = js(b.power_gain);
  j["avg_abs_power"] = js(b.abs_power);
  j["activation_rate"] = js(b.activation);
  json eps = json::array();
  for (const auto& e : b.episodes) {
    json o;
    if (e.diverged) {
      o["diverged_at"] = e.divergence_slot;
    } else {
      o["normalized_mse"] = e.metrics.normalized_mse;
      o["objective"] = e.metrics.objective;
      o["activation_rate"] = e.metrics.activation_rate;
    }
    eps.push_back(o);
  }
  j["per_episode"] = eps;
  return j.dump(2);
}

}  // namespace ncs
