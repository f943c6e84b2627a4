// ncs: command-line driver for the simulation harness.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ncs/harness.hpp"
#include "ncs/stability.hpp"

namespace fs = std::filesystem;
using namespace ncs;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<int> episodes;
  std::optional<long> horizon;
  std::optional<int> threads;
};

SimConfig load(const Common& c) {
  SimConfig cfg = c.config.empty() ? SimConfig::paper_preset() : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.episodes) cfg.episodes = *c.episodes;
  if (c.horizon) {
    cfg.horizon = *c.horizon;
    if (cfg.burn_in >= cfg.horizon) cfg.burn_in = -1;
  }
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  return cfg;
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << text << '\n';
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      v.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + tok + "' in list");
    }
  }
  return v;
}

int cmd_simulate(const Common& c, bool trace) {
  SimConfig cfg = load(c);
  const Runtime rt = prepare(cfg);
  EpisodeOptions o;
  o.record_trace = trace || cfg.trace;
  const BatchResult b = run_episodes(rt, o);
  const std::string js = metrics_json(cfg, b);
  write_text(out_path(c, "metrics.json"), js);
  if (o.record_trace) {
    for (std::size_t i = 0; i < b.episodes.size(); ++i) {
      if (b.episodes[i].diverged) continue;
      write_trace_csv(out_path(c, "trace_" + std::to_string(i) + ".csv"),
                      b.episodes[i].metrics.trace);
    }
  }
  std::cout << js << '\n';
  if (b.n_diverged == cfg.episodes) {
    std::cerr << "all episodes diverged (first at slot "
              << b.episodes.front().divergence_slot << ")\n";
    return 3;
  }
  return 0;
}

int cmd_calibrate(const Common& c, const std::string& grid) {
  SimConfig cfg = load(c);
  const EtaCurve curve = calibrate_eta(cfg, parse_list(grid));
  std::ofstream f(out_path(c, "eta_curve.csv"));
  f << "eta_th,nmse_mean,nmse_ci99,objective_mean,objective_ci99,diverged\n";
  f.precision(17);
  for (std::size_t i = 0; i < curve.eta.size(); ++i) {
    f << curve.eta[i] << ',' << curve.normalized_mse[i].mean << ','
      << curve.normalized_mse[i].half_width << ',' << curve.objective[i].mean
      << ',' << curve.objective[i].half_width << ',' << curve.diverged[i] << '\n';
  }
  std::cout << "best eta_th = " << curve.best_eta << '\n';
  return 0;
}

int cmd_sweep(const Common& c, const std::string& axis, const std::string& values,
              const std::string& policies) {
  SimConfig cfg = load(c);
  std::vector<PolicyKind> pk;
  std::stringstream ss(policies);
  std::string tok;
  while (std::getline(ss, tok, ',')) pk.push_back(parse_policy(tok));
  const SweepAxis ax = parse_sweep_axis(axis);
  const auto rows = sweep(cfg, ax, parse_list(values), pk);
  const std::string path = out_path(c, "sweep_" + to_string(ax) + ".csv");
  write_sweep_csv(path, rows);
  std::cout << "wrote " << path << '\n';
  return 0;
}

int cmd_via(const Common& c, int n_delta, int n_sigma, int n_channel) {
  SimConfig cfg = load(c);
  MdpConfig g = cfg.policy.via;
  if (n_delta > 0) g.n_delta = n_delta;
  if (n_sigma > 0) g.n_sigma = n_sigma;
  if (n_channel > 0) g.n_channel = n_channel;
  const OracleComparison r = compare_with_oracle(cfg, g, cfg.policy.via_solver);
  std::ofstream f(out_path(c, "via_compare.csv"));
  f.precision(17);
  f << "theta_optimal,theta_proposed,loss_model_pct,objective_oracle,"
       "objective_oracle_ci99,objective_proposed,objective_proposed_ci99,"
       "loss_sim_pct,out_of_range,via_iterations\n";
  f << r.theta_optimal << ',' << r.theta_proposed << ',' << r.loss_model << ','
    << r.objective_oracle.mean << ',' << r.objective_oracle.half_width << ','
    << r.objective_proposed.mean << ',' << r.objective_proposed.half_width << ','
    << r.loss_sim << ',' << r.out_of_range << ',' << r.via_iterations << '\n';
  std::cout << "VIA theta " << r.theta_optimal << ", proposed on grid "
            << r.theta_proposed << " (loss " << r.loss_model << "%), simulated loss "
            << r.loss_sim << "%\n";
  return 0;
}

int cmd_bound(const Common& c, const std::string& fbars, const std::string& lambdas,
              const std::string& sampler) {
  const BoundSampler bs = parse_bound_sampler(sampler);
  SimConfig cfg = load(c);
  if (cfg.policy.kind != PolicyKind::ProposedFeedback &&
      cfg.policy.kind != PolicyKind::ProposedVirtual) {
    cfg.policy.kind = PolicyKind::ProposedFeedback;
  }
  std::vector<std::pair<double, double>> points;
  for (double f : parse_list(fbars)) points.emplace_back(f, cfg.lambda);
  for (double l : parse_list(lambdas)) points.emplace_back(cfg.F_bar, l);
  if (points.empty()) points.emplace_back(cfg.F_bar, cfg.lambda);
  auto dist = std::make_shared<const SigmaStarDistribution>(cfg.Nt, cfg.Nr);
  std::ofstream f(out_path(c, "bound.csv"));
  f.precision(17);
  f << "F_bar,lambda,mse_bound,iterations,residual,sim_mse_mean,sim_mse_ci99\n";
  int rc = 0;
  for (auto [fb, lam] : points) {
    SimConfig k = cfg;
    k.F_bar = fb;
    k.lambda = lam;
    const Runtime rt = prepare(k, dist);
    try {
      const BoundResult br = mse_bound(rt, bs);
      const BatchResult b = run_episodes(rt);
      // The bound is on E‖Δ‖²; report the simulated MSE unnormalized.
      f << fb << ',' << lam << ',' << br.mse_bound << ',' << br.iterations << ','
        << br.residual << ',' << b.normalized_mse.mean * rt.normalizer << ','
        << b.normalized_mse.half_width * rt.normalizer << '\n';
      std::cout << "F_bar=" << fb << " lambda=" << lam << " bound=" << br.mse_bound
                << " sim=" << b.normalized_mse.mean * rt.normalizer << '\n';
    } catch (const DivergenceError& e) {
      std::cerr << "F_bar=" << fb << " lambda=" << lam << ": " << e.what() << '\n';
      f << fb << ',' << lam << ",inf,,,,\n";
      rc = 3;
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven MIMO AF precoding for networked control"};
  app.require_subcommand(1);
  Common c;
  std::uint64_t seed = 0;
  int episodes = 0;
  long horizon = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", c.config, "JSON config (default: paper preset)");
    s->add_option("--seed", seed, "master seed");
    s->add_option("--out", c.out, "output directory");
    s->add_option("--episodes", episodes, "episode count");
    s->add_option("--horizon", horizon, "slots per episode");
    s->add_option("--threads", threads, "worker threads");
  };

  bool trace = false;
  auto* sim = app.add_subcommand("simulate", "run episodes, write metrics JSON");
  add_common(sim);
  sim->add_flag("--trace", trace, "write per-episode trace CSVs");

  std::string grid = "0.05,0.1,0.2,0.31,0.5,1,2";
  auto* cal = app.add_subcommand("calibrate-eta", "sweep eta_th");
  add_common(cal);
  cal->add_option("--grid", grid, "comma-separated eta_th values");

  std::string axis = "F_bar", values = "1,2,4,8,16",
              policies = "proposed-feedback,proposed-virtual,epds,adp";
  auto* swp = app.add_subcommand("sweep", "F_bar, lambda or policy sweep");
  add_common(swp);
  swp->add_option("--axis", axis, "F_bar | lambda | policy");
  swp->add_option("--values", values, "comma-separated axis values");
  swp->add_option("--policies", policies, "comma-separated policy ids");

  int n_delta = 0, n_sigma = 0, n_channel = 0;
  auto* via = app.add_subcommand("via-compare", "proposed policy vs VIA optimum");
  add_common(via);
  via->add_option("--n-delta", n_delta, "grid points per error coordinate");
  via->add_option("--n-sigma", n_sigma, "grid points per covariance entry");
  via->add_option("--n-channel", n_channel, "channel quantile nodes");

  std::string fbars, lambdas;
  std::string sampler = "policy";
  auto* bnd = app.add_subcommand("bound", "MSE upper bound from the fixed point");
  add_common(bnd);
  bnd->add_option("--fbar-values", fbars, "comma-separated F_bar values");
  bnd->add_option("--lambda-values", lambdas, "comma-separated lambda values");
  bnd->add_option("--sampler", sampler,
                  "policy (nu*, q1 at Sigma = P) | pilot (fixed pairs) | surrogate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }
  auto given = [](CLI::App* s, const char* name) { return s->count(name) > 0; };
  CLI::App* active = app.get_subcommands().front();
  if (given(active, "--seed")) c.seed = seed;
  if (given(active, "--episodes")) c.episodes = episodes;
  if (given(active, "--horizon")) c.horizon = horizon;
  if (given(active, "--threads")) c.threads = threads;

  try {
    if (active == sim) return cmd_simulate(c, trace);
    if (active == cal) return cmd_calibrate(c, grid);
    if (active == swp) return cmd_sweep(c, axis, values, policies);
    if (active == via) return cmd_via(c, n_delta, n_sigma, n_channel);
    if (active == bnd) return cmd_bound(c, fbars, lambdas, sampler);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << " (slot " << e.slot << ")\n";
    return 3;
  } catch (const ConvergenceError& e) {
    std::cerr << "non-convergence: " << e.what() << '\n';
    return 4;
  } catch (const NcsError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
