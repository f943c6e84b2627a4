#include "ncs/mdp_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include "ncs/linalg.hpp"

namespace ncs {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Probabilists' Gauss–Hermite rule by Golub–Welsch.
void gauss_hermite(int n, std::vector<double>& x, std::vector<double>& w) {
  Mat J = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    x[i] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    w[i] = v * v;
  }
}

int nearest_index(const std::vector<double>& g, double v) {
  if (v <= g.front()) return 0;
  if (v >= g.back()) return static_cast<int>(g.size()) - 1;
  auto it = std::lower_bound(g.begin(), g.end(), v);
  int j = static_cast<int>(it - g.begin());
  return (v - g[j - 1] <= g[j] - v) ? j - 1 : j;
}

// Interpolation weights of v on a sorted grid (clamped at the ends).
void interp_weights(const std::vector<double>& g, double v, bool nearest,
                    std::vector<std::pair<int, double>>& out) {
  out.clear();
  if (g.size() == 1 || v <= g.front()) {
    out.push_back({0, 1.0});
    return;
  }
  if (v >= g.back()) {
    out.push_back({static_cast<int>(g.size()) - 1, 1.0});
    return;
  }
  if (nearest) {
    out.push_back({nearest_index(g, v), 1.0});
    return;
  }
  auto it = std::upper_bound(g.begin(), g.end(), v);
  const int j = static_cast<int>(it - g.begin()) - 1;
  const double t = (v - g[j]) / (g[j + 1] - g[j]);
  if (t < 1.0) out.push_back({j, 1.0 - t});
  if (t > 0.0) out.push_back({j + 1, t});
}

// Probability that N(m, s²) lands in each nearest-cell of the grid.
void cell_masses_1d(const std::vector<double>& g, double m, double var,
                    std::vector<std::pair<int, double>>& out) {
  out.clear();
  const int n = static_cast<int>(g.size());
  if (!(var > 1e-300)) {
    out.push_back({nearest_index(g, m), 1.0});
    return;
  }
  const double sd = std::sqrt(var);
  const int lo = nearest_index(g, m - 8.5 * sd);
  const int hi = nearest_index(g, m + 8.5 * sd);
  double total = 0.0;
  double prev = lo == 0 ? 0.0 : normal_cdf((0.5 * (g[lo - 1] + g[lo]) - m) / sd);
  for (int i = lo; i <= hi; ++i) {
    const double up =
        i == n - 1 ? 1.0 : normal_cdf((0.5 * (g[i] + g[i + 1]) - m) / sd);
    const double p = up - prev;
    prev = up;
    if (p > 0.0) {
      out.push_back({i, p});
      total += p;
    }
  }
  if (total <= 0.0) {
    out.assign(1, {nearest_index(g, m), 1.0});
    return;
  }
  for (auto& e : out) e.second /= total;
}

Mat weight_matrix(const MdpConfig& cfg, int L) {
  if (cfg.S.size() == 0) return Mat::Identity(L, L);
  if (cfg.S.rows() != L || cfg.S.cols() != L) {
    throw ParameterError("mdp: S must be L×L");
  }
  return cfg.S;
}

struct Projector {
  const DiscretizedMdp& mdp;
  const std::vector<double>& gh_x;
  const std::vector<double>& gh_w;
  explicit Projector(const DiscretizedMdp& m)
      : mdp(m), gh_x(rule(m).first), gh_w(rule(m).second) {}

  static const std::pair<std::vector<double>, std::vector<double>>& rule(
      const DiscretizedMdp& m) {
    static thread_local std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    auto& r = cache[m.cfg.gh_nodes];
    if (r.first.empty()) gauss_hermite(m.cfg.gh_nodes, r.first, r.second);
    return r;
  }

  void delta_part(const Vec& mean, const Mat& cov,
                  std::vector<std::pair<int, double>>& out) const {
    const auto& g = mdp.delta_grid;
    if (mdp.L == 1) {
      cell_masses_1d(g, mean(0), cov(0, 0), out);
      return;
    }
    const int n = static_cast<int>(g.size());
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(cov));
    Mat R = es.eigenvectors() *
            es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    std::map<int, double> acc;
    const int k = static_cast<int>(gh_x.size());
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        Vec z(2);
        z << gh_x[i], gh_x[j];
        const Vec x = mean + R * z;
        const int c = nearest_index(g, x(0)) + n * nearest_index(g, x(1));
        acc[c] += gh_w[i] * gh_w[j];
      }
    }
    out.assign(acc.begin(), acc.end());
  }

  void sigma_part(const Mat& Sn, std::vector<std::pair<int, double>>& out) const {
    out.clear();
    if (mdp.cfg.model != MdpModel::Full) {
      out.push_back({0, 1.0});
      return;
    }
    std::vector<std::pair<int, double>> a, b;
    interp_weights(mdp.sigma_grid[0], Sn(0, 0), mdp.cfg.nearest_sigma, a);
    if (mdp.L == 1) {
      out = a;
      return;
    }
    interp_weights(mdp.sigma_grid[1], Sn(1, 1), mdp.cfg.nearest_sigma, b);
    const int n = static_cast<int>(mdp.sigma_grid[0].size());
    for (auto& ea : a) {
      for (auto& eb : b) out.push_back({ea.first + n * eb.first, ea.second * eb.second});
    }
  }
};

}  // namespace

MdpModel parse_mdp_model(const std::string& s) {
  if (s == "full") return MdpModel::Full;
  if (s == "error-free") return MdpModel::ErrorFree;
  if (s == "packet-dropout") return MdpModel::PacketDropout;
  throw ConfigError("unknown mdp model '" + s + "'");
}

MdpPoint DiscretizedMdp::point(int s) const {
  MdpPoint p;
  const int id = s % n_delta_cells;
  const int is = s / n_delta_cells;
  const int n = static_cast<int>(delta_grid.size());
  p.Delta.resize(L);
  if (L == 1) {
    p.Delta(0) = delta_grid[id];
  } else {
    p.Delta << delta_grid[id % n], delta_grid[id / n];
  }
  if (cfg.model == MdpModel::Full) {
    p.Sigma.resize(L, L);
    if (L == 1) {
      p.Sigma(0, 0) = sigma_grid[0][is];
    } else {
      const int m = static_cast<int>(sigma_grid[0].size());
      const double a = sigma_grid[0][is % m];
      const double b = sigma_grid[1][is / m];
      p.Sigma << a, sigma_corr * std::sqrt(a * b), sigma_corr * std::sqrt(a * b), b;
    }
  } else {
    p.Sigma = disc.W;
  }
  return p;
}

int DiscretizedMdp::nearest_state(const MdpPoint& p) const {
  const int n = static_cast<int>(delta_grid.size());
  int id = nearest_index(delta_grid, p.Delta(0));
  if (L == 2) id += n * nearest_index(delta_grid, p.Delta(1));
  int is = 0;
  if (cfg.model == MdpModel::Full) {
    is = nearest_index(sigma_grid[0], p.Sigma(0, 0));
    if (L == 2) {
      is += static_cast<int>(sigma_grid[0].size()) *
            nearest_index(sigma_grid[1], p.Sigma(1, 1));
    }
  }
  return id + n_delta_cells * is;
}

namespace {

void validate_cfg(const DiscretePlant& disc, const MdpConfig& cfg) {
  const int L = disc.L();
  if (L < 1 || L > 2) {
    throw ParameterError("mdp_oracle supports L ≤ 2 only (L = " +
                         std::to_string(L) + ")");
  }
  if (cfg.n_delta < 3 || cfg.n_sigma < 2 || cfg.n_channel < 1 ||
      cfg.n_beams < 1 || cfg.gh_nodes < 1) {
    throw ParameterError("mdp_oracle: grid sizes must be positive");
  }
  if (!(cfg.F_bar > 0.0) || !(cfg.lambda >= 0.0)) {
    throw ParameterError("mdp_oracle: F_bar must be positive, lambda >= 0");
  }
  for (int i = 0; i < L; ++i) {
    if (!(disc.W(i, i) > 0.0)) {
      throw ParameterError("mdp_oracle: W must have positive diagonal");
    }
  }
}

double auto_delta_max(const DiscretePlant& disc, const MdpConfig& cfg) {
  return cfg.delta_max > 0.0 ? cfg.delta_max
                             : 12.0 * std::sqrt(disc.W.diagonal().maxCoeff());
}

}  // namespace

MdpSizing size_mdp(const DiscretePlant& disc, const MdpConfig& cfg) {
  validate_cfg(disc, cfg);
  const int L = disc.L();
  MdpSizing sz;
  const long long nd = static_cast<long long>(std::pow(cfg.n_delta, L));
  const long long ns =
      cfg.model == MdpModel::Full ? static_cast<long long>(std::pow(cfg.n_sigma, L)) : 1;
  const int nodes = cfg.model == MdpModel::ErrorFree ? 1 : cfg.n_channel;
  const int acts = cfg.model == MdpModel::Full ? (L == 1 ? 1 : cfg.n_beams) : 1;
  sz.n_states = static_cast<int>(nd * ns);
  sz.rows = sz.n_states * (1LL + static_cast<long long>(nodes) * acts);
  double support;
  if (L == 1) {
    const double h = 2.0 * auto_delta_max(disc, cfg) / (cfg.n_delta - 1);
    support = std::min<double>(cfg.n_delta,
                               17.0 * std::sqrt(disc.W(0, 0)) / h + 2.0);
  } else {
    support = static_cast<double>(cfg.gh_nodes) * cfg.gh_nodes;
  }
  if (cfg.model == MdpModel::Full) support *= (1 << L);
  sz.entries_estimate = static_cast<long long>(sz.rows * support);
  sz.megabytes = (sz.entries_estimate * sizeof(MdpEntry) +
                  sz.rows * (sizeof(double) + sizeof(std::int64_t))) /
                 1048576.0;
  return sz;
}

MdpRow build_row(const DiscretizedMdp& mdp, const MdpPoint& p,
                 double sigma_star, int action) {
  static thread_local std::vector<std::pair<int, double>> dpart, spart;
  const int L = mdp.L;
  const Mat& A = mdp.disc.A;
  const Mat& W = mdp.disc.W;
  const Mat S = weight_matrix(mdp.cfg, L);
  const double tau = mdp.disc.tau;
  MdpRow row;
  Vec mean;
  Mat cov;
  Mat Sn;
  double power = 0.0;
  if (mdp.cfg.model == MdpModel::Full) {
    const Mat& Sg = p.Sigma;
    if (action == 0) {
      mean = A * p.Delta;
      cov = W;
      Sn = symmetrize(A * Sg * A.transpose() + W);
    } else {
      const Vec& q = mdp.beams[action - 1];
      const double g = 2.0 * mdp.cfg.F_bar * sigma_star;
      const Vec v = Sg * q;
      const double denom = 1.0 + g * q.dot(v);
      const Mat G = Mat::Identity(L, L) - (g / denom) * v * q.transpose();
      const Vec k = (std::sqrt(g) / denom) * v;
      mean = G * A * p.Delta;
      cov = G * W * G.transpose() + k * k.transpose();
      const Mat post = Sg - (g / denom) * v * v.transpose();
      Sn = symmetrize(A * post * A.transpose() + W);
      power = mdp.cfg.F_bar;
    }
    row.cost = (mean.dot(S * mean) + (S * cov).trace() + mdp.cfg.lambda * power) * tau;
  } else {
    Vec e = p.Delta;
    if (action != 0) {
      power = mdp.cfg.F_bar;
      bool success = true;
      if (mdp.cfg.model == MdpModel::PacketDropout) {
        success = mdp.cfg.F_bar * sigma_star / L >= mdp.cfg.snr_threshold;
      }
      if (success) e.setZero();
    }
    row.cost = (e.dot(S * e) + mdp.cfg.lambda * power) * tau;
    mean = A * e;
    cov = W;
  }
  Projector proj(mdp);
  proj.delta_part(mean, cov, dpart);
  if (mdp.cfg.model == MdpModel::Full) {
    proj.sigma_part(Sn, spart);
  } else {
    spart.assign(1, {0, 1.0});
  }
  row.entries.reserve(dpart.size() * spart.size());
  for (auto& s : spart) {
    for (auto& d : dpart) {
      row.entries.push_back(
          {static_cast<std::int32_t>(d.first + mdp.n_delta_cells * s.first),
           d.second * s.second});
    }
  }
  return row;
}

DiscretizedMdp discretize_mdp(const DiscretePlant& disc,
                              const SigmaStarDistribution& dist,
                              const MdpConfig& cfg) {
  validate_cfg(disc, cfg);
  const MdpSizing sz = size_mdp(disc, cfg);
  if (sz.megabytes > cfg.memory_budget_mb) {
    std::ostringstream os;
    os << "discretize_mdp: estimated " << std::fixed << std::setprecision(1)
       << sz.megabytes << " MB exceeds the budget of " << cfg.memory_budget_mb
       << " MB (" << sz.n_states << " states, " << sz.rows << " rows, ~"
       << sz.entries_estimate << " kernel entries)";
    throw ParameterError(os.str());
  }
  DiscretizedMdp mdp;
  mdp.cfg = cfg;
  mdp.disc = disc;
  mdp.L = disc.L();
  const int L = mdp.L;

  const double dmax = auto_delta_max(disc, cfg);
  mdp.delta_grid.resize(cfg.n_delta);
  for (int i = 0; i < cfg.n_delta; ++i) {
    mdp.delta_grid[i] = -dmax + 2.0 * dmax * i / (cfg.n_delta - 1);
  }
  mdp.n_delta_cells = L == 1 ? cfg.n_delta : cfg.n_delta * cfg.n_delta;

  if (cfg.model == MdpModel::Full) {
    const double smax_default = 40.0 * disc.W.diagonal().maxCoeff();
    const double smax = cfg.sigma_max > 0.0 ? cfg.sigma_max : smax_default;
    mdp.sigma_grid.resize(L);
    for (int i = 0; i < L; ++i) {
      const double lo = disc.W(i, i);
      if (!(smax > lo)) throw ParameterError("mdp: sigma_max must exceed W_ii");
      auto& g = mdp.sigma_grid[i];
      g.resize(cfg.n_sigma);
      for (int k = 0; k < cfg.n_sigma; ++k) {
        g[k] = lo * std::pow(smax / lo, static_cast<double>(k) / (cfg.n_sigma - 1));
      }
    }
    mdp.n_sigma_cells = L == 1 ? cfg.n_sigma : cfg.n_sigma * cfg.n_sigma;
    if (L == 2) mdp.sigma_corr = disc.W(0, 1) / std::sqrt(disc.W(0, 0) * disc.W(1, 1));
  }
  mdp.n_states = mdp.n_delta_cells * mdp.n_sigma_cells;

  if (cfg.model == MdpModel::ErrorFree) {
    mdp.chan_nodes = {0.0};
    mdp.chan_weights = {1.0};
  } else {
    mdp.chan_nodes.resize(cfg.n_channel);
    mdp.chan_weights.assign(cfg.n_channel, 1.0 / cfg.n_channel);
    for (int j = 0; j < cfg.n_channel; ++j) {
      mdp.chan_nodes[j] = dist.quantile((j + 0.5) / cfg.n_channel);
    }
  }
  if (cfg.model == MdpModel::Full) {
    if (L == 1) {
      mdp.beams = {Vec::Ones(1)};
    } else {
      for (int b = 0; b < cfg.n_beams; ++b) {
        const double th = std::numbers::pi * b / cfg.n_beams;
        Vec q(2);
        q << std::cos(th), std::sin(th);
        mdp.beams.push_back(q);
      }
    }
    mdp.n_actions = 1 + static_cast<int>(mdp.beams.size());
  } else {
    mdp.n_actions = 2;
  }
  const int nodes = static_cast<int>(mdp.chan_nodes.size());
  mdp.rows_per_state = 1 + nodes * (mdp.n_actions - 1);

  const std::int64_t rows =
      static_cast<std::int64_t>(mdp.n_states) * mdp.rows_per_state;
  mdp.cost.resize(rows);
  mdp.row_begin.resize(rows + 1);
  mdp.entries.reserve(static_cast<std::size_t>(sz.entries_estimate));
  std::int64_t r = 0;
  for (int s = 0; s < mdp.n_states; ++s) {
    const MdpPoint p = mdp.point(s);
    for (int k = 0; k < mdp.rows_per_state; ++k, ++r) {
      int node = 0, a = 0;
      if (k > 0) {
        node = (k - 1) / (mdp.n_actions - 1);
        a = 1 + (k - 1) % (mdp.n_actions - 1);
      }
      MdpRow row = build_row(mdp, p, mdp.chan_nodes[node], a);
      mdp.cost[r] = row.cost;
      mdp.row_begin[r] = static_cast<std::int64_t>(mdp.entries.size());
      mdp.entries.insert(mdp.entries.end(), row.entries.begin(), row.entries.end());
    }
  }
  mdp.row_begin[rows] = static_cast<std::int64_t>(mdp.entries.size());
  return mdp;
}

namespace {

ViaSolution rvi(const DiscretizedMdp& mdp, const ViaOptions& opt,
                const std::vector<int>* fixed) {
  const int n = mdp.n_states;
  const int nodes = static_cast<int>(mdp.chan_nodes.size());
  const int na = mdp.n_actions;
  ViaSolution sol;
  sol.ref_state = opt.ref_state >= 0 ? opt.ref_state : [&] {
    MdpPoint p;
    p.Delta = Vec::Zero(mdp.L);
    p.Sigma = mdp.disc.W;
    return mdp.nearest_state(p);
  }();
  if (sol.ref_state >= n) throw ParameterError("via: reference state out of range");
  const double kappa = opt.aperiodicity;
  if (!(kappa > 0.0 && kappa <= 1.0)) throw ParameterError("via: aperiodicity must be in (0, 1]");
  std::vector<double> V(n, 0.0), TV(n, 0.0);
  sol.policy.assign(static_cast<std::size_t>(n) * nodes, 0);
  auto expect = [&](std::int64_t row) {
    double acc = mdp.cost[row];
    for (std::int64_t e = mdp.row_begin[row]; e < mdp.row_begin[row + 1]; ++e) {
      acc += mdp.entries[e].prob * V[mdp.entries[e].state];
    }
    return acc;
  };
  for (int it = 1; it <= opt.max_iter; ++it) {
    for (int s = 0; s < n; ++s) {
      const std::int64_t base = static_cast<std::int64_t>(s) * mdp.rows_per_state;
      const double qd = expect(base);
      double acc = 0.0;
      for (int j = 0; j < nodes; ++j) {
        double best = qd;
        int arg = 0;
        if (fixed) {
          arg = (*fixed)[static_cast<std::size_t>(s) * nodes + j];
          if (arg != 0) best = expect(base + 1 + j * (na - 1) + (arg - 1));
          sol.policy[static_cast<std::size_t>(s) * nodes + j] = arg;
          acc += mdp.chan_weights[j] * best;
          continue;
        }
        for (int a = 1; a < na; ++a) {
          const double q = expect(base + 1 + j * (na - 1) + (a - 1));
          if (q < best) {
            best = q;
            arg = a;
          }
        }
        sol.policy[static_cast<std::size_t>(s) * nodes + j] = arg;
        acc += mdp.chan_weights[j] * best;
      }
      TV[s] = kappa < 1.0 ? (1.0 - kappa) * V[s] + kappa * acc : acc;
    }
    double lo = TV[0] - V[0], hi = lo;
    for (int s = 1; s < n; ++s) {
      const double d = TV[s] - V[s];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    const double offset = TV[sol.ref_state];
    sol.span = hi - lo;
    sol.span_history.push_back(sol.span);
    for (int s = 0; s < n; ++s) V[s] = TV[s] - offset;
    sol.theta = 0.5 * (hi + lo) / (kappa * mdp.disc.tau);
    sol.iterations = it;
    if (!std::isfinite(sol.span)) {
      throw NumericError("relative_value_iteration: values are not finite");
    }
    if (sol.span <= opt.tol * std::max(std::abs(0.5 * (hi + lo)), 1e-300)) {
      sol.V = V;
      return sol;
    }
  }
  std::ostringstream os;
  os << "relative_value_iteration: no convergence in " << opt.max_iter
     << " iterations; span trace:";
  const auto& h = sol.span_history;
  for (std::size_t k = h.size() > 5 ? h.size() - 5 : 0; k < h.size(); ++k) {
    os << ' ' << h[k];
  }
  throw ConvergenceError(os.str());
}

}  // namespace

ViaSolution relative_value_iteration(const DiscretizedMdp& mdp,
                                     const ViaOptions& opt) {
  return rvi(mdp, opt, nullptr);
}

ViaSolution evaluate_policy(const DiscretizedMdp& mdp,
                            const std::vector<int>& policy,
                            const ViaOptions& opt) {
  const std::size_t want =
      static_cast<std::size_t>(mdp.n_states) * mdp.chan_nodes.size();
  if (policy.size() != want) throw ParameterError("evaluate_policy: size mismatch");
  for (int a : policy) {
    if (a < 0 || a >= mdp.n_actions) throw ParameterError("evaluate_policy: bad action");
  }
  return rvi(mdp, opt, &policy);
}

int lookahead_action(const DiscretizedMdp& mdp, const ViaSolution& sol,
                     const MdpPoint& p, double sigma_star) {
  double best = 0.0;
  int arg = 0;
  for (int a = 0; a < mdp.n_actions; ++a) {
    const MdpRow row = build_row(mdp, p, sigma_star, a);
    double q = row.cost;
    for (const auto& e : row.entries) q += e.prob * sol.V[e.state];
    if (a == 0 || q < best) {
      best = q;
      arg = a;
    }
  }
  return arg;
}

double performance_loss(double proposed, double optimal) {
  if (!(optimal > 0.0)) {
    throw ParameterError("performance_loss: nonpositive optimal cost "
                         "(invalid comparison)");
  }
  return 100.0 * (proposed - optimal) / optimal;
}

void save_solution_csv(const std::string& path, const DiscretizedMdp& mdp,
                       const ViaSolution& sol) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << "# ncs-via v1\n";
  f << std::setprecision(17);
  f << "# theta," << sol.theta << ",states," << mdp.n_states << ",nodes,"
    << mdp.chan_nodes.size() << "\n";
  f << "state,node,action,value\n";
  const int nodes = static_cast<int>(mdp.chan_nodes.size());
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int j = 0; j < nodes; ++j) {
      f << s << ',' << j << ',' << sol.policy[static_cast<std::size_t>(s) * nodes + j]
        << ',' << sol.V[s] << '\n';
    }
  }
}

ViaSolution load_solution_csv(const std::string& path,
                              const DiscretizedMdp& mdp) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::string line;
  std::getline(f, line);
  if (line != "# ncs-via v1") throw ConfigError(path + ": unsupported format");
  ViaSolution sol;
  std::getline(f, line);
  {
    std::istringstream is(line.substr(2));
    std::string tok;
    std::getline(is, tok, ',');
    std::getline(is, tok, ',');
    sol.theta = std::stod(tok);
    std::getline(is, tok, ',');
    std::getline(is, tok, ',');
    if (std::stoi(tok) != mdp.n_states) throw ConfigError(path + ": state count mismatch");
  }
  std::getline(f, line);
  const int nodes = static_cast<int>(mdp.chan_nodes.size());
  sol.V.assign(mdp.n_states, 0.0);
  sol.policy.assign(static_cast<std::size_t>(mdp.n_states) * nodes, 0);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string a, b, c, d;
    std::getline(is, a, ',');
    std::getline(is, b, ',');
    std::getline(is, c, ',');
    std::getline(is, d, ',');
    const int s = std::stoi(a), j = std::stoi(b);
    if (s < 0 || s >= mdp.n_states || j < 0 || j >= nodes) {
      throw ConfigError(path + ": index out of range");
    }
    sol.policy[static_cast<std::size_t>(s) * nodes + j] = std::stoi(c);
    sol.V[s] = std::stod(d);
  }
  return sol;
}

int monotonicity_violations(const DiscretizedMdp& mdp, const ViaSolution& sol) {
  const int nodes = static_cast<int>(mdp.chan_nodes.size());
  const int n = static_cast<int>(mdp.delta_grid.size());
  const int c = n / 2;
  int bad = 0;
  // Rays from the origin: ±axes (and diagonals for L = 2).
  std::vector<std::pair<int, int>> dirs = {{1, 0}, {-1, 0}};
  if (mdp.L == 2) {
    dirs.insert(dirs.end(), {{0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}});
  }
  for (int is = 0; is < mdp.n_sigma_cells; ++is) {
    for (int j = 0; j < nodes; ++j) {
      for (auto [dx, dy] : dirs) {
        bool seen_tx = false;
        for (int k = 0; k < c; ++k) {
          const int x = c + k * dx, y = c + k * dy;
          if (x < 0 || x >= n || y < 0 || y >= n) break;
          const int id = mdp.L == 1 ? x : x + n * y;
          const int s = id + mdp.n_delta_cells * is;
          const bool tx = sol.policy[static_cast<std::size_t>(s) * nodes + j] != 0;
          if (tx) seen_tx = true;
          if (seen_tx && !tx) {
            ++bad;
            break;
          }
        }
      }
    }
  }
  return bad;
}

}  // namespace ncs
