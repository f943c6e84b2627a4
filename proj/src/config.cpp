#include "ncs/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ncs {

using nlohmann::json;

namespace {

Mat mat_from_json(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ConfigError(key + ": expected a nested array (row-major matrix)");
  }
  const auto rows = j.size(), cols = j[0].size();
  Mat M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw ConfigError(key + ": ragged matrix rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ConfigError(key + ": non-numeric entry");
      M(r, c) = j[r][c].get<double>();
    }
  }
  return M;
}

json mat_to_json(const Mat& M) {
  json j = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    j.push_back(row);
  }
  return j;
}

Vec vec_from_json(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError(key + ": expected an array");
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(key + ": non-numeric entry");
    v(i) = j[i].get<double>();
  }
  return v;
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <class T>
void get_if(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void apply_via(const json& j, PolicyConfig& p) {
  check_keys(j,
             {"model", "n_delta", "delta_max", "n_sigma", "sigma_max",
              "n_channel", "n_beams", "gh_nodes", "nearest_sigma",
              "snr_threshold", "memory_budget_mb", "tol", "max_iter", "table"},
             "policy.via");
  if (j.contains("model")) {
    p.via.model = parse_mdp_model(j.at("model").get<std::string>());
  }
  get_if(j, "n_delta", p.via.n_delta, "policy.via");
  get_if(j, "delta_max", p.via.delta_max, "policy.via");
  get_if(j, "n_sigma", p.via.n_sigma, "policy.via");
  get_if(j, "sigma_max", p.via.sigma_max, "policy.via");
  get_if(j, "n_channel", p.via.n_channel, "policy.via");
  get_if(j, "n_beams", p.via.n_beams, "policy.via");
  get_if(j, "gh_nodes", p.via.gh_nodes, "policy.via");
  get_if(j, "nearest_sigma", p.via.nearest_sigma, "policy.via");
  get_if(j, "snr_threshold", p.via.snr_threshold, "policy.via");
  get_if(j, "memory_budget_mb", p.via.memory_budget_mb, "policy.via");
  get_if(j, "tol", p.via_solver.tol, "policy.via");
  get_if(j, "max_iter", p.via_solver.max_iter, "policy.via");
  get_if(j, "table", p.via_table, "policy.via");
}

void apply_policy(const json& j, PolicyConfig& p) {
  check_keys(j, {"kind", "eta_th", "sigma_anchor", "sigma_explicit", "adp", "via"},
             "policy");
  try {
    if (j.contains("kind")) p.kind = parse_policy(j.at("kind").get<std::string>());
    if (j.contains("sigma_anchor")) {
      p.priority.anchor = parse_sigma_anchor(j.at("sigma_anchor").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
  get_if(j, "eta_th", p.eta_th, "policy");
  if (j.contains("sigma_explicit")) {
    p.priority.sigma_explicit = mat_from_json(j.at("sigma_explicit"), "policy.sigma_explicit");
  }
  if (j.contains("adp")) {
    const json& a = j.at("adp");
    check_keys(a, {"alpha0", "decay", "norm_cap", "r1_init"}, "policy.adp");
    get_if(a, "alpha0", p.adp.alpha0, "policy.adp");
    get_if(a, "decay", p.adp.decay, "policy.adp");
    get_if(a, "norm_cap", p.adp.norm_cap, "policy.adp");
    get_if(a, "r1_init", p.adp.r1_init, "policy.adp");
  }
  if (j.contains("via")) apply_via(j.at("via"), p);
}

}  // namespace

Mat SimConfig::weight() const {
  return S.size() ? S : Mat::Identity(L(), L());
}

void SimConfig::validate() const {
  try {
    plant.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  const int n = L();
  if (Q.rows() != n || Q.cols() != n) throw ConfigError("Q must be L×L");
  if (R.rows() != plant.M() || R.cols() != plant.M()) throw ConfigError("R must be M×M");
  if (S.size() && (S.rows() != n || S.cols() != n)) throw ConfigError("S must be L×L");
  if (x0.size() && x0.size() != n) throw ConfigError("x0 must have length L");
  if (Nt < 1 || Nr < 1) throw ConfigError("antenna counts must be >= 1");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(F_bar > 0.0)) throw ConfigError("F_bar must be > 0");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (horizon <= 0) throw ConfigError("horizon must be > 0");
  const long b = effective_burn_in();
  if (b < 0 || b >= horizon) throw ConfigError("need horizon > burn_in >= 0");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (!(policy.eta_th >= 0.0)) throw ConfigError("eta_th must be >= 0");
}

SimConfig SimConfig::paper_preset() {
  SimConfig c;
  c.plant.A_tilde.resize(2, 2);
  c.plant.A_tilde << 1, 2, -1, 3;
  c.plant.B_tilde.resize(2, 2);
  c.plant.B_tilde << 1, 0.2, 0.1, 1;
  c.plant.W_tilde = Eigen::Vector2d(1, 2).asDiagonal().toDenseMatrix();
  c.Q = Eigen::Vector2d(1, 2).asDiagonal().toDenseMatrix();
  c.R = Eigen::Vector2d(1, 0.2).asDiagonal().toDenseMatrix();
  c.Nt = 3;
  c.Nr = 2;
  c.tau = 0.05;
  c.F_bar = 2.0;
  c.lambda = 1500.0;
  c.policy.eta_th = 0.31;
  return c;
}

SimConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check_keys(j,
             {"preset", "plant", "channel", "tau", "F_bar", "lambda", "S",
              "policy", "horizon", "burn_in", "episodes", "seed", "threads",
              "x0", "noiseless_channel", "trace", "out"},
             "config");
  SimConfig c;
  if (j.contains("preset")) {
    const auto p = j.at("preset").get<std::string>();
    if (p != "paper") throw ConfigError("config: unknown preset '" + p + "'");
    c = SimConfig::paper_preset();
  }
  if (j.contains("plant")) {
    const json& p = j.at("plant");
    check_keys(p, {"A_tilde", "B_tilde", "W_tilde", "Q", "R"}, "plant");
    if (p.contains("A_tilde")) c.plant.A_tilde = mat_from_json(p.at("A_tilde"), "plant.A_tilde");
    if (p.contains("B_tilde")) c.plant.B_tilde = mat_from_json(p.at("B_tilde"), "plant.B_tilde");
    if (p.contains("W_tilde")) c.plant.W_tilde = mat_from_json(p.at("W_tilde"), "plant.W_tilde");
    if (p.contains("Q")) c.Q = mat_from_json(p.at("Q"), "plant.Q");
    if (p.contains("R")) c.R = mat_from_json(p.at("R"), "plant.R");
  }
  if (j.contains("channel")) {
    const json& ch = j.at("channel");
    check_keys(ch, {"Nt", "Nr"}, "channel");
    get_if(ch, "Nt", c.Nt, "channel");
    get_if(ch, "Nr", c.Nr, "channel");
  }
  get_if(j, "tau", c.tau, "config");
  get_if(j, "F_bar", c.F_bar, "config");
  get_if(j, "lambda", c.lambda, "config");
  if (j.contains("S")) c.S = mat_from_json(j.at("S"), "S");
  if (j.contains("policy")) apply_policy(j.at("policy"), c.policy);
  get_if(j, "horizon", c.horizon, "config");
  get_if(j, "burn_in", c.burn_in, "config");
  get_if(j, "episodes", c.episodes, "config");
  get_if(j, "seed", c.seed, "config");
  get_if(j, "threads", c.threads, "config");
  if (j.contains("x0")) c.x0 = vec_from_json(j.at("x0"), "x0");
  get_if(j, "noiseless_channel", c.noiseless_channel, "config");
  get_if(j, "trace", c.trace, "config");
  get_if(j, "out", c.out_dir, "config");
  c.validate();
  return c;
}

SimConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json_text(const SimConfig& c) {
  json j;
  j["plant"] = {{"A_tilde", mat_to_json(c.plant.A_tilde)},
                {"B_tilde", mat_to_json(c.plant.B_tilde)},
                {"W_tilde", mat_to_json(c.plant.W_tilde)},
                {"Q", mat_to_json(c.Q)},
                {"R", mat_to_json(c.R)}};
  j["channel"] = {{"Nt", c.Nt}, {"Nr", c.Nr}};
  j["tau"] = c.tau;
  j["F_bar"] = c.F_bar;
  j["lambda"] = c.lambda;
  if (c.S.size()) j["S"] = mat_to_json(c.S);
  json p;
  p["kind"] = to_string(c.policy.kind);
  p["eta_th"] = c.policy.eta_th;
  p["sigma_anchor"] = to_string(c.policy.priority.anchor);
  j["policy"] = p;
  j["horizon"] = c.horizon;
  j["burn_in"] = c.burn_in;
  j["episodes"] = c.episodes;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  if (c.x0.size()) j["x0"] = std::vector<double>(c.x0.data(), c.x0.data() + c.x0.size());
  j["noiseless_channel"] = c.noiseless_channel;
  j["trace"] = c.trace;
  if (!c.out_dir.empty()) j["out"] = c.out_dir;
  return j.dump(2);
}

}  // namespace ncs
