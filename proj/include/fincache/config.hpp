#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fincache {

// Sectioned key-value config text: "[section]" headers, "key = value" lines,
// '#' comments, blank lines ignored.
struct RawConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string source_text;

  bool has(const std::string& sec, const std::string& key) const {
    auto s = sections.find(sec);
    return s != sections.end() && s->second.count(key) > 0;
  }
  std::string get(const std::string& sec, const std::string& key,
                  const std::string& fallback = "") const {
    auto s = sections.find(sec);
    if (s == sections.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }
};

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline RawConfig parse_config(const std::string& text) {
  RawConfig cfg;
  cfg.source_text = text;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      cfg.sections[section];
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    cfg.sections[section][key] = val;
  }
  return cfg;
}

struct ExperimentConfig {
  // topology
  std::string topo_type = "er";  // er | ba | edge_list
  int nodes = 100;
  double er_p = -1.0;  // direct p, or derived from mean degree z
  double er_z = -1.0;
  int ba_m = 2;
  std::string edge_list_path;

  // catalog / demand
  int objects = 100;
  double size_mb = 8.4;
  double weibull_shape = 0.513;
  double weibull_scale = 40.0;
  double rate = 100.0;
  double perturb = 0.2;

  // game
  double capacity = 4.0;
  int radius = 2;
  std::string discount = "inverse_hop";  // inverse_hop | unit
  double eps0 = 1e-6;

  // solvers
  bool run_central = true;
  bool run_fin = true;
  std::string schedule = "polyak";  // polyak | diminishing | constant
  double xi0 = 1.0;
  int k_stop = 1200;
  double fin_tol = 1e-5;
  double central_tol = 1e-6;
  int central_max_iter = 4000;

  // baselines
  std::vector<std::string> baselines;  // subset of {lru, ns1, ns4}
  size_t stream_events = 100000;
  double lru_cache_mb = -1.0;  // default capacity * size_mb

  // fairness / overhead
  int pf_trials = 500;
  double message_c = 1.0;
  int r_max = 3;

  // run
  std::vector<uint64_t> seeds = {1};
  std::string out_dir = "out";
  int threads = 1;

  std::string raw_text;
};

namespace detail {

inline double to_real(const std::string& v, const std::string& field, std::vector<std::string>* errs) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    if (errs) errs->push_back(field + ": not a number ('" + v + "')");
    return 0.0;
  }
}

inline long to_int(const std::string& v, const std::string& field, std::vector<std::string>* errs) {
  try {
    size_t pos = 0;
    long r = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    if (errs) errs->push_back(field + ": not an integer ('" + v + "')");
    return 0;
  }
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream in(v);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace detail

// Builds the typed config, collecting validation errors (field paths) and
// warnings rather than throwing.
inline ExperimentConfig load_config(const RawConfig& raw, std::vector<std::string>& errors,
                                    std::vector<std::string>& warnings) {
  using detail::to_int;
  using detail::to_real;
  ExperimentConfig c;
  c.raw_text = raw.source_text;

  if (!raw.sections.count("topology")) errors.push_back("topology: required");
  if (raw.has("topology", "type")) c.topo_type = raw.get("topology", "type");
  if (c.topo_type != "er" && c.topo_type != "ba" && c.topo_type != "edge_list")
    errors.push_back("topology.type: must be er, ba or edge_list");
  if (raw.has("topology", "n")) c.nodes = static_cast<int>(to_int(raw.get("topology", "n"), "topology.n", &errors));
  if (c.nodes < 1) errors.push_back("topology.n: must be >= 1");
  if (raw.has("topology", "p")) c.er_p = to_real(raw.get("topology", "p"), "topology.p", &errors);
  if (raw.has("topology", "z")) c.er_z = to_real(raw.get("topology", "z"), "topology.z", &errors);
  if (raw.has("topology", "m")) c.ba_m = static_cast<int>(to_int(raw.get("topology", "m"), "topology.m", &errors));
  if (raw.has("topology", "path")) c.edge_list_path = raw.get("topology", "path");
  if (c.topo_type == "er" && c.er_p < 0 && c.er_z < 0)
    errors.push_back("topology.p: required for er (or topology.z)");
  if (c.topo_type == "er" && c.er_p > 1.0) errors.push_back("topology.p: must be <= 1");
  if (c.topo_type == "ba" && c.nodes <= c.ba_m) errors.push_back("topology.m: requires n > m");
  if (c.topo_type == "edge_list") {
    if (c.edge_list_path.empty())
      errors.push_back("topology.path: required for edge_list");
    else if (!std::filesystem::exists(c.edge_list_path))
      errors.push_back("topology.path: file not found (" + c.edge_list_path + ")");
  }

  if (raw.has("catalog", "objects"))
    c.objects = static_cast<int>(to_int(raw.get("catalog", "objects"), "catalog.objects", &errors));
  if (c.objects < 1) errors.push_back("catalog.objects: must be >= 1");
  if (raw.has("catalog", "size_mb"))
    c.size_mb = to_real(raw.get("catalog", "size_mb"), "catalog.size_mb", &errors);
  if (c.size_mb <= 0) errors.push_back("catalog.size_mb: must be > 0");
  if (raw.has("catalog", "weibull_shape"))
    c.weibull_shape = to_real(raw.get("catalog", "weibull_shape"), "catalog.weibull_shape", &errors);
  if (c.weibull_shape <= 0) errors.push_back("catalog.weibull_shape: must be > 0");
  if (raw.has("catalog", "weibull_scale"))
    c.weibull_scale = to_real(raw.get("catalog", "weibull_scale"), "catalog.weibull_scale", &errors);
  if (c.weibull_scale <= 0) errors.push_back("catalog.weibull_scale: must be > 0");

  if (raw.has("demand", "rate")) c.rate = to_real(raw.get("demand", "rate"), "demand.rate", &errors);
  if (c.rate <= 0) errors.push_back("demand.rate: must be > 0");
  if (raw.has("demand", "perturb"))
    c.perturb = to_real(raw.get("demand", "perturb"), "demand.perturb", &errors);
  if (c.perturb < 0 || c.perturb >= 1) errors.push_back("demand.perturb: must be in [0,1)");

  if (raw.has("game", "capacity"))
    c.capacity = to_real(raw.get("game", "capacity"), "game.capacity", &errors);
  if (c.capacity < 0) errors.push_back("game.capacity: must be >= 0");
  if (raw.has("game", "radius"))
    c.radius = static_cast<int>(to_int(raw.get("game", "radius"), "game.radius", &errors));
  if (c.radius < 0) errors.push_back("game.radius: must be >= 0");
  if (raw.has("game", "discount")) c.discount = raw.get("game", "discount");
  if (c.discount != "inverse_hop" && c.discount != "unit")
    errors.push_back("game.discount: must be inverse_hop or unit");
  if (raw.has("game", "eps0")) c.eps0 = to_real(raw.get("game", "eps0"), "game.eps0", &errors);

  if (raw.has("solver", "central")) c.run_central = raw.get("solver", "central") == "true";
  if (raw.has("solver", "fin")) c.run_fin = raw.get("solver", "fin") == "true";
  if (raw.has("solver", "schedule")) c.schedule = raw.get("solver", "schedule");
  if (c.schedule != "polyak" && c.schedule != "diminishing" && c.schedule != "constant")
    errors.push_back("solver.schedule: must be polyak, diminishing, or constant");
  if (raw.has("solver", "xi0")) c.xi0 = to_real(raw.get("solver", "xi0"), "solver.xi0", &errors);
  if (c.xi0 <= 0) errors.push_back("solver.xi0: must be > 0");
  if (raw.has("solver", "k_stop"))
    c.k_stop = static_cast<int>(to_int(raw.get("solver", "k_stop"), "solver.k_stop", &errors));
  if (raw.has("solver", "tol")) c.fin_tol = to_real(raw.get("solver", "tol"), "solver.tol", &errors);
  if (raw.has("solver", "central_tol"))
    c.central_tol = to_real(raw.get("solver", "central_tol"), "solver.central_tol", &errors);
  if (raw.has("solver", "central_max_iter"))
    c.central_max_iter = static_cast<int>(
        to_int(raw.get("solver", "central_max_iter"), "solver.central_max_iter", &errors));

  if (raw.has("baselines", "list")) c.baselines = detail::split_list(raw.get("baselines", "list"));
  for (const auto& b : c.baselines)
    if (b != "lru" && b != "ns1" && b != "ns4")
      errors.push_back("baselines.list: unknown baseline '" + b + "'");
  if (raw.has("baselines", "stream_events"))
    c.stream_events = static_cast<size_t>(
        to_int(raw.get("baselines", "stream_events"), "baselines.stream_events", &errors));
  if (raw.has("baselines", "lru_cache_mb"))
    c.lru_cache_mb = to_real(raw.get("baselines", "lru_cache_mb"), "baselines.lru_cache_mb", &errors);

  if (raw.has("fairness", "pf_trials"))
    c.pf_trials = static_cast<int>(to_int(raw.get("fairness", "pf_trials"), "fairness.pf_trials", &errors));
  if (raw.has("overhead", "c"))
    c.message_c = to_real(raw.get("overhead", "c"), "overhead.c", &errors);
  if (c.message_c <= 0) errors.push_back("overhead.c: must be > 0");
  if (raw.has("overhead", "r_max"))
    c.r_max = static_cast<int>(to_int(raw.get("overhead", "r_max"), "overhead.r_max", &errors));
  if (c.r_max < 1) errors.push_back("overhead.r_max: must be >= 1");

  if (raw.has("run", "seeds")) {
    c.seeds.clear();
    for (const auto& s : detail::split_list(raw.get("run", "seeds")))
      c.seeds.push_back(static_cast<uint64_t>(to_int(s, "run.seeds", &errors)));
  }
  if (c.seeds.empty()) errors.push_back("run.seeds: non-empty seed list required");
  if (raw.has("run", "out")) c.out_dir = raw.get("run", "out");
  if (raw.has("run", "threads"))
    c.threads = static_cast<int>(to_int(raw.get("run", "threads"), "run.threads", &errors));
  if (c.threads < 1) errors.push_back("run.threads: must be >= 1");

  if (c.capacity > c.objects)
    warnings.push_back("game.capacity exceeds catalog.objects; capacity effectively clamped");
  return c;
}

// FNV-1a over the normalized config text, for the run manifest.
inline uint64_t config_hash(const std::string& text) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace fincache
