#pragma once

// Experiment configuration. TOML files are converted to JSON so both formats
// go through one strict reader that rejects unknown keys.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "defw/error.hpp"

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

namespace defw::harness {

using json = nlohmann::json;

enum class ExperimentKind { Lasso, McSquare, McGauss, SparsifiedLasso, BaselineDpg, CentralizedFw };
/// Objective families a baseline kind can run on.
enum class ProblemFamily { Lasso, McSquare, McGauss };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Lasso: return "lasso";
    case ExperimentKind::McSquare: return "mc-square";
    case ExperimentKind::McGauss: return "mc-gauss";
    case ExperimentKind::SparsifiedLasso: return "sparsified-lasso";
    case ExperimentKind::BaselineDpg: return "baseline-dpg";
    case ExperimentKind::CentralizedFw: return "centralized-fw";
  }
  return "?";
}

inline std::string to_string(ProblemFamily f) {
  switch (f) {
    case ProblemFamily::Lasso: return "lasso";
    case ProblemFamily::McSquare: return "mc-square";
    case ProblemFamily::McGauss: return "mc-gauss";
  }
  return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::Lasso, ExperimentKind::McSquare, ExperimentKind::McGauss,
                 ExperimentKind::SparsifiedLasso, ExperimentKind::BaselineDpg, ExperimentKind::CentralizedFw})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment kind '" + s +
                    "' (expected lasso, mc-square, mc-gauss, sparsified-lasso, baseline-dpg or centralized-fw)");
}

inline ProblemFamily parse_family(const std::string& s) {
  for (auto f : {ProblemFamily::Lasso, ProblemFamily::McSquare, ProblemFamily::McGauss})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown problem '" + s + "' (expected lasso, mc-square or mc-gauss)");
}

struct NetworkConfig {
  std::size_t agents = 50;
  std::string topology = "erdos-renyi";  ///< erdos-renyi | ring | complete | path | file
  double p = 0.1;
  std::optional<std::uint64_t> seed;  ///< falls back to the experiment seed
  std::string edge_file;
};

struct ScheduleConfig {
  std::string variant = "convex";  ///< convex: 2/(t+1); nonconvex: t^-alpha
  double alpha = 0.75;
};

struct LassoConfig {
  long m = 20;
  long d = 10000;
  long s = 50;
  double sigma2 = 0.01;
  double radius_factor = 1.1;    ///< R = factor * ||theta_true||_1
  std::optional<double> radius;  ///< overrides radius_factor
};

struct McConfig {
  long m1 = 100;
  long m2 = 250;
  long rank = 5;
  double train_fraction = 0.2;
  std::string noise = "none";  ///< none | sparse
  double noise_prob = 0.2;
  double noise_var = 5.0;
  double loss_scale = 1.0;       ///< sigma_i^2 (square) or sigma_i (negated Gaussian)
  double radius_factor = 1.2;    ///< R = factor * ||theta_true||_*
  std::optional<double> radius;
  std::string movielens;         ///< u.data path; replaces synthetic data when set
  double movielens_train_fraction = 0.8;
};

struct SparsifyConfig {
  std::string scheme = "random";  ///< random | extreme
  double alpha_comm = 0.05;
  std::string ell = "experiment";  ///< experiment | theory | fixed
  double c_l = 1.0;
  int rounds = 1;  ///< for ell = fixed
};

struct DpgStepConfig {
  std::string rule;  ///< inverse-t | scaled-sqrt; empty picks by problem family
  double c1 = 0.1;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Lasso;
  ProblemFamily problem = ProblemFamily::Lasso;
  long iterations = 1000;
  int ac_rounds = 1;
  std::uint64_t seed = 1;
  std::string output = "metrics.csv";
  bool certificate = false;
  /// Centralized FW iterations used to estimate F* for the suboptimality column (0 disables).
  long fstar_iterations = 0;
  NetworkConfig network;
  ScheduleConfig schedule;
  LassoConfig lasso;
  McConfig mc;
  SparsifyConfig sparsify;
  DpgStepConfig dpg;

  bool lasso_family() const { return problem == ProblemFamily::Lasso; }
};

/// Full-scale defaults for a kind.
inline ExperimentConfig paper_preset(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::Lasso:
    case ExperimentKind::SparsifiedLasso: c.problem = ProblemFamily::Lasso; break;
    case ExperimentKind::McSquare: c.problem = ProblemFamily::McSquare; break;
    case ExperimentKind::McGauss: c.problem = ProblemFamily::McGauss; break;
    default: c.problem = ProblemFamily::Lasso; break;
  }
  if (kind == ExperimentKind::McGauss) {
    c.schedule.variant = "nonconvex";
    c.schedule.alpha = 0.75;
  }
  c.fstar_iterations = 2000;
  return c;
}

/// Scaled-down defaults that finish in seconds.
inline ExperimentConfig desk_preset(ExperimentKind kind) {
  ExperimentConfig c = paper_preset(kind);
  c.iterations = 500;
  c.network.agents = 10;
  c.network.p = 0.4;
  c.lasso.m = 20;
  c.lasso.d = 2000;
  c.lasso.s = 20;
  c.mc.m1 = 40;
  c.mc.m2 = 60;
  c.mc.rank = 3;
  c.certificate = true;
  c.fstar_iterations = 20000;
  return c;
}

inline ExperimentConfig preset(const std::string& name, ExperimentKind kind) {
  if (name == "paper") return paper_preset(kind);
  if (name == "desk") return desk_preset(kind);
  throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
}

namespace detail {

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "must be a table/object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
        out = v.get<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
        out = v.get<std::string>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
        out = v.get<T>();
      } else {
        if (!v.is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<long long>() < 0) throw ConfigError("");
        }
        out = v.get<T>();
      }
    } catch (const ConfigError&) {
      throw ConfigError(where() + "key '" + key + "' has the wrong type (" + std::string(v.type_name()) + ")");
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    if (!j_.contains(key)) {
      seen_.insert(key);
      return;
    }
    T tmp{};
    get(key, tmp);
    out = tmp;
  }

  void sub(const std::string& key) { seen_.insert(key); }
  bool has(const std::string& key) const { return j_.contains(key); }
  const json& at(const std::string& key) const { return j_.at(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(where() + "unknown key '" + it.key() + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "config: " : "config [" + path_ + "]: "; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("invalid config: " + m); };
  if (c.iterations < 1) fail("iterations (T) must be >= 1, got " + std::to_string(c.iterations));
  if (c.ac_rounds < 1) fail("ac_rounds must be >= 1");
  if (c.fstar_iterations < 0) fail("fstar_iterations must be >= 0");
  if (c.network.agents < 1) fail("network.agents must be >= 1");
  const auto& topo = c.network.topology;
  if (topo != "erdos-renyi" && topo != "ring" && topo != "complete" && topo != "path" && topo != "file")
    fail("network.topology must be erdos-renyi, ring, complete, path or file");
  if (topo == "erdos-renyi" && !(c.network.p > 0.0 && c.network.p <= 1.0)) fail("network.p must lie in (0, 1]");
  if (topo == "file" && c.network.edge_file.empty()) fail("network.edge_file is required for topology = file");
  if (c.schedule.variant != "convex" && c.schedule.variant != "nonconvex")
    fail("schedule.variant must be convex or nonconvex");
  if (c.schedule.variant == "nonconvex" && !(c.schedule.alpha > 0.0 && c.schedule.alpha <= 1.0))
    fail("schedule.alpha must lie in (0, 1]");
  if (c.lasso_family()) {
    if (c.lasso.m < 1 || c.lasso.d < 1) fail("lasso.m and lasso.d must be >= 1");
    if (c.lasso.s < 0 || c.lasso.s > c.lasso.d) fail("lasso.s must satisfy 0 <= s <= d");
    if (c.lasso.sigma2 < 0.0) fail("lasso.sigma2 must be >= 0");
    if (c.lasso.radius && !(*c.lasso.radius > 0.0)) fail("lasso.radius must be > 0");
    if (!c.lasso.radius && !(c.lasso.radius_factor > 0.0)) fail("lasso.radius_factor must be > 0");
    if (!c.lasso.radius && c.lasso.s == 0) fail("lasso.s = 0 needs an explicit lasso.radius");
  } else {
    if (c.mc.movielens.empty()) {
      if (c.mc.m1 < 1 || c.mc.m2 < 1) fail("mc.m1 and mc.m2 must be >= 1");
      if (c.mc.rank < 1 || c.mc.rank > std::min(c.mc.m1, c.mc.m2)) fail("mc.rank must satisfy 1 <= K <= min(m1, m2)");
      if (!(c.mc.train_fraction > 0.0 && c.mc.train_fraction < 1.0)) fail("mc.train_fraction must lie in (0, 1)");
    } else {
      if (!c.mc.radius) fail("mc.radius is required with mc.movielens (no ground truth to scale from)");
      if (!(c.mc.movielens_train_fraction > 0.0 && c.mc.movielens_train_fraction < 1.0))
        fail("mc.movielens_train_fraction must lie in (0, 1)");
    }
    if (c.mc.noise != "none" && c.mc.noise != "sparse") fail("mc.noise must be none or sparse");
    if (!(c.mc.noise_prob >= 0.0 && c.mc.noise_prob <= 1.0)) fail("mc.noise_prob must lie in [0, 1]");
    if (c.mc.noise_var < 0.0) fail("mc.noise_var must be >= 0");
    if (!(c.mc.loss_scale > 0.0)) fail("mc.loss_scale must be > 0");
    if (c.mc.radius && !(*c.mc.radius > 0.0)) fail("mc.radius must be > 0");
    if (!c.mc.radius && !(c.mc.radius_factor > 0.0)) fail("mc.radius_factor must be > 0");
  }
  if (c.kind == ExperimentKind::SparsifiedLasso) {
    if (c.sparsify.scheme != "random" && c.sparsify.scheme != "extreme") fail("sparsify.scheme must be random or extreme");
    if (c.sparsify.alpha_comm < 0.0) fail("sparsify.alpha_comm must be >= 0");
    if (c.sparsify.ell != "experiment" && c.sparsify.ell != "theory" && c.sparsify.ell != "fixed")
      fail("sparsify.ell must be experiment, theory or fixed");
    if (c.sparsify.ell == "fixed" && c.sparsify.rounds < 1) fail("sparsify.rounds must be >= 1");
  }
  if (c.kind == ExperimentKind::BaselineDpg) {
    if (!c.dpg.rule.empty() && c.dpg.rule != "inverse-t" && c.dpg.rule != "scaled-sqrt")
      fail("dpg.rule must be inverse-t or scaled-sqrt");
    if (!(c.dpg.c1 > 0.0)) fail("dpg.c1 must be > 0");
  }
}

/// Reads a config from JSON. `preset_name` picks the defaults that the file
/// then overrides.
inline ExperimentConfig parse_config(const json& j, const std::string& preset_name = "paper") {
  detail::Section top(j, "");
  std::string kind_name;
  top.get("kind", kind_name);
  if (kind_name.empty()) throw ConfigError("config: missing required key 'kind'");
  ExperimentConfig c = preset(preset_name, parse_kind(kind_name));

  if (c.kind == ExperimentKind::BaselineDpg || c.kind == ExperimentKind::CentralizedFw) {
    std::string fam = to_string(c.problem);
    top.get("problem", fam);
    c.problem = parse_family(fam);
    if (c.problem == ProblemFamily::McGauss && !top.has("schedule")) {
      c.schedule.variant = "nonconvex";
      c.schedule.alpha = 0.75;
    }
  } else if (top.has("problem")) {
    throw ConfigError("config: key 'problem' only applies to baseline-dpg and centralized-fw");
  }
  top.get("iterations", c.iterations);
  top.get("ac_rounds", c.ac_rounds);
  top.get("seed", c.seed);
  top.get("output", c.output);
  top.get("certificate", c.certificate);
  top.get("fstar_iterations", c.fstar_iterations);

  if (top.has("network")) {
    top.sub("network");
    detail::Section s(top.at("network"), "network");
    s.get("agents", c.network.agents);
    s.get("topology", c.network.topology);
    s.get("p", c.network.p);
    s.get("seed", c.network.seed);
    s.get("edge_file", c.network.edge_file);
    s.finish();
  }
  if (top.has("schedule")) {
    top.sub("schedule");
    detail::Section s(top.at("schedule"), "schedule");
    s.get("variant", c.schedule.variant);
    s.get("alpha", c.schedule.alpha);
    s.finish();
  }
  if (top.has("lasso")) {
    top.sub("lasso");
    detail::Section s(top.at("lasso"), "lasso");
    s.get("m", c.lasso.m);
    s.get("d", c.lasso.d);
    s.get("s", c.lasso.s);
    s.get("sigma2", c.lasso.sigma2);
    s.get("radius_factor", c.lasso.radius_factor);
    s.get("radius", c.lasso.radius);
    s.finish();
  }
  if (top.has("mc")) {
    top.sub("mc");
    detail::Section s(top.at("mc"), "mc");
    s.get("m1", c.mc.m1);
    s.get("m2", c.mc.m2);
    s.get("rank", c.mc.rank);
    s.get("train_fraction", c.mc.train_fraction);
    s.get("noise", c.mc.noise);
    s.get("noise_prob", c.mc.noise_prob);
    s.get("noise_var", c.mc.noise_var);
    s.get("loss_scale", c.mc.loss_scale);
    s.get("radius_factor", c.mc.radius_factor);
    s.get("radius", c.mc.radius);
    s.get("movielens", c.mc.movielens);
    s.get("movielens_train_fraction", c.mc.movielens_train_fraction);
    s.finish();
  }
  if (top.has("sparsify")) {
    top.sub("sparsify");
    detail::Section s(top.at("sparsify"), "sparsify");
    s.get("scheme", c.sparsify.scheme);
    s.get("alpha_comm", c.sparsify.alpha_comm);
    s.get("ell", c.sparsify.ell);
    s.get("c_l", c.sparsify.c_l);
    s.get("rounds", c.sparsify.rounds);
    s.finish();
  }
  if (top.has("dpg")) {
    top.sub("dpg");
    detail::Section s(top.at("dpg"), "dpg");
    s.get("rule", c.dpg.rule);
    s.get("c1", c.dpg.c1);
    s.finish();
  }
  top.finish();
  validate(c);
  return c;
}

inline json toml_to_json(const std::string& text, const std::string& source = "<string>") {
  try {
    const toml::table tbl = toml::parse(text, source);
    std::ostringstream os;
    os << toml::json_formatter{tbl};
    return json::parse(os.str());
  } catch (const toml::parse_error& e) {
    throw ConfigError("TOML parse error in " + source + " at line " + std::to_string(e.source().begin.line) + ": " +
                      std::string(e.description()));
  }
}

/// Parses TOML or JSON text; JSON is recognised by a leading '{'.
inline ExperimentConfig parse_config_text(const std::string& text, const std::string& source,
                                          const std::string& preset_name = "paper") {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("JSON parse error in " + source + ": " + e.what());
    }
    return parse_config(j, preset_name);
  }
  return parse_config(toml_to_json(text, source), preset_name);
}

inline ExperimentConfig load_config(const std::string& path, const std::string& preset_name = "paper") {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path, preset_name);
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  j["problem"] = to_string(c.problem);
  j["iterations"] = c.iterations;
  j["ac_rounds"] = c.ac_rounds;
  j["seed"] = c.seed;
  j["certificate"] = c.certificate;
  j["fstar_iterations"] = c.fstar_iterations;
  j["network"] = {{"agents", c.network.agents}, {"topology", c.network.topology}, {"p", c.network.p},
                  {"seed", c.network.seed.value_or(c.seed)}};
  j["schedule"] = {{"variant", c.schedule.variant}, {"alpha", c.schedule.alpha}};
  if (c.lasso_family()) {
    j["lasso"] = {{"m", c.lasso.m}, {"d", c.lasso.d}, {"s", c.lasso.s}, {"sigma2", c.lasso.sigma2},
                  {"radius_factor", c.lasso.radius_factor}};
  } else {
    j["mc"] = {{"m1", c.mc.m1},         {"m2", c.mc.m2},       {"rank", c.mc.rank},
               {"train_fraction", c.mc.train_fraction}, {"noise", c.mc.noise},
               {"loss_scale", c.mc.loss_scale},         {"radius_factor", c.mc.radius_factor}};
  }
  return j;
}

}  // namespace defw::harness
