#pragma once

// Experiment configuration: a flat TOML-style text format
//
//   # comment
//   [algorithm]
//   name = "proposed"
//   eta = 1
//   batch = "full"
//   [sweep]
//   eta = [0.02, 0.2, 1]
//
// or the JSON sidecar written next to every trace, so a run can be replayed
// from its own output.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compofed/algorithm.hpp"
#include "compofed/datagen.hpp"
#include "compofed/dataset_io.hpp"
#include "compofed/prox.hpp"

namespace compofed::harness {

namespace fs = std::filesystem;
using nlohmann::json;

/// Configuration problems (bad keys, bad values, unreadable files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Algorithm { Proposed, FedMid, FedDA, FastFedDA };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Proposed: return "proposed";
    case Algorithm::FedMid: return "fedmid";
    case Algorithm::FedDA: return "fedda";
    case Algorithm::FastFedDA: return "fastfedda";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(const std::string& name) {
  if (name == "proposed") return Algorithm::Proposed;
  if (name == "fedmid") return Algorithm::FedMid;
  if (name == "fedda") return Algorithm::FedDA;
  if (name == "fastfedda") return Algorithm::FastFedDA;
  throw ConfigError("unknown algorithm '" + name + "' (expected proposed|fedmid|fedda|fastfedda)");
}

struct RegularizerSpec {
  std::string kind = "l1";  // l1 | ball | box | zero
  double l1 = 1e-4;
  double radius = 1.0;      // ball centred at the origin
  double lower = -1.0;      // box [lower, upper]^d
  double upper = 1.0;
};

inline Regularizer build_regularizer(const RegularizerSpec& spec, Eigen::Index dim) {
  if (spec.kind == "l1") return make_l1(spec.l1);
  if (spec.kind == "ball") return make_ball(spec.radius, Vector::Zero(dim));
  if (spec.kind == "box") return make_box(Vector::Constant(dim, spec.lower), Vector::Constant(dim, spec.upper));
  if (spec.kind == "zero") return Zero{};
  throw ConfigError("unknown regularizer '" + spec.kind + "' (expected l1|ball|box|zero)");
}

/// Generator defaults: the heterogeneous regime (alpha, beta) = (10, 10),
/// n = 30 workers with m = 2000 samples of dimension 60.
inline GenSpec default_gen_spec() {
  return GenSpec{10.0, 10.0, 30, 2000, 60, 1, true};
}

struct ExperimentConfig {
  GenSpec gen = default_gen_spec();
  /// When set, data are loaded from this directory instead of generated.
  std::optional<fs::path> data_dir;
  double l2 = 0.01;
  RegularizerSpec reg;
  std::vector<Algorithm> algorithms{Algorithm::Proposed};
  HyperParams hyper{500, 5, 1.0, 1.0, std::nullopt, 1};
  std::vector<double> sweep_eta;
  std::vector<std::size_t> sweep_tau;
  /// 0 stands for full gradients.
  std::vector<std::size_t> sweep_batch;
  std::vector<std::uint64_t> seeds;
  fs::path out_dir = "out";
  std::optional<fs::path> xstar_file;
  bool lyapunov = true;
  bool timing = true;
  /// Extra suffix for output file names.
  std::string tag;
};

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.data_dir && !fs::is_directory(*cfg.data_dir)) {
    throw ConfigError("dataset directory not found: " + cfg.data_dir->string());
  }
  if (!cfg.data_dir) validate(cfg.gen);
  if (cfg.xstar_file && !fs::exists(*cfg.xstar_file)) {
    throw ConfigError("reference solution file not found: " + cfg.xstar_file->string());
  }
  require(cfg.l2 >= 0.0, "l2 must be nonnegative");
  require(!cfg.algorithms.empty(), "no algorithm selected");
  validate(cfg.hyper);
  for (double eta : cfg.sweep_eta) require(eta > 0.0, "sweep eta values must be positive");
  for (std::size_t tau : cfg.sweep_tau) require(tau >= 1, "sweep tau values must be >= 1");
}

// -- text format ------------------------------------------------------------

namespace detail {

inline std::string trim(std::string s) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  return s;
}

inline std::string unquote(std::string s) {
  s = trim(std::move(s));
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

inline std::vector<std::string> parse_list(const std::string& key, std::string value) {
  value = trim(std::move(value));
  if (value.size() < 2 || value.front() != '[' || value.back() != ']') {
    throw ConfigError("key '" + key + "' expects a list like [a, b, c]");
  }
  std::vector<std::string> items;
  std::istringstream in(value.substr(1, value.size() - 2));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = unquote(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() != '-') {
      const unsigned long long x = std::stoull(v, &used);
      if (used == v.size()) return x;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "' expects a nonnegative integer, got '" + v + "'");
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "' expects true or false, got '" + v + "'");
}

/// "full" or 0 mean full gradients.
inline std::size_t to_batch(const std::string& key, const std::string& v) {
  return v == "full" ? 0 : static_cast<std::size_t>(to_uint(key, v));
}

}  // namespace detail

inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = unquote(raw);
  if (key == "data.dir") cfg.data_dir = fs::path(v);
  else if (key == "data.alpha") cfg.gen.alpha = to_double(key, v);
  else if (key == "data.beta") cfg.gen.beta = to_double(key, v);
  else if (key == "data.n") cfg.gen.n = to_uint(key, v);
  else if (key == "data.m") cfg.gen.m = to_uint(key, v);
  else if (key == "data.d") cfg.gen.d = to_uint(key, v);
  else if (key == "data.seed") cfg.gen.seed = to_uint(key, v);
  else if (key == "data.normalize") cfg.gen.normalize = to_bool(key, v);
  else if (key == "model.l2") cfg.l2 = to_double(key, v);
  else if (key == "model.regularizer") cfg.reg.kind = v;
  else if (key == "model.l1") cfg.reg.l1 = to_double(key, v);
  else if (key == "model.radius") cfg.reg.radius = to_double(key, v);
  else if (key == "model.lower") cfg.reg.lower = to_double(key, v);
  else if (key == "model.upper") cfg.reg.upper = to_double(key, v);
  else if (key == "algorithm.name") {
    cfg.algorithms.clear();
    if (!raw.empty() && trim(raw).front() == '[') {
      for (const auto& a : parse_list(key, raw)) cfg.algorithms.push_back(parse_algorithm(a));
    } else {
      cfg.algorithms.push_back(parse_algorithm(v));
    }
  } else if (key == "algorithm.rounds") cfg.hyper.rounds = to_uint(key, v);
  else if (key == "algorithm.tau") cfg.hyper.tau = to_uint(key, v);
  else if (key == "algorithm.eta") cfg.hyper.eta = to_double(key, v);
  else if (key == "algorithm.eta_g") cfg.hyper.eta_g = to_double(key, v);
  else if (key == "algorithm.batch") {
    const std::size_t b = to_batch(key, v);
    cfg.hyper.batch = b == 0 ? std::nullopt : std::optional<std::size_t>(b);
  } else if (key == "algorithm.seed") cfg.hyper.seed = to_uint(key, v);
  else if (key == "sweep.eta") {
    cfg.sweep_eta.clear();
    for (const auto& x : parse_list(key, raw)) cfg.sweep_eta.push_back(to_double(key, x));
  } else if (key == "sweep.tau") {
    cfg.sweep_tau.clear();
    for (const auto& x : parse_list(key, raw)) cfg.sweep_tau.push_back(to_uint(key, x));
  } else if (key == "sweep.batch") {
    cfg.sweep_batch.clear();
    for (const auto& x : parse_list(key, raw)) cfg.sweep_batch.push_back(to_batch(key, x));
  } else if (key == "sweep.seeds") {
    cfg.seeds.clear();
    for (const auto& x : parse_list(key, raw)) cfg.seeds.push_back(to_uint(key, x));
  } else if (key == "output.dir") cfg.out_dir = fs::path(v);
  else if (key == "output.xstar") cfg.xstar_file = fs::path(v);
  else if (key == "output.lyapunov") cfg.lyapunov = to_bool(key, v);
  else if (key == "output.timing") cfg.timing = to_bool(key, v);
  else if (key == "output.tag") cfg.tag = v;
  else throw ConfigError("unknown configuration key '" + key + "'");
}

inline ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig cfg = {}) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string full = section.empty() ? key : section + "." + key;
    apply_setting(cfg, full, line.substr(eq + 1));
  }
  return cfg;
}

// -- JSON (sidecar) -------------------------------------------------------------

inline json to_json(const ExperimentConfig& cfg) {
  json j;
  j["data"] = compofed::to_json(cfg.gen);
  j["data"]["dir"] = cfg.data_dir ? json(cfg.data_dir->string()) : json(nullptr);
  j["model"] = {{"l2", cfg.l2},
                {"regularizer", cfg.reg.kind},
                {"l1", cfg.reg.l1},
                {"radius", cfg.reg.radius},
                {"lower", cfg.reg.lower},
                {"upper", cfg.reg.upper}};
  json algos = json::array();
  for (auto a : cfg.algorithms) algos.push_back(to_string(a));
  j["algorithm"] = {{"name", algos},
                    {"rounds", cfg.hyper.rounds},
                    {"tau", cfg.hyper.tau},
                    {"eta", cfg.hyper.eta},
                    {"eta_g", cfg.hyper.eta_g},
                    {"eta_tilde", cfg.hyper.eta_tilde()},
                    {"batch", cfg.hyper.batch ? json(*cfg.hyper.batch) : json("full")},
                    {"seed", cfg.hyper.seed}};
  json batches = json::array();
  for (auto b : cfg.sweep_batch) batches.push_back(b == 0 ? json("full") : json(b));
  j["sweep"] = {{"eta", cfg.sweep_eta}, {"tau", cfg.sweep_tau}, {"batch", batches}, {"seeds", cfg.seeds}};
  j["output"] = {{"dir", cfg.out_dir.string()},
                 {"xstar", cfg.xstar_file ? json(cfg.xstar_file->string()) : json(nullptr)},
                 {"lyapunov", cfg.lyapunov},
                 {"timing", cfg.timing},
                 {"tag", cfg.tag}};
  return j;
}

inline ExperimentConfig from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    const auto& d = j.at("data");
    cfg.gen = GenSpec{d.at("alpha").get<double>(), d.at("beta").get<double>(),  d.at("n").get<std::size_t>(),
                      d.at("m").get<std::size_t>(),  d.at("d").get<std::size_t>(),   d.at("seed").get<std::uint64_t>(),
                      d.at("normalize").get<bool>()};
    if (!d.at("dir").is_null()) cfg.data_dir = fs::path(d.at("dir").get<std::string>());
    const auto& m = j.at("model");
    cfg.l2 = m.at("l2").get<double>();
    cfg.reg = RegularizerSpec{m.at("regularizer").get<std::string>(), m.at("l1").get<double>(),
                              m.at("radius").get<double>(), m.at("lower").get<double>(), m.at("upper").get<double>()};
    const auto& a = j.at("algorithm");
    cfg.algorithms.clear();
    for (const auto& name : a.at("name")) cfg.algorithms.push_back(parse_algorithm(name.get<std::string>()));
    cfg.hyper.rounds = a.at("rounds").get<std::size_t>();
    cfg.hyper.tau = a.at("tau").get<std::size_t>();
    cfg.hyper.eta = a.at("eta").get<double>();
    cfg.hyper.eta_g = a.at("eta_g").get<double>();
    const auto& b = a.at("batch");
    cfg.hyper.batch = b.is_string() ? std::nullopt : std::optional<std::size_t>(b.get<std::size_t>());
    cfg.hyper.seed = a.at("seed").get<std::uint64_t>();
    const auto& s = j.at("sweep");
    cfg.sweep_eta = s.at("eta").get<std::vector<double>>();
    cfg.sweep_tau = s.at("tau").get<std::vector<std::size_t>>();
    for (const auto& x : s.at("batch")) cfg.sweep_batch.push_back(x.is_string() ? 0 : x.get<std::size_t>());
    cfg.seeds = s.at("seeds").get<std::vector<std::uint64_t>>();
    const auto& o = j.at("output");
    cfg.out_dir = o.at("dir").get<std::string>();
    if (!o.at("xstar").is_null()) cfg.xstar_file = fs::path(o.at("xstar").get<std::string>());
    cfg.lyapunov = o.at("lyapunov").get<bool>();
    cfg.timing = o.at("timing").get<bool>();
    cfg.tag = o.value("tag", "");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON configuration: ") + e.what());
  }
  return cfg;
}

/// Reads a text config, a bare JSON config, or a trace sidecar (which holds
/// the resolved config under "config").
inline ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (path.extension() == ".json") {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
    return from_json(j.contains("config") ? j.at("config") : j);
  }
  return parse_config_text(text);
}

}  // namespace compofed::harness
