#pragma once

// Experiment configuration: strict JSON in, canonical JSON out.
//
// {
//   "source": "setup1",            // setup1..3, mv1..3, or a CSV path
//   "n": 2200,                     // optional; defaults to the split total
//   "seed": 1,
//   "alpha": 0.05,
//   "delta": 0.0,
//   "split": {"pre": 1000, "opt": 100, "adj": 100, "test": 1000},
//   "shuffle": true,
//   "mean": "auto",                // "auto" | "oracle" | {"type": "ridge", "degree": 4, "lambda": 1e-6}
//   "candidates": [{"type": "quantile", "tau": 0.6, "degree": 4}, {"type": "kernel"}, {"type": "constant", "c": 1}],
//   "methods": ["utopia-two-step", "utopia-one-step", "lqr", "splitcf"],
//   "use_selection": true,
//   "sdp": {"sigma": null, "trace_budget": null, "rank": 10, "delta": 0.0},
//   "synthetic": {"laplace_mean_centered": false, "laplace_std_scale": false},
//   "record_time": false,
//   "output": {"csv": null, "svg": null, "svg_method": "utopia-two-step"}
// }

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "utopia/baselines.hpp"
#include "utopia/estimators.hpp"
#include "utopia/model.hpp"
#include "utopia/synthetic.hpp"

namespace utopia {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Method { utopia_one_step, utopia_two_step, lqr, splitcf, sdp };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::utopia_one_step: return "utopia-one-step";
    case Method::utopia_two_step: return "utopia-two-step";
    case Method::lqr: return "lqr";
    case Method::splitcf: return "splitcf";
    case Method::sdp: return "sdp";
  }
  return "?";
}

/// "utopia" is accepted as an alias for the two-step variant.
inline std::optional<Method> parse_method(const std::string& s) {
  if (s == "utopia" || s == "utopia-two-step") return Method::utopia_two_step;
  if (s == "utopia-one-step") return Method::utopia_one_step;
  if (s == "lqr") return Method::lqr;
  if (s == "splitcf") return Method::splitcf;
  if (s == "sdp") return Method::sdp;
  return std::nullopt;
}

struct MeanAuto {
  friend bool operator==(const MeanAuto&, const MeanAuto&) = default;
};
struct MeanOracle {
  friend bool operator==(const MeanOracle&, const MeanOracle&) = default;
};
using MeanChoice = std::variant<MeanAuto, MeanOracle, RidgeMeanSpec>;

struct ExperimentConfig {
  std::string source = "setup1";
  std::optional<std::size_t> n;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  double delta = 0.0;
  SplitPlan split{1000, 100, 100, 1000};
  bool shuffle = true;
  MeanChoice mean = MeanAuto{};
  std::vector<EstimatorSpec> candidates = default_width_menu();
  std::vector<Method> methods{Method::utopia_two_step, Method::utopia_one_step, Method::lqr, Method::splitcf};
  bool use_selection = true;
  SdpParams sdp;
  bool laplace_mean_centered = false;
  bool laplace_std_scale = false;
  bool record_time = false;
  std::optional<std::string> out_csv;
  std::optional<std::string> out_svg;
  Method svg_method = Method::utopia_two_step;

  /// Synthetic design named by `source`, if any.
  std::optional<SetupSpec> setup() const {
    try {
      SetupSpec s = SetupSpec::of(parse_setup_id(source));
      s.laplace_mean_centered = laplace_mean_centered;
      s.laplace_std_scale = laplace_std_scale;
      return s;
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
  }

  std::size_t sample_size() const { return n.value_or(split.total()); }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Split sizes used when a config names a setup but no split: 1000/100/100/1000
/// for the univariate designs and 1000/900/100/1000 for the multivariate ones.
inline SplitPlan default_split(const std::optional<SetupSpec>& s) {
  if (s && s->multivariate()) return {1000, 900, 100, 1000};
  return {1000, 100, 100, 1000};
}

namespace config_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(path, "must be finite");
  return d;
}

inline std::uint64_t get_count(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) fail(path, "must be >= 0");
  fail(path, "expected a nonnegative integer");
}

inline int get_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  const auto i = v.get<std::int64_t>();
  if (i < 0 || i > 64) fail(path, "must lie in [0, 64]");
  return static_cast<int>(i);
}

inline bool get_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(path, "expected true or false");
  return v.get<bool>();
}

inline std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

inline std::optional<double> get_optional_positive(const json& v, const std::string& path) {
  if (v.is_null()) return std::nullopt;
  const double d = get_number(v, path);
  if (!(d > 0.0)) fail(path, "must be > 0");
  return d;
}

inline std::optional<std::string> get_optional_string(const json& v, const std::string& path) {
  if (v.is_null()) return std::nullopt;
  return get_string(v, path);
}

inline EstimatorSpec parse_candidate(const json& v, const std::string& path) {
  if (!v.is_object() || !v.contains("type")) fail(path, "expected an object with a \"type\"");
  const std::string type = get_string(v["type"], path + ".type");
  if (type == "quantile") {
    check_keys(v, path, {"type", "tau", "degree"});
    QuantileSpec s;
    if (v.contains("tau")) s.tau = get_number(v["tau"], path + ".tau");
    if (v.contains("degree")) s.degree = get_int(v["degree"], path + ".degree");
    if (!(s.tau > 0.0 && s.tau < 1.0)) fail(path + ".tau", "must lie in (0, 1)");
    return s;
  }
  if (type == "kernel") {
    check_keys(v, path, {"type", "bandwidth"});
    KernelSecondMomentSpec s;
    if (v.contains("bandwidth")) s.bandwidth = get_optional_positive(v["bandwidth"], path + ".bandwidth");
    return s;
  }
  if (type == "constant") {
    check_keys(v, path, {"type", "c"});
    ConstantSpec s;
    if (v.contains("c")) s.c = get_number(v["c"], path + ".c");
    if (!(s.c >= 0.0)) fail(path + ".c", "must be >= 0");
    return s;
  }
  fail(path + ".type", "expected \"quantile\", \"kernel\" or \"constant\"");
}

inline json candidate_to_json(const EstimatorSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, QuantileSpec>) return {{"type", "quantile"}, {"tau", s.tau}, {"degree", s.degree}};
        else if constexpr (std::is_same_v<T, KernelSecondMomentSpec>)
          return {{"type", "kernel"}, {"bandwidth", s.bandwidth ? json(*s.bandwidth) : json(nullptr)}};
        else if constexpr (std::is_same_v<T, ConstantSpec>) return {{"type", "constant"}, {"c", s.c}};
        else return {{"type", "ridge"}, {"degree", s.degree}, {"lambda", s.lambda}};
      },
      spec);
}

inline MeanChoice parse_mean(const json& v, const std::string& path) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "auto") return MeanAuto{};
    if (s == "oracle") return MeanOracle{};
    fail(path, "expected \"auto\", \"oracle\" or a ridge object");
  }
  check_keys(v, path, {"type", "degree", "lambda"});
  if (!v.contains("type") || get_string(v["type"], path + ".type") != "ridge") fail(path + ".type", "expected \"ridge\"");
  RidgeMeanSpec r;
  if (v.contains("degree")) r.degree = get_int(v["degree"], path + ".degree");
  if (v.contains("lambda")) r.lambda = get_number(v["lambda"], path + ".lambda");
  if (!(r.lambda >= 0.0)) fail(path + ".lambda", "must be >= 0");
  return r;
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const std::string& text) {
  using namespace config_detail;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(doc, "", {"source", "n", "seed", "alpha", "delta", "split", "shuffle", "mean", "candidates", "methods",
                       "use_selection", "sdp", "synthetic", "record_time", "output"});
  ExperimentConfig c;
  if (doc.contains("source")) c.source = get_string(doc["source"], "source");
  if (c.source.empty()) fail("source", "must not be empty");
  if (doc.contains("synthetic")) {
    const auto& s = doc["synthetic"];
    check_keys(s, "synthetic", {"laplace_mean_centered", "laplace_std_scale"});
    if (s.contains("laplace_mean_centered"))
      c.laplace_mean_centered = get_bool(s["laplace_mean_centered"], "synthetic.laplace_mean_centered");
    if (s.contains("laplace_std_scale")) c.laplace_std_scale = get_bool(s["laplace_std_scale"], "synthetic.laplace_std_scale");
  }
  const auto setup = c.setup();
  c.split = default_split(setup);
  if (doc.contains("split")) {
    const auto& s = doc["split"];
    check_keys(s, "split", {"pre", "opt", "adj", "test"});
    for (const char* key : {"pre", "opt", "adj", "test"})
      if (!s.contains(key)) fail(join("split", key), "required");
    c.split = {get_count(s["pre"], "split.pre"), get_count(s["opt"], "split.opt"), get_count(s["adj"], "split.adj"),
               get_count(s["test"], "split.test")};
  } else if (!setup) {
    fail("split", "required for CSV sources");
  }
  if (c.split.n_pre == 0) fail("split.pre", "must be >= 1");
  if (c.split.n_opt == 0) fail("split.opt", "must be >= 1");
  if (c.split.n_adj == 0) fail("split.adj", "must be >= 1");
  if (c.split.n_test == 0) fail("split.test", "must be >= 1");
  if (doc.contains("n")) {
    c.n = get_count(doc["n"], "n");
    if (*c.n != c.split.total())
      fail("n", std::to_string(*c.n) + " does not match the split total " + std::to_string(c.split.total()));
  }
  if (doc.contains("seed")) c.seed = get_count(doc["seed"], "seed");
  if (doc.contains("alpha")) c.alpha = get_number(doc["alpha"], "alpha");
  if (!(c.alpha >= 0.0 && c.alpha < 1.0)) fail("alpha", "must lie in [0, 1)");
  if (doc.contains("delta")) c.delta = get_number(doc["delta"], "delta");
  if (!(c.delta >= 0.0)) fail("delta", "must be >= 0");
  if (doc.contains("shuffle")) c.shuffle = get_bool(doc["shuffle"], "shuffle");
  if (doc.contains("mean")) c.mean = parse_mean(doc["mean"], "mean");
  if (std::holds_alternative<MeanOracle>(c.mean) && !setup) fail("mean", "\"oracle\" needs a synthetic source");
  if (doc.contains("candidates")) {
    const auto& arr = doc["candidates"];
    if (!arr.is_array() || arr.empty()) fail("candidates", "expected a nonempty array");
    c.candidates.clear();
    for (std::size_t i = 0; i < arr.size(); ++i)
      c.candidates.push_back(parse_candidate(arr[i], "candidates[" + std::to_string(i) + "]"));
  }
  if (doc.contains("methods")) {
    const auto& arr = doc["methods"];
    if (!arr.is_array() || arr.empty()) fail("methods", "expected a nonempty array");
    c.methods.clear();
    std::set<Method> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "methods[" + std::to_string(i) + "]";
      const auto m = parse_method(get_string(arr[i], path));
      if (!m) fail(path, "expected one of utopia-one-step, utopia-two-step, utopia, lqr, splitcf, sdp");
      if (!seen.insert(*m).second) fail(path, "duplicate method " + to_string(*m));
      c.methods.push_back(*m);
    }
  }
  if (doc.contains("use_selection")) c.use_selection = get_bool(doc["use_selection"], "use_selection");
  if (doc.contains("sdp")) {
    const auto& s = doc["sdp"];
    check_keys(s, "sdp", {"sigma", "trace_budget", "rank", "delta"});
    if (s.contains("sigma")) c.sdp.sigma = get_optional_positive(s["sigma"], "sdp.sigma");
    if (s.contains("trace_budget")) c.sdp.trace_budget = get_optional_positive(s["trace_budget"], "sdp.trace_budget");
    if (s.contains("rank")) {
      c.sdp.rank = get_count(s["rank"], "sdp.rank");
      if (c.sdp.rank < 1) fail("sdp.rank", "must be >= 1");
    }
    if (s.contains("delta")) c.sdp.delta = get_number(s["delta"], "sdp.delta");
    if (!(c.sdp.delta >= 0.0)) fail("sdp.delta", "must be >= 0");
  }
  if (std::find(c.methods.begin(), c.methods.end(), Method::sdp) != c.methods.end() && c.split.n_opt > kSdpMaxPoints)
    fail("methods", "sdp supports at most " + std::to_string(kSdpMaxPoints) + " optimization points, split.opt is " +
                        std::to_string(c.split.n_opt));
  if (doc.contains("record_time")) c.record_time = get_bool(doc["record_time"], "record_time");
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    check_keys(o, "output", {"csv", "svg", "svg_method"});
    if (o.contains("csv")) c.out_csv = get_optional_string(o["csv"], "output.csv");
    if (o.contains("svg")) c.out_svg = get_optional_string(o["svg"], "output.svg");
    if (o.contains("svg_method")) {
      const auto m = parse_method(get_string(o["svg_method"], "output.svg_method"));
      if (!m) fail("output.svg_method", "unknown method");
      c.svg_method = *m;
    }
  }
  return c;
}

/// Canonical JSON with every default spelled out; parse_config inverts it.
inline std::string serialize_config(const ExperimentConfig& c) {
  using nlohmann::json;
  using config_detail::candidate_to_json;
  json doc;
  doc["source"] = c.source;
  if (c.n) doc["n"] = *c.n;
  doc["seed"] = c.seed;
  doc["alpha"] = c.alpha;
  doc["delta"] = c.delta;
  doc["split"] = {{"pre", c.split.n_pre}, {"opt", c.split.n_opt}, {"adj", c.split.n_adj}, {"test", c.split.n_test}};
  doc["shuffle"] = c.shuffle;
  doc["mean"] = std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MeanAuto>) return "auto";
        else if constexpr (std::is_same_v<T, MeanOracle>) return "oracle";
        else return {{"type", "ridge"}, {"degree", m.degree}, {"lambda", m.lambda}};
      },
      c.mean);
  doc["candidates"] = json::array();
  for (const auto& s : c.candidates) doc["candidates"].push_back(candidate_to_json(s));
  doc["methods"] = json::array();
  for (auto m : c.methods) doc["methods"].push_back(to_string(m));
  doc["use_selection"] = c.use_selection;
  doc["sdp"] = {{"sigma", c.sdp.sigma ? json(*c.sdp.sigma) : json(nullptr)},
                {"trace_budget", c.sdp.trace_budget ? json(*c.sdp.trace_budget) : json(nullptr)},
                {"rank", c.sdp.rank},
                {"delta", c.sdp.delta}};
  doc["synthetic"] = {{"laplace_mean_centered", c.laplace_mean_centered}, {"laplace_std_scale", c.laplace_std_scale}};
  doc["record_time"] = c.record_time;
  doc["output"] = {{"csv", c.out_csv ? json(*c.out_csv) : json(nullptr)},
                   {"svg", c.out_svg ? json(*c.out_svg) : json(nullptr)},
                   {"svg_method", to_string(c.svg_method)}};
  return doc.dump(2) + "\n";
}

}  // namespace utopia
