#pragma once

// Metrics, the end-to-end experiment pipeline, and report/plot writers.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "utopia/aggregate.hpp"
#include "utopia/baselines.hpp"
#include "utopia/calibration.hpp"
#include "utopia/config.hpp"
#include "utopia/csv.hpp"
#include "utopia/estimators.hpp"
#include "utopia/model.hpp"
#include "utopia/synthetic.hpp"

namespace utopia {

//------------------------------------------------------------------------------
// Metrics

/// Fraction of test points inside the band, endpoints included.
template <IntervalBand B>
double coverage(const B& band, const Dataset& test) {
  if (test.empty()) throw std::invalid_argument("coverage: empty test set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (predict_interval(band, test.point(i)).contains(test.response(i))) ++hit;
  return static_cast<double>(hit) / static_cast<double>(test.size());
}

template <IntervalBand B>
double average_width(const B& band, const Dataset& test) {
  if (test.empty()) throw std::invalid_argument("average_width: empty test set");
  double sum = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) sum += predict_interval(band, test.point(i)).width();
  return sum / static_cast<double>(test.size());
}

using AnyBand = std::variant<BandModel, LowerUpperBand, ConformalBand>;

inline PredictionInterval predict_interval(const AnyBand& b, Point x) {
  return std::visit([&](const auto& band) { return predict_interval(band, x); }, b);
}

//------------------------------------------------------------------------------
// Reports

struct EvalRow {
  std::string method;
  double coverage = 0.0;
  double avg_width = 0.0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  double ms = 0.0;
  std::string error;  // empty on success; not part of the CSV

  bool ok() const { return error.empty(); }
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

inline constexpr const char* kReportHeader = "method,coverage,avg_width,n_test,seed,ms";

/// Failed methods are written with nan metrics.
inline void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << kReportHeader << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : report.rows) {
    out << r.method << ',' << format_double(r.ok() ? r.coverage : nan) << ',' << format_double(r.ok() ? r.avg_width : nan)
        << ',' << r.n_test << ',' << r.seed << ',' << format_double(r.ms) << '\n';
  }
}

inline void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_report_csv(report, out);
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

inline EvalReport read_report_csv(std::istream& in, const std::string& name = "report") {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportHeader) throw std::runtime_error(name + ": expected header " + std::string(kReportHeader));
  EvalReport rep;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw std::runtime_error(name + " line " + std::to_string(lineno) + ": expected 6 fields");
    EvalRow r;
    r.method = f[0];
    r.coverage = parse_double(f[1], lineno);
    r.avg_width = parse_double(f[2], lineno);
    r.n_test = static_cast<std::size_t>(parse_double(f[3], lineno));
    r.seed = static_cast<std::uint64_t>(std::stoull(f[4]));
    r.ms = parse_double(f[5], lineno);
    if (std::isnan(r.coverage) || std::isnan(r.avg_width)) r.error = "failed";
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

struct MethodSummary {
  std::string method;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double coverage_mean = 0.0;
  double coverage_sd = 0.0;
  double width_mean = 0.0;
  double width_sd = 0.0;
};

/// Per-method mean and sample standard deviation over successful rows, in
/// order of first appearance.
inline std::vector<MethodSummary> summarize(const EvalReport& report) {
  std::vector<MethodSummary> out;
  std::map<std::string, std::vector<const EvalRow*>> groups;
  for (const auto& r : report.rows) {
    if (!groups.count(r.method)) out.push_back({r.method});
    groups[r.method].push_back(&r);
  }
  for (auto& s : out) {
    std::vector<double> cov, wid;
    for (const auto* r : groups[s.method]) {
      ++s.runs;
      if (!r->ok()) {
        ++s.failures;
        continue;
      }
      cov.push_back(r->coverage);
      wid.push_back(r->avg_width);
    }
    auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
      if (v.empty()) {
        mean = sd = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    };
    stats(cov, s.coverage_mean, s.coverage_sd);
    stats(wid, s.width_mean, s.width_sd);
  }
  return out;
}

//------------------------------------------------------------------------------
// SVG

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace svg_detail

/// Test scatter, band midpoint curve and band polygon against a scalar index
/// of x (x itself for d = 1). Infinite band edges are clipped to the frame.
template <IntervalBand B>
void render_svg_band(const B& band, const Dataset& test, std::ostream& out,
                     const std::function<double(Point)>& index = {}, const std::string& title = "") {
  using svg_detail::num;
  if (test.empty()) throw std::invalid_argument("render_svg_band: empty test set");
  const auto idx = index ? index : [](Point x) { return x[0]; };
  struct Row {
    double t, y, lo, hi;
  };
  std::vector<Row> rows;
  rows.reserve(test.size());
  double ymin = kInf, ymax = -kInf;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto iv = predict_interval(band, test.point(i));
    rows.push_back({idx(test.point(i)), test.response(i), iv.lo, iv.hi});
    ymin = std::min(ymin, test.response(i));
    ymax = std::max(ymax, test.response(i));
    if (std::isfinite(iv.lo)) ymin = std::min(ymin, iv.lo);
    if (std::isfinite(iv.hi)) ymax = std::max(ymax, iv.hi);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
  const double tmin = rows.front().t, tmax = rows.back().t;
  const double tspan = tmax > tmin ? tmax - tmin : 1.0;
  const double pad = ymax > ymin ? 0.05 * (ymax - ymin) : 1.0;
  ymin -= pad;
  ymax += pad;
  const double W = 800, H = 600, L = 60, R = 20, T = 40, Bm = 50;
  auto px = [&](double t) { return L + (t - tmin) / tspan * (W - L - R); };
  auto py = [&](double y) { return T + (ymax - std::clamp(y, ymin, ymax)) / (ymax - ymin) * (H - T - Bm); };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  if (!title.empty()) out << "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  out << "<line x1=\"" << num(L) << "\" y1=\"" << num(H - Bm) << "\" x2=\"" << num(W - R) << "\" y2=\"" << num(H - Bm)
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << num(L) << "\" y1=\"" << num(T) << "\" x2=\"" << num(L) << "\" y2=\"" << num(H - Bm)
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << num(L) << "\" y=\"" << num(H - Bm + 18) << "\" font-size=\"12\">" << num(tmin) << "</text>\n"
      << "<text x=\"" << num(W - R) << "\" y=\"" << num(H - Bm + 18) << "\" font-size=\"12\" text-anchor=\"end\">"
      << num(tmax) << "</text>\n"
      << "<text x=\"" << num(L - 6) << "\" y=\"" << num(T + 4) << "\" font-size=\"12\" text-anchor=\"end\">" << num(ymax)
      << "</text>\n"
      << "<text x=\"" << num(L - 6) << "\" y=\"" << num(H - Bm) << "\" font-size=\"12\" text-anchor=\"end\">" << num(ymin)
      << "</text>\n";

  out << "<polygon class=\"band\" fill=\"steelblue\" fill-opacity=\"0.3\" stroke=\"steelblue\" points=\"";
  for (const auto& r : rows) out << num(px(r.t)) << ',' << num(py(r.hi)) << ' ';
  for (auto it = rows.rbegin(); it != rows.rend(); ++it) out << num(px(it->t)) << ',' << num(py(it->lo)) << ' ';
  out << "\"/>\n";

  out << "<polyline class=\"mean\" fill=\"none\" stroke=\"firebrick\" stroke-width=\"2\" points=\"";
  for (const auto& r : rows) {
    const double mid = std::isfinite(r.lo) && std::isfinite(r.hi) ? 0.5 * (r.lo + r.hi) : r.y;
    out << num(px(r.t)) << ',' << num(py(mid)) << ' ';
  }
  out << "\"/>\n";

  out << "<g class=\"points\" fill=\"black\">\n";
  for (const auto& r : rows) out << "<circle cx=\"" << num(px(r.t)) << "\" cy=\"" << num(py(r.y)) << "\" r=\"2\"/>\n";
  out << "</g>\n</svg>\n";
}

template <IntervalBand B>
void render_svg_band(const B& band, const Dataset& test, const std::string& path,
                     const std::function<double(Point)>& index = {}, const std::string& title = "") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  render_svg_band(band, test, out, index, title);
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

//------------------------------------------------------------------------------
// Pipeline

/// Worker count from UTOPIA_THREADS (unset or 0: hardware concurrency).
inline unsigned resolve_threads() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("UTOPIA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return hw;
}

/// Runs fn(0..n-1) on up to `threads` workers; results must be written to
/// per-index slots by the caller.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
    });
  for (auto& t : pool) t.join();
}

struct MethodOutcome {
  Method method = Method::utopia_two_step;
  std::optional<AnyBand> band;  // calibrated
  std::optional<CalibrationResult> calibration;
  double aggregation_objective = std::numeric_limits<double>::quiet_NaN();
  EvalRow row;
};

struct ExperimentResult {
  EvalReport report;
  SplitParts parts;
  std::optional<SetupSpec> setup;
  std::vector<MethodOutcome> outcomes;

  const MethodOutcome* find(Method m) const {
    for (const auto& o : outcomes)
      if (o.method == m) return &o;
    return nullptr;
  }
};

/// Generated (or loaded) data for a config, before splitting.
inline Dataset load_experiment_data(const ExperimentConfig& cfg) {
  if (const auto setup = cfg.setup()) return generate(*setup, cfg.sample_size(), cfg.seed);
  Dataset ds = read_dataset_csv(cfg.source);
  if (ds.size() != cfg.split.total())
    throw ConfigError("split: sums to " + std::to_string(cfg.split.total()) + " but " + cfg.source + " has " +
                      std::to_string(ds.size()) + " rows");
  return ds;
}

namespace eval_detail {

/// Mean and width candidates fitted once on the pre-training split.
struct Fitted {
  std::optional<CandidateFunction> mean;
  std::vector<CandidateFunction> widths;
  std::string error;
};

inline Fitted fit_candidates(const ExperimentConfig& cfg, const std::optional<SetupSpec>& setup, const Dataset& pre,
                             unsigned threads) {
  Fitted out;
  try {
    const bool oracle = std::holds_alternative<MeanOracle>(cfg.mean) ||
                        (std::holds_alternative<MeanAuto>(cfg.mean) && setup && setup->base() == 1);
    if (oracle) {
      out.mean = oracle_mean_candidate(*setup);
    } else {
      const RidgeMeanSpec r = std::holds_alternative<RidgeMeanSpec>(cfg.mean) ? std::get<RidgeMeanSpec>(cfg.mean) : RidgeMeanSpec{};
      out.mean = fit_mean_ridge(pre, r.degree, r.lambda);
    }
    std::vector<std::optional<CandidateFunction>> slots(cfg.candidates.size());
    std::vector<std::string> errors(cfg.candidates.size());
    parallel_for(cfg.candidates.size(), threads, [&](std::size_t j) {
      try {
        slots[j] = fit_width_candidate(cfg.candidates[j], pre, *out.mean);
      } catch (const std::exception& e) {
        errors[j] = "candidate " + std::to_string(j) + ": " + e.what();
      }
    });
    for (std::size_t j = 0; j < slots.size(); ++j) {
      if (!errors[j].empty()) throw std::runtime_error(errors[j]);
      out.widths.push_back(*slots[j]);
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace eval_detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  using clock = std::chrono::steady_clock;
  ExperimentResult res;
  res.setup = cfg.setup();
  const Dataset data = load_experiment_data(cfg);
  RngState split_rng = RngState(cfg.seed).split();
  res.parts = split_dataset(data, cfg.split, split_rng, !cfg.shuffle);
  const auto& parts = res.parts;
  const unsigned threads = resolve_threads();

  const bool needs_candidates = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) {
    return m == Method::utopia_one_step || m == Method::utopia_two_step || m == Method::sdp;
  });
  const auto t_fit = clock::now();
  eval_detail::Fitted fitted;
  if (needs_candidates) fitted = eval_detail::fit_candidates(cfg, res.setup, parts.pre, threads);
  const double fit_ms = std::chrono::duration<double, std::milli>(clock::now() - t_fit).count();
  const Dataset train_all = Dataset::concat(Dataset::concat(parts.pre, parts.opt), parts.adj);

  res.outcomes.resize(cfg.methods.size());
  parallel_for(cfg.methods.size(), threads, [&](std::size_t k) {
    MethodOutcome& o = res.outcomes[k];
    o.method = cfg.methods[k];
    o.row.method = to_string(o.method);
    o.row.n_test = parts.test.size();
    o.row.seed = cfg.seed;
    const auto t0 = clock::now();
    try {
      auto calibrate = [&](BandModel b, double delta) {
        o.calibration = calibrate_lambda(b, parts.adj, cfg.alpha, delta, cfg.use_selection);
        return calibrated(std::move(b), *o.calibration, delta);
      };
      auto need_fit = [&] {
        if (!fitted.error.empty()) throw std::runtime_error("candidate fitting failed: " + fitted.error);
      };
      switch (o.method) {
        case Method::utopia_two_step: {
          need_fit();
          auto agg = aggregate_two_step(fitted.widths, *fitted.mean, parts.opt, cfg.delta);
          o.aggregation_objective = agg.objective;
          o.band = calibrate(std::move(agg.band), cfg.delta);
          break;
        }
        case Method::utopia_one_step: {
          need_fit();
          auto agg = aggregate_one_step(fitted.widths, {*fitted.mean, make_constant(1.0, CandidateRole::mean)},
                                        parts.opt, cfg.delta);
          o.aggregation_objective = agg.objective;
          o.band = calibrate(std::move(agg.band), cfg.delta);
          break;
        }
        case Method::lqr:
          o.band = fit_lqr(train_all, std::max(cfg.alpha, 1e-12));
          break;
        case Method::splitcf: {
          const int degree = std::holds_alternative<RidgeMeanSpec>(cfg.mean) ? std::get<RidgeMeanSpec>(cfg.mean).degree : 4;
          o.band = fit_split_conformal(train_all, std::max(cfg.alpha, 1e-12), degree);
          break;
        }
        case Method::sdp: {
          need_fit();
          o.band = calibrate(fit_kernel_sdp(parts.opt, *fitted.mean, cfg.sdp), cfg.sdp.delta);
          break;
        }
      }
      o.row.coverage = coverage(*o.band, parts.test);
      o.row.avg_width = average_width(*o.band, parts.test);
    } catch (const std::exception& e) {
      o.band.reset();
      o.row.error = e.what();
    }
    double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    if (o.method != Method::lqr && o.method != Method::splitcf) ms += fit_ms;
    o.row.ms = cfg.record_time ? std::round(ms) : 0.0;
  });
  for (const auto& o : res.outcomes) res.report.rows.push_back(o.row);
  return res;
}

/// Scalar plotting index for a setup: x for d = 1, x^T beta for the mv designs.
inline std::function<double(Point)> plot_index(const std::optional<SetupSpec>& setup) {
  if (setup && setup->multivariate()) return [s = *setup](Point x) { return design_index(s, x); };
  return [](Point x) { return x[0]; };
}

}  // namespace utopia
