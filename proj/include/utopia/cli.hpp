#pragma once

// Command-line front end. Exit codes: 0 success, 1 method or I/O error,
// 2 usage error (bad flags, missing or invalid config).

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "utopia/utopia.hpp"

namespace utopia {

inline constexpr int kExitOk = 0;
inline constexpr int kExitMethodError = 1;
inline constexpr int kExitUsage = 2;

namespace cli_detail {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline int simulate(const std::string& setup, std::size_t n, std::uint64_t seed, const std::string& out_path,
                    std::ostream& out) {
  if (n < 1) throw UsageError("--n must be >= 1");
  SetupSpec spec;
  try {
    spec = SetupSpec::of(parse_setup_id(setup));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Dataset ds = generate(spec, n, seed);
  if (out_path.empty())
    write_dataset_csv(ds, out);
  else
    write_dataset_csv(ds, out_path);
  return kExitOk;
}

inline int run(const std::string& config_path, std::string out_path, std::string svg_path, std::ostream& out,
               std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config(read_text(config_path));
  } catch (const ConfigError& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  if (out_path.empty() && cfg.out_csv) out_path = *cfg.out_csv;
  if (svg_path.empty() && cfg.out_svg) svg_path = *cfg.out_svg;

  const ExperimentResult res = run_experiment(cfg);
  if (out_path.empty())
    write_report_csv(res.report, out);
  else
    write_report_csv(res.report, out_path);

  int code = kExitOk;
  for (const auto& row : res.report.rows)
    if (!row.ok()) {
      err << row.method << ": " << row.error << '\n';
      code = kExitMethodError;
    }
  if (!svg_path.empty()) {
    const MethodOutcome* o = res.find(cfg.svg_method);
    if (!o || !o->band) {
      err << "svg: no band for " << to_string(cfg.svg_method) << '\n';
      return kExitMethodError;
    }
    std::visit([&](const auto& b) { render_svg_band(b, res.parts.test, svg_path, plot_index(res.setup), o->row.method); },
               *o->band);
  }
  return code;
}

inline int verify(int fixtures, std::ostream& out) {
  bool ok = true;
  for (const auto& r : verify_lemmas(fixtures)) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", r.max_error);
    out << r.name << ": " << (r.passed() ? "PASS" : "FAIL") << " (" << r.fixtures << " fixtures, " << r.failures
        << " failures, max error " << buf << ")\n";
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitMethodError;
}

inline void write_summary_csv(const std::vector<MethodSummary>& rows, std::ostream& out) {
  out << "method,runs,failures,coverage_mean,coverage_sd,width_mean,width_sd\n";
  for (const auto& s : rows)
    out << s.method << ',' << s.runs << ',' << s.failures << ',' << format_double(s.coverage_mean) << ','
        << format_double(s.coverage_sd) << ',' << format_double(s.width_mean) << ',' << format_double(s.width_sd)
        << '\n';
}

inline int report(const std::vector<std::string>& inputs, const std::string& out_path, std::ostream& out) {
  EvalReport all;
  for (const auto& path : inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read report " + path);
    const auto rep = read_report_csv(in, path);
    all.rows.insert(all.rows.end(), rep.rows.begin(), rep.rows.end());
  }
  const auto summary = summarize(all);
  if (out_path.empty()) {
    write_summary_csv(summary, out);
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + out_path + " for writing");
    write_summary_csv(summary, f);
  }
  return kExitOk;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Prediction bands by aggregating width estimators", "utopia"};
  app.require_subcommand(1);

  std::string setup, out_path, svg_path, config_path;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  int fixtures = 50;
  std::vector<std::string> inputs;

  auto* sim = app.add_subcommand("simulate", "Write a synthetic dataset as CSV");
  sim->add_option("--setup", setup, "setup1..setup3, mv1..mv3 (or 1..3)")->required();
  sim->add_option("--n", n, "number of rows")->required();
  sim->add_option("--seed", seed, "RNG seed")->capture_default_str();
  sim->add_option("--out", out_path, "output CSV (default: stdout)");

  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("--config", config_path, "JSON config")->required();
  run->add_option("--out", out_path, "report CSV (default: config output.csv, else stdout)");
  run->add_option("--svg", svg_path, "band plot for output.svg_method");

  auto* lem = app.add_subcommand("verify-lemmas", "Check the population identities on random finite fixtures");
  lem->add_option("--fixtures", fixtures, "fixtures per suite")->capture_default_str()->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("report", "Summarize report CSVs per method");
  rep->add_option("inputs", inputs, "report CSVs")->required();
  rep->add_option("--out", out_path, "summary CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);  // --help
    err << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*sim) return cli_detail::simulate(setup, n, seed, out_path, out);
    if (*run) return cli_detail::run(config_path, out_path, svg_path, out, err);
    if (*lem) return cli_detail::verify(fixtures, out);
    return cli_detail::report(inputs, out_path, out);
  } catch (const cli_detail::UsageError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitMethodError;
  }
}

}  // namespace utopia
