#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "utopia/eval.hpp"

using namespace utopia;

namespace {

BandModel constant_band(double m, double f, double lambda = 1.0) {
  BandModel b;
  b.mean_candidates = {make_constant(m, CandidateRole::mean)};
  b.mean_weights = {1.0};
  b.width_candidates = {make_constant(f)};
  b.width_weights = {1.0};
  b.lambda = lambda;
  return b;
}

Dataset line_data(const std::vector<double>& y) {
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) x[i] = static_cast<double>(i) / static_cast<double>(y.size());
  return Dataset::from_1d(x, y);
}

const char* kSmall = R"({"source":"setup1","seed":4,"split":{"pre":300,"opt":60,"adj":60,"test":200},
                         "methods":["utopia","splitcf","lqr","utopia-one-step"]})";

}  // namespace

TEST(Coverage, Examples) {
  const auto ds = line_data({0, 0.5, -0.5, 1, -1, 0.9, 0.1, 0.2, -0.3, 1.5});
  EXPECT_DOUBLE_EQ(coverage(constant_band(0, 1), ds), 0.9);

  ConformalBand inf{make_constant(0, CandidateRole::mean), std::numeric_limits<double>::infinity()};
  EXPECT_EQ(coverage(inf, ds), 1.0);

  const auto off = line_data({1, -2, 3, 0.5});
  EXPECT_EQ(coverage(constant_band(0, 4, 0.0), off), 0.0);
  EXPECT_THROW(coverage(constant_band(0, 1), Dataset()), std::invalid_argument);
}

TEST(AverageWidth, Examples) {
  const auto ds = line_data({0, 1, 2});
  EXPECT_DOUBLE_EQ(average_width(constant_band(0, 1), ds), 2.0);
  EXPECT_EQ(average_width(constant_band(0, 1, 0.0), ds), 0.0);

  // Upper edge 2 + 2x: widths 2 and 4 at x = 0 and x = 1.
  LowerUpperBand lu{make_constant(0, CandidateRole::mean),
                    CandidateFunction(BasisExpansion{FeatureMap::polynomial(1, 1), {2.0, 2.0}}, CandidateRole::mean)};
  EXPECT_DOUBLE_EQ(average_width(lu, Dataset::from_1d(std::vector<double>{0, 1}, std::vector<double>{0, 0})), 3.0);
}

TEST(RunExperiment, MetricsMatchBruteForce) {
  const auto res = run_experiment(parse_config(kSmall));
  ASSERT_EQ(res.report.rows.size(), 4u);
  for (const auto& o : res.outcomes) {
    ASSERT_TRUE(o.band.has_value()) << o.row.method << ": " << o.row.error;
    std::size_t hit = 0;
    double width = 0.0;
    for (std::size_t i = 0; i < res.parts.test.size(); ++i) {
      const auto iv = predict_interval(*o.band, res.parts.test.point(i));
      const double y = res.parts.test.response(i);
      if (iv.lo <= y && y <= iv.hi) ++hit;
      width += iv.hi - iv.lo;
    }
    EXPECT_EQ(o.row.coverage, static_cast<double>(hit) / 200.0) << o.row.method;
    EXPECT_EQ(o.row.avg_width, width / 200.0) << o.row.method;
    EXPECT_GE(o.row.coverage, 0.0);
    EXPECT_LE(o.row.coverage, 1.0);
    EXPECT_GE(o.row.avg_width, 0.0);
    EXPECT_EQ(o.row.n_test, 200u);
    EXPECT_EQ(o.row.seed, 4u);
  }
}

TEST(RunExperiment, OneRowPerMethod) {
  const auto res = run_experiment(parse_config(R"({"source":"setup2","seed":2,
      "split":{"pre":200,"opt":50,"adj":50,"test":100},"methods":["utopia","splitcf"]})"));
  ASSERT_EQ(res.report.rows.size(), 2u);
  EXPECT_EQ(res.report.rows[0].method, "utopia-two-step");
  EXPECT_EQ(res.report.rows[1].method, "splitcf");
}

TEST(RunExperiment, MethodErrorsDoNotAbortOthers) {
  const auto res = run_experiment(parse_config(R"({"source":"setup1","seed":2,
      "split":{"pre":200,"opt":40,"adj":50,"test":100},"methods":["sdp","splitcf"],
      "sdp":{"trace_budget":1e-6}})"));
  ASSERT_EQ(res.report.rows.size(), 2u);
  EXPECT_FALSE(res.report.rows[0].ok());
  EXPECT_FALSE(res.outcomes[0].band.has_value());
  EXPECT_TRUE(res.report.rows[1].ok());

  std::ostringstream csv;
  write_report_csv(res.report, csv);
  EXPECT_NE(csv.str().find("sdp,nan,nan,100,2,0\n"), std::string::npos) << csv.str();
}

TEST(RunExperiment, ByteDeterministic) {
  auto once = [] {
    const auto res = run_experiment(parse_config(kSmall));
    std::ostringstream csv, svg;
    write_report_csv(res.report, csv);
    std::visit([&](const auto& b) { render_svg_band(b, res.parts.test, svg, plot_index(res.setup)); },
               *res.find(Method::utopia_two_step)->band);
    return csv.str() + svg.str();
  };
  EXPECT_EQ(once(), once());
}

TEST(ReportCsv, HeaderAndRows) {
  std::ostringstream empty;
  write_report_csv(EvalReport{}, empty);
  EXPECT_EQ(empty.str(), "method,coverage,avg_width,n_test,seed,ms\n");

  EvalReport rep;
  rep.rows.push_back({"utopia-two-step", 0.95, 4.5, 1000, 1, 0.0, ""});
  rep.rows.push_back({"splitcf", 0.94, 6.25, 1000, 1, 12.0, ""});
  std::ostringstream two;
  write_report_csv(rep, two);
  const std::string s = two.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);

  std::istringstream in(s);
  const auto back = read_report_csv(in);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[1].method, "splitcf");
  EXPECT_EQ(back.rows[1].avg_width, 6.25);
  EXPECT_EQ(back.rows[1].ms, 12.0);

  std::istringstream bad("method,coverage\n");
  EXPECT_THROW(read_report_csv(bad), std::runtime_error);
}

TEST(Summarize, MeanAndSampleSd) {
  EvalReport rep;
  rep.rows.push_back({"a", 0.9, 4.0, 10, 1, 0, ""});
  rep.rows.push_back({"b", 0.5, 1.0, 10, 1, 0, ""});
  rep.rows.push_back({"a", 1.0, 6.0, 10, 2, 0, ""});
  rep.rows.push_back({"a", 0.0, 0.0, 10, 3, 0, "boom"});
  const auto s = summarize(rep);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].method, "a");
  EXPECT_EQ(s[0].runs, 3u);
  EXPECT_EQ(s[0].failures, 1u);
  EXPECT_DOUBLE_EQ(s[0].coverage_mean, 0.95);
  EXPECT_DOUBLE_EQ(s[0].width_mean, 5.0);
  EXPECT_DOUBLE_EQ(s[0].width_sd, std::sqrt(2.0));
  EXPECT_EQ(s[1].coverage_sd, 0.0);
}

TEST(RenderSvg, ConstantBandHasConstantVerticalExtent) {
  const auto ds = line_data({0.3, -0.2, 0.8, -0.9, 0.1, 0.0});
  std::ostringstream out;
  render_svg_band(constant_band(0, 1), ds, out);
  const std::string svg = out.str();
  EXPECT_NE(svg.find("viewBox=\"0 0 800 600\""), std::string::npos);

  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, std::regex("class=\"band\"[^>]*points=\"([^\"]*)\"")));
  std::istringstream pts(m[1].str());
  std::vector<double> ys;
  for (std::string tok; pts >> tok;) ys.push_back(std::stod(tok.substr(tok.find(',') + 1)));
  ASSERT_EQ(ys.size(), 12u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(ys[i], ys[0]);
    EXPECT_EQ(ys[6 + i], ys[6]);
  }
  EXPECT_GT(ys[6], ys[0]);  // lower edge sits below the upper edge on screen
  std::size_t circles = 0;
  for (auto p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
  EXPECT_EQ(circles, 6u);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(57);
  parallel_for(hits.size(), 3, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}
