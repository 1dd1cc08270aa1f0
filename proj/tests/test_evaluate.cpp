#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>

#include "doctest.h"
#include "helpers.hpp"

#include "bevcal/calibrate.hpp"
#include "bevcal/metrics.hpp"
#include "bevcal/report.hpp"
#include "bevcal/rng.hpp"
#include "bevcal/svg.hpp"
#include "bevcal/synth.hpp"
#include "oracles.hpp"

using namespace bevcal;
using namespace bevcal::evaluate;

namespace {

bool xml_well_formed(const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / "bevcal_wf.svg";
  std::ofstream(path) << text;
  const std::string cmd = "python3 -c \"import sys, xml.dom.minidom; xml.dom.minidom.parse(sys.argv[1])\" " +
                          path.string() + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  std::filesystem::remove(path);
  return rc == 0;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

bool has_negative_coordinate(const std::string& text) {
  static const std::regex attr(R"re((?:\s(?:x|y|x1|y1|x2|y2|cx|cy|width|height)="(-?[0-9.eE+-]+)"|points="([^"]*)"))re");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), attr); it != std::sregex_iterator(); ++it) {
    const std::string values = (*it)[1].matched ? (*it)[1].str() : (*it)[2].str();
    if (values.find('-') != std::string::npos) return true;
  }
  return false;
}

std::vector<ScoredLabel> random_pairs(Rng& rng, std::size_t n) {
  std::vector<ScoredLabel> out;
  for (std::size_t i = 0; i < n; ++i) {
    double p = rng.uniform();
    if (rng.below(4) == 0) p = std::round(p * 8) / 8;  // duplicates
    out.push_back({p, rng.uniform() < p ? 1 : 0});
  }
  return out;
}

}  // namespace

TEST_CASE("ece hand example") {
  const std::vector<ScoredLabel> pairs{{0.9, 1}, {0.8, 0}, {0.1, 0}, {0.3, 1}};
  const ReliabilityReport r = compute_reliability(pairs, Binning::equal_width, 2);
  CHECK(r.ece == doctest::Approx(0.325).epsilon(1e-15));
  CHECK(r.bins[0].count == 2);
  CHECK(r.bins[0].mean_confidence == doctest::Approx(0.2));
  CHECK(r.bins[1].empirical_frequency == 0.5);
}

TEST_CASE("ece trivial cases") {
  const std::vector<ScoredLabel> balanced{{0.5, 1}, {0.5, 0}, {0.5, 1}, {0.5, 0}};
  CHECK(expected_calibration_error(balanced, Binning::equal_width, 10) == 0.0);
  CHECK(expected_calibration_error(balanced, Binning::equal_size, 10) == 0.0);
  const std::vector<ScoredLabel> one{{1.0, 1}};
  const ReliabilityReport r = compute_reliability(one, Binning::equal_width, 10);
  CHECK(r.ece == 0.0);
  CHECK(r.nll == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(r.nll > 0.0);
}

TEST_CASE("reliability matches the direct definition") {
  Rng rng(314);
  for (int trial = 0; trial < 300; ++trial) {
    const auto pairs = random_pairs(rng, 1 + rng.below(300));
    const int bins = 1 + int(rng.below(20));
    CHECK(std::abs(expected_calibration_error(pairs, Binning::equal_width, bins) -
                   oracle::ece_equal_width(pairs, bins)) <= 1e-12);
    CHECK(std::abs(expected_calibration_error(pairs, Binning::equal_size, bins) -
                   oracle::ece_equal_size(pairs, bins)) <= 1e-12);
    CHECK(std::abs(negative_log_likelihood(pairs) - oracle::nll(pairs)) <= 1e-12);
  }
}

TEST_CASE("weighted and per-instance reliability agree") {
  Rng rng(2);
  const auto pairs = random_pairs(rng, 500);
  std::vector<WeightedScore> weighted;
  for (const ScoredLabel& s : pairs) weighted.push_back({s.p, 1, std::uint64_t(s.label)});
  for (Binning b : {Binning::equal_width, Binning::equal_size}) {
    const ReliabilityReport x = compute_reliability(pairs, b, 15);
    const ReliabilityReport y = compute_reliability(weighted, b, 15);
    CHECK(x.ece == doctest::Approx(y.ece).epsilon(1e-12));
    CHECK(x.nll == doctest::Approx(y.nll).epsilon(1e-12));
  }
}

TEST_CASE("equal-size bins keep duplicates together") {
  std::vector<ScoredLabel> pairs;
  for (int i = 0; i < 6; ++i) pairs.push_back({0.2, i % 2});
  pairs.push_back({0.7, 1});
  pairs.push_back({0.9, 1});
  const ReliabilityReport r = compute_reliability(pairs, Binning::equal_size, 4);
  CHECK(r.bins[0].count == 6);
  CHECK(r.bins[1].count == 0);
  CHECK(r.bins[2].count == 0);
  CHECK(r.bins[3].count == 2);
}

TEST_CASE("regression curve") {
  std::vector<double> q;
  for (int i = 0; i < 10; ++i) q.push_back(0.05 + 0.1 * i);
  CHECK(compute_regression_curve(q).max_deviation() <= 0.05 + 1e-12);
  const std::vector<double> zeros(20, 0.0);
  const RegressionCurve c = compute_regression_curve(zeros);
  CHECK(c.observed[0] == 1.0);
  CHECK(c.observed[100] == 1.0);
}

TEST_CASE("quantile map brings held-out quantiles closer to the diagonal") {
  Rng rng(12);
  std::vector<double> fit;
  std::vector<double> held;
  for (int i = 0; i < 4000; ++i) {
    // overconfident: true spread 1.6x the predicted one
    const double q = 0.5 * std::erfc(-1.6 * rng.normal() / std::sqrt(2.0));
    (i % 2 == 0 ? fit : held).push_back(q);
  }
  const calibrate::QuantileMap map = calibrate::fit_quantile_map(fit);
  std::vector<double> mapped;
  for (double q : held) mapped.push_back(map.apply(q));
  CHECK(compute_regression_curve(mapped).max_deviation() < compute_regression_curve(held).max_deviation());
  CHECK(ks_uniform(mapped) < ks_uniform(held));
}

TEST_CASE("ks distance against uniform") {
  CHECK(ks_uniform(std::vector<double>{0.5}) == 0.5);
  std::vector<double> grid;
  for (int i = 0; i < 100; ++i) grid.push_back((i + 0.5) / 100);
  CHECK(ks_uniform(grid) == doctest::Approx(0.005));
}

TEST_CASE("reliability svg structure") {
  Rng rng(4);
  std::vector<ScoredLabel> pairs;
  for (int i = 0; i < 200; ++i) {
    const double p = rng.uniform(0.0, 0.55);
    pairs.push_back({p, rng.uniform() < p ? 1 : 0});
  }
  const ReliabilityReport r = compute_reliability(pairs, Binning::equal_width, 10);
  const std::string svg = reliability_svg(r, {"presence <test> & more"});
  CHECK(xml_well_formed(svg));
  CHECK(count_of(svg, "class=\"roof\"") == 10);
  std::size_t nonempty = 0;
  for (const ReliabilityBin& b : r.bins) nonempty += b.count > 0 ? 1 : 0;
  CHECK(nonempty < 10);
  CHECK(count_of(svg, "class=\"dot\"") == nonempty);
}

TEST_CASE("log axes clamp zero-probability bins") {
  std::vector<ScoredLabel> pairs;
  for (int i = 0; i < 40; ++i) pairs.push_back({i < 10 ? 0.0 : 1e-6 * i, i == 39 ? 1 : 0});
  const ReliabilityReport r = compute_reliability(pairs, Binning::equal_size, 4);
  ReliabilitySvgOptions opts;
  opts.log_axes = true;
  const std::string svg = reliability_svg(r, opts);
  CHECK(xml_well_formed(svg));
  CHECK_FALSE(has_negative_coordinate(svg));
  CHECK(svg.find("nan") == std::string::npos);
  CHECK(svg.find("inf") == std::string::npos);
  CHECK(reliability_csv(r).find(",1\n") != std::string::npos);
}

TEST_CASE("scene svg") {
  synth::SynthConfig c;
  c.meta = testutil::small_meta(60, 60, 0);
  c.location_noise_cells = 0.0;
  synth::SynthObject o;
  o.object_id = 1;
  o.start_row = 40;
  o.start_col = 30;
  o.peak_intensity = 0.9;
  o.spread_cells = 2.0;
  const FrameRecord f = synth::render_frame(c, {{o}, {}}, "a", "e");
  CHECK(visible_cells(f.grids[0], -5.0) < visible_cells(f.grids[0], -12.0));

  const std::string raster = scene_svg(f, {}, {});
  CHECK(xml_well_formed(raster));
  CHECK(count_of(raster, "class=\"detection\"") == 0);
  CHECK(count_of(raster, "class=\"region\"") == 0);
  CHECK(count_of(raster, "class=\"ego\"") == 1);

  DetectedObject d;
  d.location[0] = testutil::gaussian(40, 30, 4, 1, 3);
  RegionSpec region;
  region.forward_max = 10;
  const std::string full = scene_svg(f, {d}, {region});
  CHECK(xml_well_formed(full));
  CHECK(count_of(full, "class=\"detection\"") == 1);
  CHECK(count_of(full, "class=\"region\"") == 1);

  // Every painted run covers only cells above the floor.
  const ProbGrid below = testutil::grid_from(c.meta, 0, [](int, int) { return std::exp(-12.5); });
  FrameRecord dim = f;
  dim.grids[0] = below;
  CHECK(visible_cells(below, -12.0) == 0);
  CHECK(count_of(scene_svg(dim, {}, {}), "class=\"cell\"") == 0);
}

TEST_CASE("metrics csv round trip") {
  const std::vector<MetricRow> rows{{"ece_presence_f0", "test", "uncal", 0.125},
                                    {"ks_direction_f4", "test", "obj-cal", 1.0 / 3.0},
                                    {"ece_area_f0", "test", "pw-cal", std::nan("")}};
  const std::string text = metrics_csv(rows);
  const auto back = parse_metrics_csv(text);
  REQUIRE(back.size() == 3);
  CHECK(back[1].value == 1.0 / 3.0);
  CHECK(std::isnan(back[2].value));
  CHECK(metrics_csv(back) == text);
}
