#include <cmath>
#include <map>

#include "doctest.h"
#include "helpers.hpp"

#include "bevcal/extract.hpp"
#include "bevcal/rng.hpp"
#include "bevcal/synth.hpp"

using namespace bevcal;
using namespace bevcal::extract;
using testutil::grid_from;
using testutil::small_meta;

namespace {

SamplePoints gaussian_samples(Rng& rng, Point2 mean, double sigma, int n) {
  std::map<Cell, int> counts;
  for (int i = 0; i < n; ++i) {
    const int r = int(std::lround(mean.row + sigma * rng.normal()));
    const int c = int(std::lround(mean.col + sigma * rng.normal()));
    ++counts[{r, c}];
  }
  SamplePoints pts;
  for (const auto& [cell, k] : counts) pts.points.push_back({{double(cell.row), double(cell.col)}, k});
  return pts;
}

bool non_decreasing(const std::vector<double>& ll) {
  for (std::size_t i = 1; i < ll.size(); ++i) {
    if (ll[i] < ll[i - 1] - 1e-9 * std::abs(ll[i - 1])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("multiplicity rounds half away from zero") {
  CHECK(multiplicity(0.01, 100) == 1);
  CHECK(multiplicity(double(0.255F), 100) == 26);
  CHECK(multiplicity(0.254, 100) == 25);
  CHECK(multiplicity(1.0, 100) == 100);
}

TEST_CASE("sample points drop cells below the threshold") {
  const GridMeta m = small_meta(3, 3);
  const ProbGrid g = grid_from(m, 0, [](int r, int c) { return r == 1 && c == 1 ? 0.005 : (r == 0 && c == 0 ? 0.01 : 0.0); });
  const SamplePoints pts = build_sample_points(g, {});
  REQUIRE(pts.points.size() == 1);
  CHECK(pts.points[0].multiplicity == 1);
  CHECK(pts.points[0].pos == Point2{0, 0});
}

TEST_CASE("seeds") {
  const GridMeta m = small_meta(100, 100);
  SUBCASE("all zero") { CHECK(seed_clusters(ProbGrid::zeros(m, 0), {}).empty()); }
  SUBCASE("single bump") {
    const ProbGrid g = grid_from(m, 0, [](int r, int c) {
      return 0.8 * std::exp(-((r - 50) * (r - 50) + (c - 60) * (c - 60)) / 4.0);
    });
    CHECK(seed_clusters(g, {}) == std::vector<Cell>{{50, 60}});
  }
  SUBCASE("two equal peaks within the separation") {
    const ProbGrid g = grid_from(m, 0, [](int r, int c) { return (r == 50 && (c == 60 || c == 63)) ? 0.5 : 0.0; });
    ExtractionConfig cfg;
    cfg.min_seed_separation_cells = 5;
    CHECK(seed_clusters(g, cfg) == std::vector<Cell>{{50, 60}});
    cfg.min_seed_separation_cells = 3;
    CHECK(seed_clusters(g, cfg).size() == 2);
  }
  SUBCASE("plateau yields one seed") {
    const ProbGrid g = grid_from(m, 0, [](int r, int c) { return (r == 10 && (c == 10 || c == 11)) ? 0.5 : 0.0; });
    CHECK(seed_clusters(g, {}) == std::vector<Cell>{{10, 10}});
  }
}

TEST_CASE("gmm recovers a sampled gaussian") {
  Rng rng(21);
  const SamplePoints pts = gaussian_samples(rng, {50, 60}, 2.0, 1000);
  const GmmFit fit = fit_gmm(pts, {{50, 60}}, {});
  REQUIRE(fit.components.size() == 1);
  const Gaussian2D& g = fit.components[0].gaussian;
  CHECK(std::abs(g.mean.row - 50) < 0.3);
  CHECK(std::abs(g.mean.col - 60) < 0.3);
  CHECK(std::abs(std::sqrt(g.cov.rr) - 2.0) < 0.4);
  CHECK(std::abs(std::sqrt(g.cov.cc) - 2.0) < 0.4);
  CHECK(non_decreasing(fit.log_likelihood));
}

TEST_CASE("gmm on a single point collapses to the regularizer") {
  SamplePoints pts;
  pts.points.push_back({{7, 9}, 5});
  const ExtractionConfig cfg;
  const GmmFit fit = fit_gmm(pts, {{7, 9}}, cfg);
  REQUIRE(fit.components.size() == 1);
  CHECK(fit.components[0].gaussian.mean == Point2{7, 9});
  CHECK(fit.components[0].gaussian.cov == Cov2{cfg.cov_reg, 0.0, cfg.cov_reg});
}

TEST_CASE("gmm splits two symmetric clusters evenly") {
  Rng rng(4);
  SamplePoints a = gaussian_samples(rng, {30, 30}, 1.5, 800);
  SamplePoints b = a;
  for (SamplePoint& p : b.points) p.pos.col += 30;
  a.points.insert(a.points.end(), b.points.begin(), b.points.end());
  const GmmFit fit = fit_gmm(a, {{30, 30}, {30, 60}}, {});
  REQUIRE(fit.components.size() == 2);
  CHECK(std::abs(fit.components[0].weight - 0.5) <= 0.05);
  CHECK(std::abs(fit.components[1].weight - 0.5) <= 0.05);
  CHECK(non_decreasing(fit.log_likelihood));
}

TEST_CASE("em log-likelihood never decreases on random inputs") {
  Rng rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    SamplePoints pts;
    const int n = 5 + int(rng.below(60));
    for (int i = 0; i < n; ++i) {
      pts.points.push_back({{double(rng.below(30)), double(rng.below(30))}, 1 + int(rng.below(50))});
    }
    std::vector<Cell> seeds;
    const int k = 1 + int(rng.below(5));
    for (int i = 0; i < k; ++i) seeds.push_back({int(rng.below(30)), int(rng.below(30))});
    const GmmFit fit = fit_gmm(pts, seeds, {});
    CHECK(non_decreasing(fit.log_likelihood));
  }
}

TEST_CASE("extract objects on synthetic frames") {
  synth::SynthConfig c;
  c.occupancy_noise = 0.0;
  c.location_noise_cells = 0.0;
  c.distortion.kind = synth::DistortionKind::identity;
  synth::SynthObject o;
  o.object_id = 1;
  o.start_row = 80.3;
  o.start_col = 120.6;
  o.peak_intensity = 0.9;
  SUBCASE("static object") {
    const FrameRecord f = synth::render_frame(c, {{o}, {}}, "a", "e");
    const auto dets = extract_objects(f, {});
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].location.size() == 5);
    for (const auto& [t, g] : dets[0].location) {
      CHECK(std::hypot(g.mean.row - 80.3, g.mean.col - 120.6) < 1.0);
    }
  }
  SUBCASE("empty") {
    const FrameRecord f = synth::render_frame(c, {}, "a", "e");
    CHECK(extract_objects(f, {}).empty());
  }
  SUBCASE("object only at timestep 0") {
    c.meta = small_meta(40, 40, 4);
    o.start_row = 38.0;
    o.start_col = 20.0;
    o.velocity_row = 5.0;
    const FrameRecord f = synth::render_frame(c, {{o}, {}}, "a", "e");
    const auto dets = extract_objects(f, {});
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].location.size() == 1);
    CHECK(dets[0].location.count(0) == 1);
  }
}
