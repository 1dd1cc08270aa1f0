#include <cstdio>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "helpers.hpp"

#include "bevcal/grid_io.hpp"
#include "bevcal/region.hpp"
#include "bevcal/rng.hpp"
#include "bevcal/splits.hpp"

using namespace bevcal;
using testutil::small_meta;

namespace {

FrameRecord random_frame(Rng& rng, int index) {
  GridMeta m = small_meta(std::uint32_t(5 + rng.below(20)), std::uint32_t(5 + rng.below(20)),
                          std::uint16_t(rng.below(4)));
  m.cell_size_m = float(rng.uniform(0.1, 1.0));
  FrameRecord f;
  f.frame_id = "frame-" + std::to_string(index);
  f.episode_id = "ep" + std::to_string(index % 3);
  for (int t = 0; t <= m.num_future_steps; ++t) {
    f.grids.push_back(testutil::grid_from(m, t, [&](int, int) { return rng.uniform(); }));
    std::vector<AnnotatedObject> objs;
    const int n = int(rng.below(4));
    for (int k = 0; k < n; ++k) {
      std::vector<Cell> px;
      const int npx = 1 + int(rng.below(6));
      for (int i = 0; i < npx; ++i) {
        px.push_back({int(rng.below(m.height_cells)), int(rng.below(m.width_cells))});
      }
      objs.push_back(AnnotatedObject::from_pixels(ObjectId(k + 1), px));
    }
    f.annotations.push_back(AnnotationMask::from_instances(m, t, objs));
  }
  return f;
}

std::size_t expected_size(const FrameRecord& f) {
  std::size_t n = 4 + 2 + 2 + 4 + 4 + 4 + 4 + 4 + 2 + 4;
  n += 2 + f.frame_id.size() + 2 + f.episode_id.size();
  for (const AnnotationMask& a : f.annotations) {
    n += 5 * a.meta().cell_count() + 4;
    for (const AnnotatedObject& o : a.instances()) n += 16 + 4 * o.pixels.size();
  }
  return n;
}

}  // namespace

TEST_CASE("prob grid rejects invalid cells") {
  const GridMeta m = small_meta(2, 2);
  CHECK_THROWS_WITH_AS(ProbGrid(m, 0, {0.1F, 1.5F, 0.0F, 0.0F}), "cell probability out of range", ValidationError);
  CHECK_THROWS_WITH_AS(ProbGrid(m, 0, {0.1F, NAN, 0.0F, 0.0F}), "cell probability is not finite", ValidationError);
  CHECK_THROWS_AS(ProbGrid(m, 0, {0.1F}), ValidationError);
  CHECK_THROWS_AS(ProbGrid(m, 1, {0, 0, 0, 0}), ValidationError);
}

TEST_CASE("annotation center must match pixel mean") {
  AnnotatedObject o = AnnotatedObject::from_pixels(1, {{2, 2}, {2, 3}});
  CHECK(o.center_col == doctest::Approx(2.5));
  o.center_row = 3.0F;
  CHECK_THROWS_AS(o.validate(), ValidationError);
}

TEST_CASE("grid file size follows the layout") {
  const GridMeta m = small_meta(200, 200, 4);
  const FrameRecord f = testutil::static_frame(m, ProbGrid::zeros(m, 0), {});
  CHECK(encode_grid_file(f).size() == expected_size(f));
  CHECK(encode_grid_file(f).size() == 34 + 4 + 4 + 5 * (5 * 200 * 200 + 4));
}

TEST_CASE("grid file round trip on random frames") {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const FrameRecord f = random_frame(rng, i);
    const auto bytes = encode_grid_file(f);
    CHECK(bytes.size() == expected_size(f));
    const FrameRecord g = decode_grid_file(bytes);
    CHECK(g.frame_id == f.frame_id);
    CHECK(g.episode_id == f.episode_id);
    CHECK(g.grids == f.grids);
    CHECK(g.annotations == f.annotations);
    CHECK(encode_grid_file(g) == bytes);
  }
}

TEST_CASE("grid file errors") {
  Rng rng(3);
  const auto bytes = encode_grid_file(random_frame(rng, 0));
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    b[1] = 'X';
    b[2] = 'X';
    b[3] = 'X';
    CHECK_THROWS_AS(decode_grid_file(b), FormatError);
  }
  SUBCASE("bad version") {
    auto b = bytes;
    b[4] = 2;
    CHECK_THROWS_AS(decode_grid_file(b), FormatError);
  }
  SUBCASE("truncated") {
    for (std::size_t cut : {std::size_t(3), std::size_t(20), bytes.size() / 2, bytes.size() - 1}) {
      std::vector<std::uint8_t> b(bytes.begin(), bytes.begin() + std::ptrdiff_t(cut));
      CHECK_THROWS_AS(decode_grid_file(b), LengthError);
    }
  }
  SUBCASE("trailing bytes") {
    auto b = bytes;
    b.push_back(0);
    CHECK_THROWS_AS(decode_grid_file(b), FormatError);
  }
  SUBCASE("missing file keeps io error type") {
    CHECK_THROWS_AS(read_grid_file("/nonexistent/x.bevg"), IoError);
  }
}

TEST_CASE("grid file write and read") {
  Rng rng(5);
  const FrameRecord f = random_frame(rng, 1);
  const auto path = std::filesystem::temp_directory_path() / "bevcal_test_rt.bevg";
  write_grid_file(f, path);
  const FrameRecord g = read_grid_file(path);
  CHECK(g.grids == f.grids);
  std::filesystem::remove(path);
}

namespace {

std::vector<FrameKey> episodes_of(const std::vector<int>& sizes) {
  std::vector<FrameKey> keys;
  for (std::size_t e = 0; e < sizes.size(); ++e) {
    for (int i = 0; i < sizes[e]; ++i) {
      keys.push_back({"e" + std::to_string(e) + "-" + std::to_string(i), "e" + std::to_string(e)});
    }
  }
  return keys;
}

// Smallest |calibration frames - target| over all proper non-empty episode subsets.
double best_gap(const std::vector<int>& sizes, double fraction) {
  int total = 0;
  for (int s : sizes) total += s;
  const double target = fraction * total;
  double best = 1e300;
  for (unsigned mask = 1; mask + 1 < (1U << sizes.size()); ++mask) {
    int sum = 0;
    for (std::size_t e = 0; e < sizes.size(); ++e) {
      if (mask & (1U << e)) sum += sizes[e];
    }
    best = std::min(best, std::abs(sum - target));
  }
  return best;
}

}  // namespace

TEST_CASE("splits respect episodes and fraction") {
  const auto keys = episodes_of(std::vector<int>(10, 10));
  const SplitAssignment a = assign_splits(keys, 0.2, 42);
  CHECK(a.count(Split::calibration) == 20);
  const SplitAssignment b = assign_splits(keys, 0.2, 42);
  CHECK(a.by_frame == b.by_frame);
}

TEST_CASE("splits pick the subset closest to the target") {
  const std::vector<int> sizes{10, 10, 80};
  const auto keys = episodes_of(sizes);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SplitAssignment a = assign_splits(keys, 0.2, seed);
    CHECK(std::abs(double(a.count(Split::calibration)) - 20.0) == best_gap(sizes, 0.2));
    CHECK(a.frames_in(Split::calibration).count("e2-0") == 0);
  }
}

TEST_CASE("splits never straddle episodes") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> sizes(2 + rng.below(8));
    for (int& s : sizes) s = 1 + int(rng.below(15));
    const auto keys = episodes_of(sizes);
    const double fraction = rng.uniform(0.05, 0.95);
    const SplitAssignment a = assign_splits(keys, fraction, std::uint64_t(trial));
    std::map<std::string, std::set<Split>> seen;
    for (const FrameKey& k : keys) seen[k.episode_id].insert(a.of(k.frame_id));
    for (const auto& [ep, s] : seen) CHECK(s.size() == 1);
    CHECK(a.count(Split::calibration) > 0);
    CHECK(a.count(Split::test) > 0);
  }
}

TEST_CASE("single episode cannot be split") {
  CHECK_THROWS_WITH_AS(assign_splits(episodes_of({5}), 0.2, 0), "cannot split single episode", ValidationError);
}

TEST_CASE("default region covers 800 cells") {
  const GridMeta m;
  const RegionSpec r;
  CHECK(r.cells(m).size() == 800);
  CHECK(r.contains(m, 100, 95));
  CHECK_FALSE(r.contains(m, 99, 100));
}

TEST_CASE("rng streams are reproducible") {
  Rng a = Rng::stream(7, 3);
  Rng b = Rng::stream(7, 3);
  Rng c = Rng::stream(7, 4);
  const double x = a.uniform();
  CHECK(x == b.uniform());
  CHECK(x != c.uniform());
}
