#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

#include "bevcal/config.hpp"
#include "bevcal/pipeline.hpp"
#include "bevcal/synth.hpp"

#ifndef BEVCAL_BIN
#error "BEVCAL_BIN must point at the CLI binary"
#endif

using namespace bevcal;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("bevcal_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int bevcal_cli(const std::string& args, const fs::path& out = {}) {
  std::string cmd = std::string(BEVCAL_BIN) + " " + args;
  cmd += out.empty() ? " >/dev/null 2>&1" : " >" + out.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kGenerate = R"({
  "output_dir": "data",
  "meta": {"height_cells": 80, "width_cells": 80, "ego_row": 39.5, "ego_col": 39.5},
  "num_episodes": 5,
  "frames_per_episode": 8,
  "objects_per_frame_mean": 5
})";

}  // namespace

TEST_CASE("config rejects unknown keys and names the alternatives") {
  try {
    config::parse_generate_config(R"({"num_episode": 3})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("num_episode") != std::string::npos);
    CHECK(msg.find("num_episodes") != std::string::npos);
  }
  CHECK_THROWS_WITH_AS(config::parse_run_config(R"({"extraction": {"p_tresh": 0.1}})"),
                       doctest::Contains("extraction.p_tresh"), ConfigError);
  CHECK_THROWS_WITH_AS(config::parse_run_config(R"({"split": {"seed": "x"}})"), doctest::Contains("split.seed"),
                       ConfigError);
  CHECK_THROWS_AS(config::parse_run_config(R"({"variants": []})"), ConfigError);
  CHECK_THROWS_AS(config::parse_run_config(R"({"variants": ["calibrated"]})"), ConfigError);
  CHECK_THROWS_AS(config::parse_generate_config("{not json"), ConfigError);
}

TEST_CASE("config values and relative paths") {
  const auto g = config::parse_generate_config(kGenerate, "/base");
  CHECK(g.output_dir == fs::path("/base/data"));
  CHECK(g.synth.meta.height_cells == 80);
  CHECK(g.synth.num_episodes == 5);
  CHECK(g.hash == config::fnv1a_hex(kGenerate));
  const auto r = config::parse_run_config(
      R"({"dataset_dir": "/abs", "variants": ["uncal", "obj_cal"], "timesteps_to_evaluate": [0, 2],
          "regions": [{"name": "left", "lateral_min": -10, "lateral_max": -2}], "isotonic_mode": "step"})",
      "/base");
  CHECK(r.dataset_dir == fs::path("/abs"));
  CHECK(r.variants.size() == 2);
  CHECK(r.timesteps_to_evaluate == std::vector<int>{0, 2});
  CHECK(r.regions.at(0).name == "left");
  CHECK(r.regions.at(0).forward_max == 20.0);
  CHECK(r.isotonic_mode == calibrate::IsotonicMode::step);
  CHECK(config::fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("run config validation against the grid") {
  pipeline::RunConfig c;
  c.timesteps_to_evaluate = {0, 5};
  CHECK_THROWS_AS(c.validate(GridMeta{}), ConfigError);
  c.timesteps_to_evaluate = {4};
  CHECK_NOTHROW(c.validate(GridMeta{}));
}

TEST_CASE("generate, run and report through the CLI") {
  TempDir dir("cli");
  write(dir.path / "gen.json", kGenerate);
  REQUIRE(bevcal_cli("--config " + (dir.path / "gen.json").string() + " generate") == 0);

  std::size_t bevg = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "data")) bevg += e.path().extension() == ".bevg" ? 1 : 0;
  CHECK(bevg == 40);
  CHECK(fs::exists(dir.path / "data/ep0000_ep0000-f000.bevg"));
  const std::string manifest = read(dir.path / "data/manifest.json");
  CHECK(manifest.find(config::fnv1a_hex(kGenerate)) != std::string::npos);
  CHECK(manifest.find("ep0004-f007") != std::string::npos);

  const std::string first = read(dir.path / "data/ep0002_ep0002-f003.bevg");
  REQUIRE(bevcal_cli("--config " + (dir.path / "gen.json").string() + " --threads 2 generate") == 0);
  CHECK(read(dir.path / "data/ep0002_ep0002-f003.bevg") == first);
  REQUIRE(bevcal_cli("--config " + (dir.path / "gen.json").string() + " --seed 99 generate") == 0);
  CHECK(read(dir.path / "data/ep0002_ep0002-f003.bevg") != first);
  REQUIRE(bevcal_cli("--config " + (dir.path / "gen.json").string() + " generate") == 0);

  write(dir.path / "run.json", R"({"dataset_dir": "data", "output_dir": "out", "split": {"calibration_fraction": 0.4}})");
  REQUIRE(bevcal_cli("--config " + (dir.path / "run.json").string() + " run") == 0);
  const fs::path out = dir.path / "out";
  for (const char* f : {"metrics.csv", "splits.csv", "calib/pixel_f0.calib", "calib/presence_f4.calib",
                        "uncal/matches.csv", "uncal/f0/reliability_presence.csv", "uncal/f0/reliability_presence.svg",
                        "uncal/f4/reliability_presence.svg", "uncal/f4/regression_direction.csv",
                        "uncal/f0/regression_distance.csv", "pw_cal/f0/reliability_pixel.svg",
                        "obj_cal/f0/reliability_area.svg", "obj_cal/f4/reliability_presence.csv"}) {
    CHECK_MESSAGE(fs::exists(out / f), f);
  }
  std::size_t scenes = 0;
  for (const auto& e : fs::directory_iterator(out / "uncal/scenes")) scenes += e.path().extension() == ".svg" ? 1 : 0;
  CHECK(scenes == 4);
  CHECK(fs::exists(out / "uncal/scenes/ep0000-f000.svg"));

  const std::string metrics = read(out / "metrics.csv");
  for (const char* v : {"uncal", "pw-cal", "obj-cal"}) {
    CHECK(metrics.find(std::string("ece_presence_f0,test,") + v) != std::string::npos);
    CHECK(metrics.find(std::string("ece_presence_f4,test,") + v) != std::string::npos);
  }
  REQUIRE(bevcal_cli("--config " + (dir.path / "run.json").string() + " --threads 3 run") == 0);
  CHECK(read(out / "metrics.csv") == metrics);

  REQUIRE(bevcal_cli("report " + out.string(), dir.path / "table.txt") == 0);
  const std::string table = read(dir.path / "table.txt");
  for (const char* m : {"ece_presence", "ece_area", "ece_pixel", "nll_pixel", "ks_direction", "ks_distance"}) {
    CHECK_MESSAGE(table.find(m) != std::string::npos, m);
  }
  REQUIRE(bevcal_cli("report --csv " + out.string(), dir.path / "echo.csv") == 0);
  CHECK(read(dir.path / "echo.csv") == metrics);

  write(dir.path / "uncal.json", R"({"dataset_dir": "data", "output_dir": "only_uncal", "variants": ["uncal"]})");
  REQUIRE(bevcal_cli("--config " + (dir.path / "uncal.json").string() + " run") == 0);
  CHECK_FALSE(fs::exists(dir.path / "only_uncal/calib"));
  CHECK_FALSE(fs::exists(dir.path / "only_uncal/pw_cal"));
  const std::string only = read(dir.path / "only_uncal/metrics.csv");
  CHECK(only.find("pw-cal") == std::string::npos);
  CHECK(only.find("obj-cal") == std::string::npos);
  CHECK(only.find(",uncal,") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  TempDir dir("exit");
  CHECK(bevcal_cli("") == 2);
  CHECK(bevcal_cli("frobnicate") == 2);
  CHECK(bevcal_cli("generate") == 2);
  CHECK(bevcal_cli("report " + dir.path.string()) == 2);
  write(dir.path / "bad.json", R"({"num_episodes": 2, "colour": "red"})");
  CHECK(bevcal_cli("--config " + (dir.path / "bad.json").string() + " generate", dir.path / "err.txt") == 2);
  CHECK(read(dir.path / "err.txt").find("colour") != std::string::npos);
  write(dir.path / "missing.json", R"({"dataset_dir": "nowhere"})");
  CHECK(bevcal_cli("--config " + (dir.path / "missing.json").string() + " run") == 1);
  CHECK(bevcal_cli("--help") == 0);
}

TEST_CASE("pipeline keeps fitted maps off the test split") {
  synth::SynthConfig c;
  c.meta = testutil::small_meta(80, 80, 4);
  c.num_episodes = 6;
  c.frames_per_episode = 4;
  c.objects_per_frame_mean = 6;
  const auto frames = synth::generate_dataset(c);
  pipeline::RunConfig rc;
  rc.calibration_fraction = 0.5;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    rc.split_seed = seed;
    const pipeline::PipelineResult r = pipeline::run_pipeline(frames, rc);
    const auto test = r.split.frames_in(Split::test);
    for (const std::string& id : r.maps.pixel_sources) CHECK(test.count(id) == 0);
    for (const std::string& id : r.maps.object_sources) CHECK(test.count(id) == 0);
    CHECK_FALSE(r.maps.pixel_sources.empty());
    CHECK(r.variants.at(pipeline::Variant::obj_cal).test.frame_ids == test);
  }
}
