#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "bevcal/config.hpp"
#include "bevcal/grid_io.hpp"
#include "bevcal/parallel.hpp"
#include "bevcal/pipeline.hpp"
#include "bevcal/report.hpp"
#include "bevcal/synth.hpp"

namespace fs = std::filesystem;
using namespace bevcal;

namespace {

struct Globals {
  std::string config;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

// Usage problems that CLI11 cannot detect on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path require_config(const Globals& g) {
  if (g.config.empty()) throw UsageError("--config is required");
  return g.config;
}

int cmd_generate(const Globals& g) {
  config::GenerateConfig cfg = config::load_generate_config(require_config(g));
  if (g.seed) cfg.synth.rng_seed = *g.seed;
  const unsigned threads = resolve_threads(g.threads);
  const std::vector<FrameRecord> frames = synth::generate_dataset(cfg.synth, threads);

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["config_hash"] = cfg.hash;
  manifest["rng_seed"] = cfg.synth.rng_seed;
  manifest["frames"] = nlohmann::ordered_json::array();
  for (const FrameRecord& f : frames) {
    const std::string name = f.episode_id + "_" + f.frame_id + ".bevg";
    write_grid_file(f, cfg.output_dir / name);
    manifest["frames"].push_back({{"file", name}, {"frame_id", f.frame_id}, {"episode_id", f.episode_id}});
  }
  std::ofstream out(cfg.output_dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("cannot write manifest in " + cfg.output_dir.string());
  if (g.verbose) std::cerr << "[bevcal] wrote " << frames.size() << " frames to " << cfg.output_dir << '\n';
  return 0;
}

int cmd_run(const Globals& g) {
  pipeline::RunConfig cfg = config::load_run_config(require_config(g));
  if (g.seed) cfg.split_seed = *g.seed;
  pipeline::RunOptions options;
  options.threads = resolve_threads(g.threads);
  options.verbose = g.verbose;
  const std::vector<FrameRecord> frames = pipeline::load_dataset(cfg.dataset_dir, options.threads);
  try {
    cfg.validate(frames.front().meta());
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  const pipeline::PipelineResult result = pipeline::run_pipeline(frames, cfg, options);
  pipeline::write_results(result, frames, cfg, cfg.output_dir);
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

std::string cell(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_report(const std::string& dir, bool csv) {
  const fs::path path = fs::path(dir) / "metrics.csv";
  if (!fs::exists(path)) {
    std::cerr << "error: no metrics.csv in " << dir << '\n';
    return 2;
  }
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (csv) {
    std::cout << ss.str();
    return 0;
  }
  const std::vector<evaluate::MetricRow> rows = evaluate::parse_metrics_csv(ss.str());
  const char* shown[] = {"ece_presence", "ece_area", "ece_pixel", "nll_pixel", "ks_direction", "ks_distance"};
  const char* variants[] = {"uncal", "pw-cal", "obj-cal"};
  // (metric, timestep) -> variant -> value
  std::map<std::pair<std::string, int>, std::map<std::string, double>> table;
  for (const evaluate::MetricRow& r : rows) {
    const auto pos = r.metric.rfind("_f");
    if (pos == std::string::npos) continue;
    table[{r.metric.substr(0, pos), std::stoi(r.metric.substr(pos + 2))}][r.variant] = r.value;
  }
  std::printf("%-14s %3s %12s %12s %12s\n", "metric", "f", variants[0], variants[1], variants[2]);
  for (const char* m : shown) {
    for (const auto& [key, values] : table) {
      if (key.first != m) continue;
      std::printf("%-14s %3d", m, key.second);
      for (const char* v : variants) {
        auto it = values.find(v);
        std::printf(" %12s", it == values.end() ? "-" : cell(it->second).c_str());
      }
      std::printf("\n");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated object-level uncertainty from BEV occupancy grids"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--threads", g.threads, "worker threads (0 = auto)")->check(CLI::NonNegativeNumber);
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  app.add_flag("--verbose", g.verbose, "progress on stderr");

  auto* generate = app.add_subcommand("generate", "write a synthetic BEVG dataset");
  auto* run = app.add_subcommand("run", "extract, calibrate and evaluate a dataset");
  auto* report = app.add_subcommand("report", "summarize a results directory");
  std::string results_dir;
  bool csv = false;
  report->add_option("dir", results_dir, "results directory")->required();
  report->add_flag("--csv", csv, "echo metrics.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (generate->parsed()) return cmd_generate(g);
    if (run->parsed()) return cmd_run(g);
    return cmd_report(results_dir, csv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
