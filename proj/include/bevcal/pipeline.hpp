#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bevcal/calibrate.hpp"
#include "bevcal/extract.hpp"
#include "bevcal/match.hpp"
#include "bevcal/metrics.hpp"
#include "bevcal/region.hpp"
#include "bevcal/report.hpp"
#include "bevcal/splits.hpp"
#include "bevcal/uncertainty.hpp"

namespace bevcal::pipeline {

enum class Variant { uncal, pw_cal, obj_cal };

// Config spelling (uncal, pw_cal, obj_cal).
std::string variant_key(Variant v);
// metrics.csv spelling (uncal, pw-cal, obj-cal).
std::string variant_label(Variant v);
Variant parse_variant(const std::string& key);

struct RunConfig {
  std::filesystem::path dataset_dir = "dataset";
  std::filesystem::path output_dir = "results";
  extract::ExtractionConfig extraction;
  uncertainty::PresenceConfig presence;
  std::vector<RegionSpec> regions{RegionSpec{}};
  double calibration_fraction = 0.2;
  std::uint64_t split_seed = 0;
  std::vector<int> timesteps_to_evaluate{0, 4};
  std::vector<Variant> variants{Variant::uncal, Variant::pw_cal, Variant::obj_cal};
  // Object-wise calibration stacks on the pixel-calibrated detections unless false.
  bool obj_cal_on_pw_cal = true;
  calibrate::IsotonicMode isotonic_mode = calibrate::IsotonicMode::interpolate;
  // Every n-th calibration pixel is used for isotonic fitting.
  int pixel_stride = 1;
  int scene_svg_count = 4;
  double scene_clip_log = -12.0;
  int reliability_bins_object = 10;
  int reliability_bins_pixel = 15;

  void validate(const GridMeta& meta) const;
  bool wants(Variant v) const;
};

// Everything measured for one variant on one split.
struct SplitData {
  std::map<int, std::vector<ScoredLabel>> presence;  // by timestep
  std::vector<ScoredLabel> area;                      // timestep 0, one per frame and region
  std::map<int, std::vector<double>> q_direction;     // matched pairs, by timestep
  std::map<int, std::vector<double>> q_distance;
  std::map<int, calibrate::ScoreHistogram> pixels;    // by timestep
  std::set<std::string> frame_ids;
};

struct FrameOutput {
  std::vector<DetectedObject> detections;
  std::vector<match::MatchResult> matches;  // one per evaluated timestep (and timestep 0)
};

struct VariantResult {
  Variant variant = Variant::uncal;
  std::vector<FrameOutput> frames;  // aligned with the input frame list
  SplitData calibration;
  SplitData test;
};

struct FittedMaps {
  std::map<int, calibrate::IsotonicMap> pixel;
  std::map<int, calibrate::BetaMap> presence;
  std::optional<calibrate::BetaMap> area;
  std::map<int, calibrate::QuantileMap> q_direction;
  std::map<int, calibrate::QuantileMap> q_distance;
  std::set<std::string> pixel_sources;
  std::set<std::string> object_sources;
};

struct Reports {
  std::map<int, evaluate::ReliabilityReport> presence;
  std::map<int, evaluate::ReliabilityReport> pixel;
  std::optional<evaluate::ReliabilityReport> area;
  std::map<int, evaluate::RegressionCurve> direction;
  std::map<int, evaluate::RegressionCurve> distance;
};

struct PipelineResult {
  SplitAssignment split;
  std::map<Variant, VariantResult> variants;  // may include variants computed only as a base
  std::map<Variant, Reports> reports;          // requested variants only
  FittedMaps maps;
  std::vector<evaluate::MetricRow> metrics;
  std::vector<std::string> warnings;
};

struct RunOptions {
  unsigned threads = 1;
  bool verbose = false;
};

// Runs extraction, matching, calibration and evaluation on in-memory frames.
// Throws std::logic_error if any fitted map saw a test frame.
PipelineResult run_pipeline(const std::vector<FrameRecord>& frames, const RunConfig& config,
                            const RunOptions& options = {});

// Writes metrics.csv, per-variant CSV/SVG reports, scene SVGs and .calib files.
void write_results(const PipelineResult& result, const std::vector<FrameRecord>& frames, const RunConfig& config,
                   const std::filesystem::path& output_dir);

// Loads every *.bevg under dir, sorted by file name.
std::vector<FrameRecord> load_dataset(const std::filesystem::path& dir, unsigned threads = 1);

}  // namespace bevcal::pipeline
