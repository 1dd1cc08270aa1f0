#include "bevcal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "bevcal/grid_io.hpp"
#include "bevcal/parallel.hpp"
#include "bevcal/svg.hpp"

namespace bevcal::pipeline {

namespace fs = std::filesystem;

std::string variant_key(Variant v) {
  switch (v) {
    case Variant::uncal: return "uncal";
    case Variant::pw_cal: return "pw_cal";
    case Variant::obj_cal: return "obj_cal";
  }
  return "uncal";
}

std::string variant_label(Variant v) {
  switch (v) {
    case Variant::uncal: return "uncal";
    case Variant::pw_cal: return "pw-cal";
    case Variant::obj_cal: return "obj-cal";
  }
  return "uncal";
}

Variant parse_variant(const std::string& key) {
  if (key == "uncal") return Variant::uncal;
  if (key == "pw_cal" || key == "pw-cal") return Variant::pw_cal;
  if (key == "obj_cal" || key == "obj-cal") return Variant::obj_cal;
  throw ConfigError("unknown variant '" + key + "'; valid: uncal, pw_cal, obj_cal");
}

void RunConfig::validate(const GridMeta& meta) const {
  extraction.validate();
  presence.validate();
  if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
    throw ConfigError("split.calibration_fraction must lie in (0, 1)");
  }
  if (variants.empty()) throw ConfigError("variants must not be empty");
  if (timesteps_to_evaluate.empty()) throw ConfigError("timesteps_to_evaluate must not be empty");
  for (int t : timesteps_to_evaluate) {
    if (t < 0 || t > meta.num_future_steps) {
      throw ConfigError("timesteps_to_evaluate entry " + std::to_string(t) + " outside [0, " +
                        std::to_string(meta.num_future_steps) + "]");
    }
  }
  if (pixel_stride < 1) throw ConfigError("pixel_stride must be >= 1");
  if (scene_svg_count < 0) throw ConfigError("scene_svg_count must be >= 0");
  if (reliability_bins_object < 1 || reliability_bins_pixel < 1) throw ConfigError("bin counts must be >= 1");
  for (const RegionSpec& r : regions) {
    try {
      r.validate(meta);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
}

bool RunConfig::wants(Variant v) const {
  return std::find(variants.begin(), variants.end(), v) != variants.end();
}

namespace {

// Evaluated timesteps plus timestep 0 (needed for the area metric), sorted.
std::vector<int> match_timesteps(const RunConfig& config) {
  std::vector<int> ts = config.timesteps_to_evaluate;
  ts.push_back(0);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

bool evaluated(const RunConfig& config, int t) {
  return std::find(config.timesteps_to_evaluate.begin(), config.timesteps_to_evaluate.end(), t) !=
         config.timesteps_to_evaluate.end();
}

FrameRecord with_calibrated_grids(const FrameRecord& frame, const std::map<int, calibrate::IsotonicMap>& maps) {
  FrameRecord out;
  out.frame_id = frame.frame_id;
  out.episode_id = frame.episode_id;
  out.annotations = frame.annotations;
  for (const ProbGrid& g : frame.grids) {
    auto it = maps.find(g.timestep());
    out.grids.push_back(it == maps.end() ? g : calibrate::calibrate_grid(g, it->second));
  }
  return out;
}

struct FramePartial {
  FrameOutput output;
  SplitData data;
  std::size_t degenerate = 0;
};

FramePartial process_frame(const FrameRecord& frame, const RunConfig& config) {
  FramePartial part;
  std::vector<DetectedObject> detections =
      extract::extract_objects(frame, config.extraction, config.presence.shape_pixels);
  uncertainty::assign_presence(frame, detections, config.presence);

  FrameRecord view;
  view.frame_id = frame.frame_id;
  view.episode_id = frame.episode_id;
  view.grids = frame.grids;
  view.annotations = frame.annotations;
  view.detections = detections;

  const GridMeta& meta = frame.meta();
  for (int t : match_timesteps(config)) {
    match::MatchResult m = match::match_frame(view, t, config.presence.ellipse_mass);
    match::record_matches(m, detections);
    if (t == 0) {
      for (const RegionSpec& region : config.regions) {
        const double p = uncertainty::undetected_area_probability(frame.grids.front(), detections, region,
                                                                  config.presence);
        part.data.area.push_back({p, match::area_label(frame, m, region)});
      }
    }
    if (evaluated(config, t)) {
      auto& presence = part.data.presence[t];
      for (const DetectedObject& d : detections) {
        auto p = d.presence.find(t);
        if (p == d.presence.end()) continue;
        const bool matched = std::any_of(m.pairs.begin(), m.pairs.end(),
                                         [&](const auto& pr) { return pr.first == d.detection_id; });
        presence.push_back({p->second, matched ? 1 : 0});
      }
      auto& qd = part.data.q_direction[t];
      auto& qy = part.data.q_distance[t];
      const AnnotationMask& ann = frame.annotations[std::size_t(t)];
      for (const auto& [det_id, obj_id] : m.pairs) {
        const DetectedObject& d = detections[det_id];
        auto obj = std::find_if(ann.instances().begin(), ann.instances().end(),
                                [&](const AnnotatedObject& o) { return o.object_id == obj_id; });
        try {
          const uncertainty::LocationQuantiles q = uncertainty::location_quantiles(d, t, *obj, meta);
          qd.push_back(q.q_direction);
          qy.push_back(q.q_distance);
        } catch (const ValidationError&) {
          ++part.degenerate;
        }
      }
      calibrate::ScoreHistogram& hist = part.data.pixels[t];
      const ProbGrid& grid = frame.grids[std::size_t(t)];
      for (std::size_t i = 0; i < grid.cells().size(); ++i) {
        hist.add(grid.cells()[i], ann.occupied()[i]);
      }
    }
    part.output.matches.push_back(std::move(m));
  }
  part.output.detections = std::move(detections);
  part.data.frame_ids.insert(frame.frame_id);
  return part;
}

void append(SplitData& into, SplitData&& from) {
  for (auto& [t, v] : from.presence) {
    auto& dst = into.presence[t];
    dst.insert(dst.end(), v.begin(), v.end());
  }
  into.area.insert(into.area.end(), from.area.begin(), from.area.end());
  for (auto& [t, v] : from.q_direction) {
    auto& dst = into.q_direction[t];
    dst.insert(dst.end(), v.begin(), v.end());
  }
  for (auto& [t, v] : from.q_distance) {
    auto& dst = into.q_distance[t];
    dst.insert(dst.end(), v.begin(), v.end());
  }
  for (auto& [t, h] : from.pixels) into.pixels[t].merge(h);
  into.frame_ids.insert(from.frame_ids.begin(), from.frame_ids.end());
}

VariantResult run_variant(Variant variant, const std::vector<FrameRecord>& frames, const SplitAssignment& split,
                          const RunConfig& config, const std::map<int, calibrate::IsotonicMap>* pixel_maps,
                          unsigned threads, std::vector<std::string>& warnings) {
  std::vector<FramePartial> parts(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t i) {
    if (pixel_maps == nullptr) {
      parts[i] = process_frame(frames[i], config);
    } else {
      parts[i] = process_frame(with_calibrated_grids(frames[i], *pixel_maps), config);
    }
  });
  VariantResult result;
  result.variant = variant;
  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    degenerate += parts[i].degenerate;
    SplitData& dst = split.of(frames[i].frame_id) == Split::calibration ? result.calibration : result.test;
    append(dst, std::move(parts[i].data));
    result.frames.push_back(std::move(parts[i].output));
  }
  if (degenerate > 0) {
    warnings.push_back(variant_key(variant) + ": skipped " + std::to_string(degenerate) +
                       " location quantiles with a mean on the ego position");
  }
  return result;
}

std::map<int, calibrate::IsotonicMap> fit_pixel_maps(const std::vector<FrameRecord>& frames,
                                                     const SplitAssignment& split, const RunConfig& config,
                                                     std::set<std::string>& sources) {
  const int steps = frames.front().num_timesteps();
  std::map<int, calibrate::ScoreHistogram> hist;
  std::uint64_t counter = 0;
  for (const FrameRecord& f : frames) {
    if (split.of(f.frame_id) != Split::calibration) continue;
    sources.insert(f.frame_id);
    for (int t = 0; t < steps; ++t) {
      const ProbGrid& grid = f.grids[std::size_t(t)];
      const auto& occ = f.annotations[std::size_t(t)].occupied();
      calibrate::ScoreHistogram& h = hist[t];
      for (std::size_t i = 0; i < grid.cells().size(); ++i, ++counter) {
        if (counter % std::uint64_t(config.pixel_stride) != 0) continue;
        h.add(grid.cells()[i], occ[i]);
      }
    }
  }
  std::map<int, calibrate::IsotonicMap> maps;
  for (auto& [t, h] : hist) maps[t] = calibrate::fit_isotonic(h, config.isotonic_mode);
  return maps;
}

SplitData map_split(const SplitData& base, const FittedMaps& maps) {
  SplitData out = base;
  for (auto& [t, pairs] : out.presence) {
    auto it = maps.presence.find(t);
    if (it == maps.presence.end()) continue;
    for (ScoredLabel& s : pairs) s.p = it->second.apply(s.p);
  }
  if (maps.area) {
    for (ScoredLabel& s : out.area) s.p = maps.area->apply(s.p);
  }
  for (auto& [t, qs] : out.q_direction) {
    auto it = maps.q_direction.find(t);
    if (it == maps.q_direction.end()) continue;
    for (double& q : qs) q = it->second.apply(q);
  }
  for (auto& [t, qs] : out.q_distance) {
    auto it = maps.q_distance.find(t);
    if (it == maps.q_distance.end()) continue;
    for (double& q : qs) q = it->second.apply(q);
  }
  return out;
}

std::vector<evaluate::WeightedScore> weighted(const calibrate::ScoreHistogram& h) {
  std::vector<evaluate::WeightedScore> out;
  out.reserve(h.distinct());
  for (const auto& [p, bin] : h.bins()) out.push_back({p, bin.first, bin.second});
  return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void add_metrics(const SplitData& data, const RunConfig& config, Variant variant, Reports& reports,
                 std::vector<evaluate::MetricRow>& rows) {
  const std::string label = variant_label(variant);
  auto row = [&](const std::string& metric, int t, double value) {
    rows.push_back({metric + "_f" + std::to_string(t), "test", label, value});
  };
  using evaluate::Binning;
  for (int t : config.timesteps_to_evaluate) {
    auto pres = data.presence.find(t);
    if (pres != data.presence.end() && !pres->second.empty()) {
      const auto rep = evaluate::compute_reliability(pres->second, Binning::equal_width, config.reliability_bins_object);
      reports.presence[t] = rep;
      row("ece_presence", t, rep.ece);
      row("nll_presence", t, rep.nll);
      row("n_presence", t, double(rep.total));
    } else {
      row("ece_presence", t, kNaN);
      row("nll_presence", t, kNaN);
      row("n_presence", t, 0.0);
    }
    auto pix = data.pixels.find(t);
    if (pix != data.pixels.end() && pix->second.instances() > 0) {
      const auto rep = evaluate::compute_reliability(weighted(pix->second), Binning::equal_width,
                                                     config.reliability_bins_pixel);
      const auto eq = evaluate::compute_reliability(weighted(pix->second), Binning::equal_size,
                                                    config.reliability_bins_pixel);
      reports.pixel[t] = rep;
      row("ece_pixel", t, rep.ece);
      row("ece_pixel_eqsize", t, eq.ece);
      row("nll_pixel", t, rep.nll);
    }
    auto qd = data.q_direction.find(t);
    auto qy = data.q_distance.find(t);
    if (qd != data.q_direction.end() && !qd->second.empty()) {
      reports.direction[t] = evaluate::compute_regression_curve(qd->second);
      reports.distance[t] = evaluate::compute_regression_curve(qy->second);
      row("ks_direction", t, evaluate::ks_uniform(qd->second));
      row("ks_distance", t, evaluate::ks_uniform(qy->second));
      row("n_pairs", t, double(qd->second.size()));
    } else {
      row("ks_direction", t, kNaN);
      row("ks_distance", t, kNaN);
      row("n_pairs", t, 0.0);
    }
  }
  if (!data.area.empty()) {
    const auto rep = evaluate::compute_reliability(data.area, Binning::equal_size, config.reliability_bins_object);
    reports.area = rep;
    row("ece_area", 0, rep.ece);
    row("nll_area", 0, rep.nll);
  }
}

template <class Fit>
void try_fit(const char* what, int t, std::vector<std::string>& warnings, Fit&& fit) {
  try {
    fit();
  } catch (const Error& e) {
    warnings.push_back(std::string("obj_cal: no ") + what + " map for f" + std::to_string(t) + ": " + e.what());
  }
}

void check_no_leakage(const std::set<std::string>& sources, const SplitData& evaluated_data, const char* what) {
  for (const std::string& id : sources) {
    if (evaluated_data.frame_ids.count(id) != 0) {
      throw std::logic_error(std::string("split leakage: ") + what + " map was fitted on test frame " + id);
    }
  }
}

}  // namespace

PipelineResult run_pipeline(const std::vector<FrameRecord>& frames, const RunConfig& config,
                            const RunOptions& options) {
  if (frames.empty()) throw ValidationError("dataset has no frames");
  const GridMeta& meta = frames.front().meta();
  for (const FrameRecord& f : frames) {
    if (!(f.meta() == meta)) throw ValidationError("frame " + f.frame_id + " has a different GridMeta");
  }
  config.validate(meta);

  PipelineResult result;
  result.split = assign_splits(frames, config.calibration_fraction, config.split_seed);
  if (result.split.count(Split::calibration) == 0 || result.split.count(Split::test) == 0) {
    throw ValidationError("missing split: both calibration and test frames are required");
  }
  auto log = [&](const std::string& msg) {
    if (options.verbose) std::cerr << "[bevcal] " << msg << '\n';
  };

  const bool want_obj = config.wants(Variant::obj_cal);
  const bool need_uncal = config.wants(Variant::uncal) || (want_obj && !config.obj_cal_on_pw_cal);
  const bool need_pw = config.wants(Variant::pw_cal) || (want_obj && config.obj_cal_on_pw_cal);

  if (need_uncal) {
    log("extracting objects on uncalibrated grids");
    result.variants[Variant::uncal] =
        run_variant(Variant::uncal, frames, result.split, config, nullptr, options.threads, result.warnings);
  }
  if (need_pw) {
    log("fitting pixel-wise isotonic maps");
    result.maps.pixel = fit_pixel_maps(frames, result.split, config, result.maps.pixel_sources);
    log("extracting objects on calibrated grids");
    result.variants[Variant::pw_cal] = run_variant(Variant::pw_cal, frames, result.split, config,
                                                   &result.maps.pixel, options.threads, result.warnings);
    check_no_leakage(result.maps.pixel_sources, result.variants[Variant::pw_cal].test, "pixel");
  }
  if (want_obj) {
    log("fitting object-wise maps");
    const VariantResult& base = result.variants.at(config.obj_cal_on_pw_cal ? Variant::pw_cal : Variant::uncal);
    const SplitData& cal = base.calibration;
    FittedMaps& maps = result.maps;
    maps.object_sources = cal.frame_ids;
    for (int t : config.timesteps_to_evaluate) {
      auto pres = cal.presence.find(t);
      try_fit("presence", t, result.warnings, [&] {
        if (pres == cal.presence.end()) throw ValidationError("no calibration detections");
        maps.presence[t] = calibrate::fit_beta(pres->second);
      });
      auto qd = cal.q_direction.find(t);
      auto qy = cal.q_distance.find(t);
      try_fit("location quantile", t, result.warnings, [&] {
        if (qd == cal.q_direction.end()) throw ValidationError("no calibration pairs");
        maps.q_direction[t] = calibrate::fit_quantile_map(qd->second);
        maps.q_distance[t] = calibrate::fit_quantile_map(qy->second);
      });
    }
    try_fit("area", 0, result.warnings, [&] { maps.area = calibrate::fit_beta(cal.area); });

    VariantResult obj;
    obj.variant = Variant::obj_cal;
    obj.frames = base.frames;
    obj.calibration = map_split(base.calibration, maps);
    obj.test = map_split(base.test, maps);
    for (FrameOutput& fo : obj.frames) {
      for (DetectedObject& d : fo.detections) {
        for (auto& [t, p] : d.presence) {
          auto it = maps.presence.find(t);
          if (it != maps.presence.end()) p = it->second.apply(p);
        }
      }
    }
    check_no_leakage(maps.object_sources, obj.test, "object");
    check_no_leakage(maps.pixel_sources, obj.test, "pixel");
    result.variants[Variant::obj_cal] = std::move(obj);
  }

  for (Variant v : {Variant::uncal, Variant::pw_cal, Variant::obj_cal}) {
    if (!config.wants(v)) continue;
    add_metrics(result.variants.at(v).test, config, v, result.reports[v], result.metrics);
  }
  return result;
}

void write_results(const PipelineResult& result, const std::vector<FrameRecord>& frames, const RunConfig& config,
                   const fs::path& output_dir) {
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + output_dir.string() + ": " + ec.message());
  evaluate::write_text(output_dir / "metrics.csv", evaluate::metrics_csv(result.metrics));

  {
    std::string splits = "frame_id,episode_id,split\n";
    for (const FrameRecord& f : frames) {
      splits += f.frame_id + "," + f.episode_id + "," +
                (result.split.of(f.frame_id) == Split::calibration ? "calibration" : "test") + "\n";
    }
    evaluate::write_text(output_dir / "splits.csv", splits);
  }

  const bool any_calibrated = config.wants(Variant::pw_cal) || config.wants(Variant::obj_cal);
  if (any_calibrated) {
    const fs::path dir = output_dir / "calib";
    fs::create_directories(dir);
    auto meta = [&](const std::set<std::string>& sources) {
      return std::map<std::string, std::string>{{"created_by", "bevcal"},
                                                {"source_frames", std::to_string(sources.size())},
                                                {"split_seed", std::to_string(config.split_seed)}};
    };
    for (const auto& [t, m] : result.maps.pixel) {
      calibrate::write_calib(dir / ("pixel_f" + std::to_string(t) + ".calib"), {m, meta(result.maps.pixel_sources)});
    }
    for (const auto& [t, m] : result.maps.presence) {
      calibrate::write_calib(dir / ("presence_f" + std::to_string(t) + ".calib"),
                             {m, meta(result.maps.object_sources)});
    }
    if (result.maps.area) {
      calibrate::write_calib(dir / "area_f0.calib", {*result.maps.area, meta(result.maps.object_sources)});
    }
    for (const auto& [t, m] : result.maps.q_direction) {
      calibrate::write_calib(dir / ("q_direction_f" + std::to_string(t) + ".calib"),
                             {m, meta(result.maps.object_sources)});
    }
    for (const auto& [t, m] : result.maps.q_distance) {
      calibrate::write_calib(dir / ("q_distance_f" + std::to_string(t) + ".calib"),
                             {m, meta(result.maps.object_sources)});
    }
  }

  // Scene frames: first N by frame_id.
  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frames[a].frame_id < frames[b].frame_id; });
  order.resize(std::min(order.size(), std::size_t(config.scene_svg_count)));

  for (const auto& [variant, reports] : result.reports) {
    const fs::path vdir = output_dir / variant_key(variant);
    fs::create_directories(vdir);
    const VariantResult& vr = result.variants.at(variant);
    std::vector<match::MatchResult> all_matches;
    for (const FrameOutput& fo : vr.frames) all_matches.insert(all_matches.end(), fo.matches.begin(), fo.matches.end());
    evaluate::write_text(vdir / "matches.csv", evaluate::matches_csv(all_matches));

    for (int t : config.timesteps_to_evaluate) {
      const fs::path tdir = vdir / ("f" + std::to_string(t));
      fs::create_directories(tdir);
      const std::string suffix = " (" + variant_label(variant) + ", f=" + std::to_string(t) + ")";
      if (auto it = reports.presence.find(t); it != reports.presence.end()) {
        evaluate::write_text(tdir / "reliability_presence.csv", evaluate::reliability_csv(it->second));
        evaluate::render_reliability_svg(it->second, tdir / "reliability_presence.svg", {"presence" + suffix});
      }
      if (auto it = reports.pixel.find(t); it != reports.pixel.end()) {
        evaluate::write_text(tdir / "reliability_pixel.csv", evaluate::reliability_csv(it->second));
        evaluate::render_reliability_svg(it->second, tdir / "reliability_pixel.svg", {"pixel" + suffix});
      }
      if (auto it = reports.direction.find(t); it != reports.direction.end()) {
        evaluate::write_text(tdir / "regression_direction.csv", evaluate::regression_csv(it->second));
        evaluate::write_text(tdir / "regression_distance.csv", evaluate::regression_csv(reports.distance.at(t)));
      }
      if (t == 0 && reports.area) {
        evaluate::write_text(tdir / "reliability_area.csv", evaluate::reliability_csv(*reports.area));
        evaluate::render_reliability_svg(*reports.area, tdir / "reliability_area.svg",
                                         {"undetected area" + suffix, true, 1e-4});
      }
    }

    if (!order.empty()) {
      const fs::path sdir = vdir / "scenes";
      fs::create_directories(sdir);
      for (std::size_t idx : order) {
        const FrameRecord shown = variant == Variant::uncal || result.maps.pixel.empty() ||
                                          (variant == Variant::obj_cal && !config.obj_cal_on_pw_cal)
                                      ? frames[idx]
                                      : with_calibrated_grids(frames[idx], result.maps.pixel);
        evaluate::SceneSvgOptions opts;
        opts.clip_log = config.scene_clip_log;
        opts.ellipse_mass = config.presence.ellipse_mass;
        evaluate::render_scene_svg(shown, vr.frames[idx].detections, config.regions,
                                   sdir / (frames[idx].frame_id + ".svg"), opts);
      }
    }
  }
}

std::vector<FrameRecord> load_dataset(const fs::path& dir, unsigned threads) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".bevg") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .bevg files in " + dir.string());
  std::vector<FrameRecord> frames(files.size());
  parallel_for(files.size(), threads, [&](std::size_t i) { frames[i] = read_grid_file(files[i]); });
  return frames;
}

}  // namespace bevcal::pipeline
