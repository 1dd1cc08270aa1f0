#include "bevcal/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace bevcal::config {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& keys) {
  std::string out;
  for (const std::string& k : keys) {
    if (!out.empty()) out += ", ";
    out += k;
  }
  return out;
}

// Reads a JSON object section, rejecting keys outside the allowed set.
class Section {
 public:
  Section(const json& j, std::string name, std::initializer_list<const char*> keys) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    for (const char* k : keys) keys_.emplace_back(k);
    for (const auto& item : j_.items()) {
      if (std::find(keys_.begin(), keys_.end(), item.key()) == keys_.end()) {
        throw ConfigError("unknown config key '" + qualified(item.key()) + "'; valid keys: " + join(keys_));
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const { return j_.at(key); }
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  template <class T>
  void read(const char* key, T& target) const {
    if (!j_.contains(key)) return;
    try {
      target = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + qualified(key) + "' has the wrong type");
    }
  }

  void read_path(const char* key, fs::path& target, const fs::path& base) const {
    std::string s;
    if (!j_.contains(key)) return;
    read(key, s);
    fs::path p(s);
    target = p.is_absolute() || base.empty() ? p : base / p;
  }

 private:
  const json& j_;
  std::string name_;
  std::vector<std::string> keys_;
};

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

void read_meta(const Section& s, GridMeta& meta) {
  if (!s.has("meta")) return;
  Section m(s.at("meta"), s.qualified("meta"),
            {"height_cells", "width_cells", "cell_size_m", "ego_row", "ego_col", "num_future_steps", "step_seconds"});
  m.read("height_cells", meta.height_cells);
  m.read("width_cells", meta.width_cells);
  m.read("cell_size_m", meta.cell_size_m);
  m.read("ego_row", meta.ego_row);
  m.read("ego_col", meta.ego_col);
  m.read("num_future_steps", meta.num_future_steps);
  m.read("step_seconds", meta.step_seconds);
}

synth::DistortionKind parse_kind(const std::string& s) {
  if (s == "identity") return synth::DistortionKind::identity;
  if (s == "power") return synth::DistortionKind::power;
  if (s == "logistic_shift") return synth::DistortionKind::logistic_shift;
  throw ConfigError("unknown distortion.kind '" + s + "'; valid: identity, power, logistic_shift");
}

template <class Fn>
void validated(Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GenerateConfig parse_generate_config(std::string_view text, const fs::path& base_dir) {
  const json j = parse_json(text);
  Section s(j, "",
            {"output_dir", "meta", "num_episodes", "frames_per_episode", "objects_per_frame_mean", "distortion",
             "occupancy_noise", "rng_seed", "pixel_footprint", "peak_min", "peak_max", "spread_cells",
             "spread_growth", "location_noise_cells", "location_noise_growth", "max_speed_cells",
             "min_object_separation_cells", "existence_from_peak"});
  GenerateConfig out;
  synth::SynthConfig& c = out.synth;
  s.read_path("output_dir", out.output_dir, base_dir);
  read_meta(s, c.meta);
  s.read("num_episodes", c.num_episodes);
  s.read("frames_per_episode", c.frames_per_episode);
  s.read("objects_per_frame_mean", c.objects_per_frame_mean);
  if (s.has("distortion")) {
    Section d(s.at("distortion"), "distortion", {"kind", "gamma", "shift"});
    std::string kind;
    d.read("kind", kind);
    if (!kind.empty()) c.distortion.kind = parse_kind(kind);
    d.read("gamma", c.distortion.gamma);
    d.read("shift", c.distortion.shift);
  }
  s.read("occupancy_noise", c.occupancy_noise);
  s.read("rng_seed", c.rng_seed);
  s.read("pixel_footprint", c.pixel_footprint);
  s.read("peak_min", c.peak_min);
  s.read("peak_max", c.peak_max);
  s.read("spread_cells", c.spread_cells);
  s.read("spread_growth", c.spread_growth);
  s.read("location_noise_cells", c.location_noise_cells);
  s.read("location_noise_growth", c.location_noise_growth);
  s.read("max_speed_cells", c.max_speed_cells);
  s.read("min_object_separation_cells", c.min_object_separation_cells);
  s.read("existence_from_peak", c.existence_from_peak);
  validated([&] { c.validate(); });
  out.hash = fnv1a_hex(text);
  return out;
}

pipeline::RunConfig parse_run_config(std::string_view text, const fs::path& base_dir) {
  const json j = parse_json(text);
  Section s(j, "",
            {"dataset_dir", "output_dir", "extraction", "presence", "regions", "split", "timesteps_to_evaluate",
             "variants", "obj_cal_on_pw_cal", "isotonic_mode", "pixel_stride", "scene_svg_count", "scene_clip_log",
             "reliability_bins_object", "reliability_bins_pixel"});
  pipeline::RunConfig c;
  s.read_path("dataset_dir", c.dataset_dir, base_dir);
  s.read_path("output_dir", c.output_dir, base_dir);
  if (s.has("extraction")) {
    Section e(s.at("extraction"), "extraction",
              {"p_thresh", "m_thresh", "max_components", "em_max_iters", "em_tol", "cov_reg",
               "min_seed_separation_cells", "gating_cells_per_step"});
    extract::ExtractionConfig& x = c.extraction;
    e.read("p_thresh", x.p_thresh);
    e.read("m_thresh", x.m_thresh);
    e.read("max_components", x.max_components);
    e.read("em_max_iters", x.em_max_iters);
    e.read("em_tol", x.em_tol);
    e.read("cov_reg", x.cov_reg);
    e.read("min_seed_separation_cells", x.min_seed_separation_cells);
    e.read("gating_cells_per_step", x.gating_cells_per_step);
  }
  if (s.has("presence")) {
    Section p(s.at("presence"), "presence", {"ellipse_mass", "shape_pixels"});
    p.read("ellipse_mass", c.presence.ellipse_mass);
    p.read("shape_pixels", c.presence.shape_pixels);
  }
  if (s.has("regions")) {
    const json& arr = s.at("regions");
    if (!arr.is_array()) throw ConfigError("'regions' must be a list");
    c.regions.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section r(arr[i], "regions[" + std::to_string(i) + "]",
                {"name", "forward_min", "forward_max", "lateral_min", "lateral_max"});
      RegionSpec spec;
      r.read("name", spec.name);
      r.read("forward_min", spec.forward_min);
      r.read("forward_max", spec.forward_max);
      r.read("lateral_min", spec.lateral_min);
      r.read("lateral_max", spec.lateral_max);
      c.regions.push_back(spec);
    }
  }
  if (s.has("split")) {
    Section sp(s.at("split"), "split", {"calibration_fraction", "seed"});
    sp.read("calibration_fraction", c.calibration_fraction);
    sp.read("seed", c.split_seed);
  }
  s.read("timesteps_to_evaluate", c.timesteps_to_evaluate);
  if (s.has("variants")) {
    std::vector<std::string> names;
    s.read("variants", names);
    c.variants.clear();
    for (const std::string& n : names) {
      const pipeline::Variant v = pipeline::parse_variant(n);
      if (!c.wants(v)) c.variants.push_back(v);
    }
  }
  s.read("obj_cal_on_pw_cal", c.obj_cal_on_pw_cal);
  if (s.has("isotonic_mode")) {
    std::string mode;
    s.read("isotonic_mode", mode);
    if (mode == "interpolate") {
      c.isotonic_mode = calibrate::IsotonicMode::interpolate;
    } else if (mode == "step") {
      c.isotonic_mode = calibrate::IsotonicMode::step;
    } else {
      throw ConfigError("unknown isotonic_mode '" + mode + "'; valid: interpolate, step");
    }
  }
  s.read("pixel_stride", c.pixel_stride);
  s.read("scene_svg_count", c.scene_svg_count);
  s.read("scene_clip_log", c.scene_clip_log);
  s.read("reliability_bins_object", c.reliability_bins_object);
  s.read("reliability_bins_pixel", c.reliability_bins_pixel);
  validated([&] {
    c.extraction.validate();
    c.presence.validate();
  });
  if (c.variants.empty()) throw ConfigError("variants must not be empty");
  return c;
}

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

GenerateConfig load_generate_config(const fs::path& path) {
  return parse_generate_config(slurp(path), path.parent_path());
}

pipeline::RunConfig load_run_config(const fs::path& path) { return parse_run_config(slurp(path), path.parent_path()); }

}  // namespace bevcal::config
