#include "bevcal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "bevcal/parallel.hpp"
#include "bevcal/rng.hpp"

namespace bevcal::synth {

void DistortionSpec::validate() const {
  if (kind == DistortionKind::power && !(gamma > 0.0 && std::isfinite(gamma))) {
    throw ConfigError("distortion gamma must be > 0");
  }
  if (kind == DistortionKind::logistic_shift && !std::isfinite(shift)) {
    throw ConfigError("distortion shift must be finite");
  }
}

double DistortionSpec::apply(double q) const {
  q = std::clamp(q, 0.0, 1.0);
  switch (kind) {
    case DistortionKind::identity:
      return q;
    case DistortionKind::power:
      return std::pow(q, gamma);
    case DistortionKind::logistic_shift: {
      if (q <= 0.0) return 0.0;
      if (q >= 1.0) return 1.0;
      const double z = std::log(q) - std::log1p(-q) + shift;
      return 1.0 / (1.0 + std::exp(-z));
    }
  }
  return q;
}

void SynthObject::validate() const {
  if (pixel_footprint < 1) throw ValidationError("pixel_footprint must be >= 1");
  if (!(peak_intensity > 0.0 && peak_intensity <= 1.0)) throw ValidationError("peak_intensity must lie in (0, 1]");
  if (!(spread_cells > 0.0)) throw ValidationError("spread_cells must be > 0");
}

void SynthConfig::validate() const {
  try {
    meta.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("meta: ") + e.what());
  }
  if (num_episodes <= 0) throw ConfigError("num_episodes must be positive");
  if (frames_per_episode <= 0) throw ConfigError("frames_per_episode must be positive");
  if (!(objects_per_frame_mean > 0.0)) throw ConfigError("objects_per_frame_mean must be positive");
  if (!(occupancy_noise >= 0.0 && occupancy_noise < 0.5)) throw ConfigError("occupancy_noise must lie in [0, 0.5)");
  if (pixel_footprint < 1) throw ConfigError("pixel_footprint must be >= 1");
  if (!(peak_min > 0.0 && peak_min <= peak_max && peak_max <= 1.0)) {
    throw ConfigError("peak range must satisfy 0 < peak_min <= peak_max <= 1");
  }
  if (!(spread_cells > 0.0)) throw ConfigError("spread_cells must be > 0");
  if (spread_growth < 0.0 || location_noise_growth < 0.0) throw ConfigError("growth rates must be >= 0");
  if (location_noise_cells < 0.0) throw ConfigError("location_noise_cells must be >= 0");
  if (max_speed_cells < 0.0) throw ConfigError("max_speed_cells must be >= 0");
  if (min_object_separation_cells < 0.0) throw ConfigError("min_object_separation_cells must be >= 0");
  distortion.validate();
}

std::vector<Cell> footprint(const GridMeta& meta, Point2 center, int count) {
  const int radius = int(std::ceil(std::sqrt(double(count)))) + 1;
  const int r0 = int(std::lround(center.row));
  const int c0 = int(std::lround(center.col));
  struct Candidate {
    double d2;
    Cell cell;
  };
  std::vector<Candidate> candidates;
  for (int r = r0 - radius; r <= r0 + radius; ++r) {
    for (int c = c0 - radius; c <= c0 + radius; ++c) {
      if (!meta.contains(r, c)) continue;
      const double dr = r - center.row;
      const double dc = c - center.col;
      candidates.push_back({dr * dr + dc * dc, {r, c}});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return a.cell < b.cell;
  });
  std::vector<Cell> out;
  for (std::size_t i = 0; i < candidates.size() && int(out.size()) < count; ++i) out.push_back(candidates[i].cell);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

bool inside(const GridMeta& meta, Point2 p) {
  return p.row >= -0.5 && p.col >= -0.5 && p.row < double(meta.height_cells) - 0.5 &&
         p.col < double(meta.width_cells) - 0.5;
}

// Last timestep at which the object is still on the grid; -1 if never.
int last_visible(const GridMeta& meta, const SynthObject& obj) {
  int last = -1;
  for (int t = 0; t <= meta.num_future_steps; ++t) {
    if (!inside(meta, obj.position(t))) break;
    last = t;
  }
  return last;
}

double spread_at(const SynthConfig& config, const SynthObject& obj, int t) {
  return obj.spread_cells * (1.0 + config.spread_growth * t);
}

SynthScene sample_scene(const SynthConfig& config, Rng& rng) {
  const GridMeta& m = config.meta;
  SynthScene scene;
  const int n = rng.poisson(config.objects_per_frame_mean);
  const double margin = 2.0;
  const double sep2 = config.min_object_separation_cells * config.min_object_separation_cells;
  ObjectId next_id = 1;
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const double row = rng.uniform(margin, double(m.height_cells) - 1.0 - margin);
      const double col = rng.uniform(margin, double(m.width_cells) - 1.0 - margin);
      const bool clear = std::all_of(scene.objects.begin(), scene.objects.end(), [&](const SynthObject& o) {
        const double dr = o.start_row - row;
        const double dc = o.start_col - col;
        return dr * dr + dc * dc >= sep2;
      });
      if (!clear) continue;
      SynthObject obj;
      obj.object_id = next_id++;
      obj.start_row = row;
      obj.start_col = col;
      const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double speed = config.max_speed_cells * std::sqrt(rng.uniform());
      obj.velocity_row = speed * std::cos(heading);
      obj.velocity_col = speed * std::sin(heading);
      obj.pixel_footprint = config.pixel_footprint;
      obj.peak_intensity = rng.uniform(config.peak_min, config.peak_max);
      obj.spread_cells = config.spread_cells;
      obj.exists = config.existence_from_peak ? rng.uniform() < obj.peak_intensity : true;
      std::vector<Point2> offsets;
      for (int t = 0; t <= m.num_future_steps; ++t) {
        const double sd = config.location_noise_cells * (1.0 + config.location_noise_growth * t);
        const double dr = rng.normal() * sd;
        const double dc = rng.normal() * sd;
        offsets.push_back({dr, dc});
      }
      scene.objects.push_back(obj);
      scene.render_offsets.push_back(std::move(offsets));
      break;
    }
  }
  return scene;
}

}  // namespace

FrameRecord render_frame(const SynthConfig& config, const SynthScene& scene, std::string frame_id,
                         std::string episode_id) {
  const GridMeta& m = config.meta;
  const int h = int(m.height_cells);
  const int w = int(m.width_cells);
  FrameRecord record;
  record.frame_id = std::move(frame_id);
  record.episode_id = std::move(episode_id);

  std::vector<int> last(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    scene.objects[i].validate();
    last[i] = last_visible(m, scene.objects[i]);
  }

  for (int t = 0; t <= m.num_future_steps; ++t) {
    std::vector<double> field(m.cell_count(), config.occupancy_noise);
    std::vector<AnnotatedObject> instances;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      if (t > last[i]) continue;
      const SynthObject& obj = scene.objects[i];
      const Point2 truth = obj.position(t);
      const Point2 offset = i < scene.render_offsets.size() && std::size_t(t) < scene.render_offsets[i].size()
                                ? scene.render_offsets[i][std::size_t(t)]
                                : Point2{};
      const Point2 center{truth.row + offset.row, truth.col + offset.col};
      const double sigma = spread_at(config, obj, t);
      // Total bump mass is conserved as the spread widens.
      const double peak = obj.peak_intensity * (obj.spread_cells / sigma) * (obj.spread_cells / sigma);
      const double inv = 1.0 / (2.0 * sigma * sigma);
      const int reach = int(std::ceil(6.0 * sigma));
      const int rc = int(std::lround(center.row));
      const int cc = int(std::lround(center.col));
      for (int r = std::max(0, rc - reach); r <= std::min(h - 1, rc + reach); ++r) {
        for (int c = std::max(0, cc - reach); c <= std::min(w - 1, cc + reach); ++c) {
          const double dr = r - center.row;
          const double dc = c - center.col;
          field[m.index(r, c)] += peak * std::exp(-(dr * dr + dc * dc) * inv);
        }
      }
      if (obj.exists) {
        instances.push_back(AnnotatedObject::from_pixels(obj.object_id, footprint(m, truth, obj.pixel_footprint)));
      }
    }
    std::vector<float> cells(m.cell_count());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      cells[k] = float(config.distortion.apply(std::min(1.0, field[k])));
    }
    record.grids.emplace_back(m, t, std::move(cells));
    record.annotations.push_back(AnnotationMask::from_instances(m, t, std::move(instances)));
  }
  return record;
}

std::string episode_name(int episode_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ep%04d", episode_index);
  return buf;
}

std::string frame_name(int episode_index, int frame_index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "ep%04d-f%03d", episode_index, frame_index);
  return buf;
}

std::vector<FrameRecord> generate_episode(const SynthConfig& config, int episode_index) {
  Rng rng = Rng::stream(config.rng_seed, std::uint64_t(episode_index));
  std::vector<FrameRecord> frames;
  frames.reserve(std::size_t(config.frames_per_episode));
  for (int f = 0; f < config.frames_per_episode; ++f) {
    const SynthScene scene = sample_scene(config, rng);
    frames.push_back(render_frame(config, scene, frame_name(episode_index, f), episode_name(episode_index)));
  }
  return frames;
}

std::vector<FrameRecord> generate_dataset(const SynthConfig& config, unsigned threads) {
  config.validate();
  std::vector<std::vector<FrameRecord>> episodes(std::size_t(config.num_episodes));
  parallel_for(episodes.size(), threads, [&](std::size_t e) { episodes[e] = generate_episode(config, int(e)); });
  std::vector<FrameRecord> out;
  out.reserve(std::size_t(config.num_episodes) * std::size_t(config.frames_per_episode));
  for (auto& ep : episodes) {
    for (auto& f : ep) out.push_back(std::move(f));
  }
  return out;
}

bool oracle_presence(const FrameRecord& frame, const RegionSpec& region) {
  const AnnotationMask& ann = frame.annotations.front();
  for (const AnnotatedObject& obj : ann.instances()) {
    for (const Cell& px : obj.pixels) {
      if (region.contains(ann.meta(), px.row, px.col)) return true;
    }
  }
  return false;
}

}  // namespace bevcal::synth
