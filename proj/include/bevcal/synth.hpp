#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevcal/core.hpp"
#include "bevcal/region.hpp"

namespace bevcal::synth {

enum class DistortionKind { identity, power, logistic_shift };

// Monotone map applied to the true occupancy probability before it is stored.
struct DistortionSpec {
  DistortionKind kind = DistortionKind::power;
  double gamma = 2.0;
  double shift = 0.0;

  void validate() const;
  double apply(double q) const;
};

struct SynthObject {
  ObjectId object_id = 0;
  double start_row = 0.0;
  double start_col = 0.0;
  double velocity_row = 0.0;  // cells per step
  double velocity_col = 0.0;
  int pixel_footprint = 5;
  double peak_intensity = 1.0;
  double spread_cells = 0.9;
  // False for rendered blobs that have no ground-truth counterpart.
  bool exists = true;

  void validate() const;
  Point2 position(int timestep) const {
    return {start_row + velocity_row * timestep, start_col + velocity_col * timestep};
  }
};

struct SynthConfig {
  GridMeta meta;
  int num_episodes = 20;
  int frames_per_episode = 10;
  double objects_per_frame_mean = 12.0;
  DistortionSpec distortion;
  double occupancy_noise = 0.001;
  std::uint64_t rng_seed = 7;

  // Object model.
  int pixel_footprint = 5;
  double peak_min = 0.02;
  double peak_max = 1.0;
  double spread_cells = 0.9;
  double spread_growth = 0.15;          // relative spread increase per step
  double location_noise_cells = 0.9;    // sd of the rendered-center error
  double location_noise_growth = 0.15;  // relative noise increase per step
  double max_speed_cells = 1.0;
  double min_object_separation_cells = 8.0;
  // Blob is annotated with probability peak_intensity; otherwise every blob is real.
  bool existence_from_peak = true;

  void validate() const;
};

// Scene of one frame before rendering.
struct SynthScene {
  std::vector<SynthObject> objects;
  // Rendered-center error per object and timestep, in cells.
  std::vector<std::vector<Point2>> render_offsets;
};

// Pixel footprint: the `count` cell centers nearest to `center` inside the
// grid, ties by (row, col).
std::vector<Cell> footprint(const GridMeta& meta, Point2 center, int count);

// Renders one frame from an explicit scene (used by generate_dataset and tests).
FrameRecord render_frame(const SynthConfig& config, const SynthScene& scene, std::string frame_id,
                         std::string episode_id);

// Deterministic for a fixed config; episodes use independent RNG streams so
// the output does not depend on generation order.
std::vector<FrameRecord> generate_episode(const SynthConfig& config, int episode_index);
std::vector<FrameRecord> generate_dataset(const SynthConfig& config, unsigned threads = 1);

std::string episode_name(int episode_index);
std::string frame_name(int episode_index, int frame_index);

// True iff an annotated pixel at timestep 0 lies in the closed region.
bool oracle_presence(const FrameRecord& frame, const RegionSpec& region);

}  // namespace bevcal::synth
