#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bevcal/core.hpp"
#include "bevcal/metrics.hpp"
#include "bevcal/region.hpp"

namespace bevcal::evaluate {

struct ReliabilitySvgOptions {
  std::string title;
  bool log_axes = false;
  double log_axis_min = 1e-4;  // smallest tick on log axes; smaller values clamp here
};

// Reliability diagram with tilted-roof bars (slope-1 roof through each bin's
// (mean confidence, frequency) point), red mean-confidence dots, the diagonal,
// and a log-scaled count histogram underneath.
std::string reliability_svg(const ReliabilityReport& report, const ReliabilitySvgOptions& options = {});
void render_reliability_svg(const ReliabilityReport& report, const std::filesystem::path& path,
                            const ReliabilitySvgOptions& options = {});

struct SceneSvgOptions {
  double clip_log = -12.0;   // natural-log floor of the raster
  double ellipse_mass = 0.99;
  int timestep = 0;
  int pixels_per_cell = 3;
};

// Cells drawn above the floor color at the given natural-log clip.
std::size_t visible_cells(const ProbGrid& grid, double clip_log);

// Log-scale grid raster with detection ellipses, dashed region rectangles and
// the ego cell. Forward (increasing row) points up.
std::string scene_svg(const FrameRecord& frame, const std::vector<DetectedObject>& detections,
                      const std::vector<RegionSpec>& regions, const SceneSvgOptions& options = {});
void render_scene_svg(const FrameRecord& frame, const std::vector<DetectedObject>& detections,
                      const std::vector<RegionSpec>& regions, const std::filesystem::path& path,
                      const SceneSvgOptions& options = {});

}  // namespace bevcal::evaluate
