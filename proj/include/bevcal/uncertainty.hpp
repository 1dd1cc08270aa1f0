#pragma once

#include <vector>

#include "bevcal/core.hpp"
#include "bevcal/region.hpp"

namespace bevcal::uncertainty {

struct PresenceConfig {
  double ellipse_mass = 0.99;
  double shape_pixels = 5.0;

  void validate() const;
};

struct LocationQuantiles {
  DetectionId detection_id = 0;
  int timestep = 0;
  double q_direction = 0.5;  // lateral axis, perpendicular to the ego ray
  double q_distance = 0.5;   // along the ego ray
};

// Chi-square quantile with two degrees of freedom: -2 ln(1 - mass).
double chi2_2dof_quantile(double mass);

double normal_cdf(double z);

bool in_ellipse(const Gaussian2D& g, double threshold, double row, double col);

// Cells whose centers lie inside the `mass` confidence ellipse, row-major.
std::vector<Cell> ellipse_cells(const Gaussian2D& g, double mass, const GridMeta& meta);

// min(1, sum of cell probabilities in the ellipse / shape_pixels).
double presence_probability(const ProbGrid& grid, const Gaussian2D& g, const PresenceConfig& config);

// Probability mass of the region left after removing every detection's
// timestep-0 ellipse, normalized by shape_pixels and clipped at 1.
double undetected_area_probability(const ProbGrid& grid, const std::vector<DetectedObject>& detections,
                                   const RegionSpec& region, const PresenceConfig& config);

// Fills detection.presence for every timestep with a location.
void assign_presence(const FrameRecord& frame, std::vector<DetectedObject>& detections,
                     const PresenceConfig& config);

// Quantiles of the annotation center under the two 1D marginals of the
// detection's Gaussian, taken along and across the ray from the ego vehicle.
// Throws ValidationError("degenerate direction") when the mean sits on the ego.
LocationQuantiles location_quantiles(const DetectedObject& detection, int timestep,
                                     const AnnotatedObject& annotation, const GridMeta& meta);

}  // namespace bevcal::uncertainty
