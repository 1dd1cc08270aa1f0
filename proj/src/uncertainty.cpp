#include "bevcal/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bevcal::uncertainty {

void PresenceConfig::validate() const {
  if (!(ellipse_mass > 0.0 && ellipse_mass < 1.0)) throw ConfigError("ellipse_mass must lie in (0, 1)");
  if (!(shape_pixels > 0.0)) throw ConfigError("shape_pixels must be positive");
}

double chi2_2dof_quantile(double mass) {
  return -2.0 * std::log1p(-mass);
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

bool in_ellipse(const Gaussian2D& g, double threshold, double row, double col) {
  return g.cov.mahalanobis2(row - g.mean.row, col - g.mean.col) <= threshold;
}

std::vector<Cell> ellipse_cells(const Gaussian2D& g, double mass, const GridMeta& meta) {
  const double thr = chi2_2dof_quantile(mass);
  const double half_r = std::sqrt(thr * g.cov.rr);
  const double half_c = std::sqrt(thr * g.cov.cc);
  const double h = double(meta.height_cells) - 1.0;
  const double w = double(meta.width_cells) - 1.0;
  // Bounding box padded by a cell; membership is decided by in_ellipse.
  const double lo_r = std::max(0.0, std::ceil(g.mean.row - half_r) - 1.0);
  const double hi_r = std::min(h, std::floor(g.mean.row + half_r) + 1.0);
  const double lo_c = std::max(0.0, std::ceil(g.mean.col - half_c) - 1.0);
  const double hi_c = std::min(w, std::floor(g.mean.col + half_c) + 1.0);
  std::vector<Cell> out;
  if (lo_r > hi_r || lo_c > hi_c) return out;
  for (int r = int(lo_r); r <= int(hi_r); ++r) {
    for (int c = int(lo_c); c <= int(hi_c); ++c) {
      if (in_ellipse(g, thr, r, c)) out.push_back({r, c});
    }
  }
  return out;
}

double presence_probability(const ProbGrid& grid, const Gaussian2D& g, const PresenceConfig& config) {
  double mass = 0.0;
  for (const Cell& cell : ellipse_cells(g, config.ellipse_mass, grid.meta())) mass += grid.at(cell.row, cell.col);
  return std::min(1.0, mass / config.shape_pixels);
}

double undetected_area_probability(const ProbGrid& grid, const std::vector<DetectedObject>& detections,
                                   const RegionSpec& region, const PresenceConfig& config) {
  const GridMeta& meta = grid.meta();
  const double thr = chi2_2dof_quantile(config.ellipse_mass);
  std::vector<const Gaussian2D*> ellipses;
  for (const DetectedObject& d : detections) {
    auto it = d.location.find(0);
    if (it != d.location.end()) ellipses.push_back(&it->second);
  }
  double mass = 0.0;
  for (const Cell& cell : region.cells(meta)) {
    const bool covered = std::any_of(ellipses.begin(), ellipses.end(), [&](const Gaussian2D* g) {
      return in_ellipse(*g, thr, cell.row, cell.col);
    });
    if (!covered) mass += grid.at(cell.row, cell.col);
  }
  return std::min(1.0, mass / config.shape_pixels);
}

void assign_presence(const FrameRecord& frame, std::vector<DetectedObject>& detections,
                     const PresenceConfig& config) {
  for (DetectedObject& d : detections) {
    PresenceConfig per = config;
    per.shape_pixels = d.shape_pixels;
    for (const auto& [t, g] : d.location) {
      d.presence[t] = presence_probability(frame.grids[std::size_t(t)], g, per);
    }
  }
}

LocationQuantiles location_quantiles(const DetectedObject& detection, int timestep,
                                     const AnnotatedObject& annotation, const GridMeta& meta) {
  auto it = detection.location.find(timestep);
  if (it == detection.location.end()) throw ValidationError("detection has no location at timestep");
  const Gaussian2D& g = it->second;
  const Point2 ego = meta.ego();
  const double vr = g.mean.row - ego.row;
  const double vc = g.mean.col - ego.col;
  const double norm = std::hypot(vr, vc);
  if (!(norm > 0.0)) throw ValidationError("degenerate direction");
  // u_y points from the ego toward the mean; u_x is u_y rotated +90 degrees.
  const double yr = vr / norm;
  const double yc = vc / norm;
  const double xr = -yc;
  const double xc = yr;
  const Point2 a = annotation.center();
  const double ar = a.row - ego.row;
  const double ac = a.col - ego.col;
  const double y_obs = yr * ar + yc * ac;
  const double x_obs = xr * ar + xc * ac;
  const double y_mean = yr * vr + yc * vc;
  const double x_mean = xr * vr + xc * vc;
  const double y_sd = std::sqrt(g.cov.quad(yr, yc));
  const double x_sd = std::sqrt(g.cov.quad(xr, xc));
  LocationQuantiles q;
  q.detection_id = detection.detection_id;
  q.timestep = timestep;
  q.q_distance = normal_cdf((y_obs - y_mean) / y_sd);
  q.q_direction = normal_cdf((x_obs - x_mean) / x_sd);
  return q;
}

}  // namespace bevcal::uncertainty
