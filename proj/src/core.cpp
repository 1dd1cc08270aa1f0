#include "bevcal/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bevcal {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

// Centers are stored in single precision, so the mean check tolerates float rounding.
bool center_close(float stored, double exact) {
  return std::abs(double(stored) - exact) <= 1e-9 + 1e-6 * std::max(1.0, std::abs(exact));
}

}  // namespace

void GridMeta::validate() const {
  require(height_cells > 0, "height_cells must be positive");
  require(width_cells > 0, "width_cells must be positive");
  require(std::isfinite(cell_size_m) && cell_size_m > 0.0F, "cell_size_m must be positive");
  require(std::isfinite(ego_row) && ego_row >= 0.0F && ego_row < float(height_cells),
          "ego_row outside grid");
  require(std::isfinite(ego_col) && ego_col >= 0.0F && ego_col < float(width_cells),
          "ego_col outside grid");
  require(std::isfinite(step_seconds) && step_seconds > 0.0F, "step_seconds must be positive");
}

ProbGrid::ProbGrid(GridMeta meta, int timestep, std::vector<float> cells)
    : meta_(meta), timestep_(timestep), cells_(std::move(cells)) {
  meta_.validate();
  require(timestep_ >= 0 && timestep_ <= meta_.num_future_steps, "timestep outside [0, num_future_steps]");
  require(cells_.size() == meta_.cell_count(), "cells length does not match height_cells*width_cells");
  for (float p : cells_) {
    if (!std::isfinite(p)) throw ValidationError("cell probability is not finite");
    if (p < 0.0F || p > 1.0F) throw ValidationError("cell probability out of range");
  }
}

ProbGrid ProbGrid::zeros(const GridMeta& meta, int timestep) {
  return ProbGrid(meta, timestep, std::vector<float>(meta.cell_count(), 0.0F));
}

AnnotatedObject AnnotatedObject::from_pixels(ObjectId id, std::vector<Cell> pixels) {
  require(!pixels.empty(), "annotated object has no pixels");
  double sr = 0.0;
  double sc = 0.0;
  for (const Cell& px : pixels) {
    sr += px.row;
    sc += px.col;
  }
  const double n = double(pixels.size());
  return AnnotatedObject{id, float(sr / n), float(sc / n), std::move(pixels)};
}

void AnnotatedObject::validate() const {
  require(!pixels.empty(), "annotated object has no pixels");
  double sr = 0.0;
  double sc = 0.0;
  for (const Cell& px : pixels) {
    sr += px.row;
    sc += px.col;
  }
  const double n = double(pixels.size());
  require(center_close(center_row, sr / n) && center_close(center_col, sc / n),
          "annotation center is not the pixel mean");
}

AnnotationMask::AnnotationMask(GridMeta meta, int timestep, std::vector<std::uint8_t> occupied,
                               std::vector<AnnotatedObject> instances)
    : meta_(meta), timestep_(timestep), occupied_(std::move(occupied)), instances_(std::move(instances)) {
  meta_.validate();
  require(occupied_.size() == meta_.cell_count(), "occupied length does not match height_cells*width_cells");
  for (std::uint8_t v : occupied_) require(v <= 1, "occupied values must be 0 or 1");
  for (const AnnotatedObject& obj : instances_) {
    obj.validate();
    for (const Cell& px : obj.pixels) {
      require(meta_.contains(px.row, px.col), "annotation pixel outside grid");
      require(occupied_[meta_.index(px.row, px.col)] != 0, "annotation pixel not marked occupied");
    }
  }
}

AnnotationMask AnnotationMask::from_instances(const GridMeta& meta, int timestep,
                                              std::vector<AnnotatedObject> instances) {
  std::vector<std::uint8_t> occupied(meta.cell_count(), 0);
  for (const AnnotatedObject& obj : instances) {
    for (const Cell& px : obj.pixels) {
      if (meta.contains(px.row, px.col)) occupied[meta.index(px.row, px.col)] = 1;
    }
  }
  return AnnotationMask(meta, timestep, std::move(occupied), std::move(instances));
}

std::pair<double, double> Cov2::eigenvalues() const {
  const double half_trace = 0.5 * (rr + cc);
  const double d = std::sqrt(0.25 * (rr - cc) * (rr - cc) + rc * rc);
  return {half_trace - d, half_trace + d};
}

void Gaussian2D::validate() const {
  require(std::isfinite(mean.row) && std::isfinite(mean.col), "gaussian mean is not finite");
  require(std::isfinite(cov.rr) && std::isfinite(cov.rc) && std::isfinite(cov.cc), "covariance is not finite");
  require(cov.eigenvalues().first > 0.0, "covariance is not positive definite");
}

void DetectedObject::validate() const {
  require(shape_pixels > 0.0, "shape_pixels must be positive");
  for (const auto& [t, g] : location) g.validate();
  for (const auto& [t, p] : presence) {
    require(p >= 0.0 && p <= 1.0, "presence outside [0, 1]");
    require(location.count(t) != 0, "presence timestep has no location");
  }
}

void FrameRecord::validate() const {
  require(!grids.empty(), "grids must not be empty");
  const GridMeta& m = grids.front().meta();
  require(grids.size() == std::size_t{m.num_future_steps} + 1, "grids must cover timesteps 0..num_future_steps");
  require(annotations.size() == grids.size(), "annotations timesteps differ from grids");
  for (std::size_t t = 0; t < grids.size(); ++t) {
    require(grids[t].meta() == m, "grids do not share one GridMeta");
    require(annotations[t].meta() == m, "annotations do not share the grid GridMeta");
    require(grids[t].timestep() == int(t), "grid timestep out of order");
    require(annotations[t].timestep() == int(t), "annotation timestep out of order");
  }
  for (const DetectedObject& d : detections) d.validate();
}

}  // namespace bevcal
