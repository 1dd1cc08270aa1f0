#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bevcal {

// Error hierarchy shared by every module.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct LengthError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

using ObjectId = std::uint32_t;
using DetectionId = std::uint32_t;

// Probability paired with a binary outcome.
struct ScoredLabel {
  double p = 0.0;
  int label = 0;
};

struct Cell {
  int row = 0;
  int col = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

// Continuous grid coordinate. Cell (r, c) has its center at (r, c); rows grow
// in the forward direction away from the bottom edge.
struct Point2 {
  double row = 0.0;
  double col = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// Spatial metadata of a BEV grid. Real fields are single precision because
// that is what the on-disk format stores.
struct GridMeta {
  std::uint32_t height_cells = 200;
  std::uint32_t width_cells = 200;
  float cell_size_m = 0.5F;
  float ego_row = 99.5F;
  float ego_col = 99.5F;
  std::uint16_t num_future_steps = 4;
  float step_seconds = 1.0F;

  void validate() const;
  std::size_t cell_count() const { return std::size_t{height_cells} * width_cells; }
  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < static_cast<int>(height_cells) && col < static_cast<int>(width_cells);
  }
  std::size_t index(int row, int col) const { return std::size_t(row) * width_cells + std::size_t(col); }
  Point2 ego() const { return {ego_row, ego_col}; }

  friend bool operator==(const GridMeta&, const GridMeta&) = default;
};

// One timestep of per-cell occupancy probabilities (row-major).
class ProbGrid {
 public:
  ProbGrid() = default;
  // Throws ValidationError on size mismatch, NaN/Inf or any value outside [0, 1].
  ProbGrid(GridMeta meta, int timestep, std::vector<float> cells);

  // All-zero grid.
  static ProbGrid zeros(const GridMeta& meta, int timestep);

  const GridMeta& meta() const { return meta_; }
  int timestep() const { return timestep_; }
  const std::vector<float>& cells() const { return cells_; }
  float at(int row, int col) const { return cells_[meta_.index(row, col)]; }

  friend bool operator==(const ProbGrid&, const ProbGrid&) = default;

 private:
  GridMeta meta_;
  int timestep_ = 0;
  std::vector<float> cells_;
};

struct AnnotatedObject {
  ObjectId object_id = 0;
  float center_row = 0.0F;
  float center_col = 0.0F;
  std::vector<Cell> pixels;

  // Builds an object whose center is the mean of its pixel coordinates.
  static AnnotatedObject from_pixels(ObjectId id, std::vector<Cell> pixels);

  Point2 center() const { return {center_row, center_col}; }
  void validate() const;

  friend bool operator==(const AnnotatedObject&, const AnnotatedObject&) = default;
};

class AnnotationMask {
 public:
  AnnotationMask() = default;
  AnnotationMask(GridMeta meta, int timestep, std::vector<std::uint8_t> occupied,
                 std::vector<AnnotatedObject> instances);

  // Builds the occupancy layer as the union of instance pixels.
  static AnnotationMask from_instances(const GridMeta& meta, int timestep, std::vector<AnnotatedObject> instances);

  const GridMeta& meta() const { return meta_; }
  int timestep() const { return timestep_; }
  const std::vector<std::uint8_t>& occupied() const { return occupied_; }
  const std::vector<AnnotatedObject>& instances() const { return instances_; }
  bool is_occupied(int row, int col) const { return occupied_[meta_.index(row, col)] != 0; }

  friend bool operator==(const AnnotationMask&, const AnnotationMask&) = default;

 private:
  GridMeta meta_;
  int timestep_ = 0;
  std::vector<std::uint8_t> occupied_;
  std::vector<AnnotatedObject> instances_;
};

// Symmetric 2x2 covariance in (row, col) order, units of cells squared.
struct Cov2 {
  double rr = 1.0;
  double rc = 0.0;
  double cc = 1.0;

  double det() const { return rr * cc - rc * rc; }
  double trace() const { return rr + cc; }
  bool positive_definite() const { return rr > 0.0 && det() > 0.0; }
  // Eigenvalues in ascending order.
  std::pair<double, double> eigenvalues() const;
  // uᵀ Σ u
  double quad(double ur, double uc) const { return ur * ur * rr + 2.0 * ur * uc * rc + uc * uc * cc; }
  // (d)ᵀ Σ⁻¹ (d)
  double mahalanobis2(double dr, double dc) const {
    return (dr * dr * cc - 2.0 * dr * dc * rc + dc * dc * rr) / det();
  }

  friend bool operator==(const Cov2&, const Cov2&) = default;
};

struct Gaussian2D {
  Point2 mean;
  Cov2 cov;

  void validate() const;

  friend bool operator==(const Gaussian2D&, const Gaussian2D&) = default;
};

struct DetectedObject {
  DetectionId detection_id = 0;
  std::map<int, Gaussian2D> location;
  std::map<int, double> mixing_weight;
  std::map<int, double> presence;
  double shape_pixels = 5.0;
  std::map<int, std::vector<ObjectId>> matched_annotations;

  void validate() const;
};

struct FrameRecord {
  std::string frame_id;
  std::string episode_id;
  std::vector<ProbGrid> grids;              // indexed by timestep 0..num_future_steps
  std::vector<AnnotationMask> annotations;  // same indexing
  std::vector<DetectedObject> detections;

  const GridMeta& meta() const { return grids.front().meta(); }
  int num_timesteps() const { return static_cast<int>(grids.size()); }
  // Throws ValidationError naming the offending field.
  void validate() const;
};

}  // namespace bevcal
