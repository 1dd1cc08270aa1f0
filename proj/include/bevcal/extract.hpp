#pragma once

#include <vector>

#include "bevcal/core.hpp"

namespace bevcal::extract {

struct ExtractionConfig {
  double p_thresh = 0.01;
  double m_thresh = 100.0;
  int max_components = 32;
  int em_max_iters = 200;
  double em_tol = 1e-6;  // relative log-likelihood improvement
  double cov_reg = 1e-4;
  double min_seed_separation_cells = 3.0;
  double gating_cells_per_step = 10.0;

  void validate() const;
};

struct SamplePoint {
  Point2 pos;
  int multiplicity = 1;
};

// Cell centers of above-threshold cells with integer multiplicities; the
// weighted set stands in for repeating each cell `multiplicity` times.
struct SamplePoints {
  std::vector<SamplePoint> points;

  double total_weight() const;
};

struct Component {
  Gaussian2D gaussian;
  double weight = 0.0;
};

struct GmmFit {
  std::vector<Component> components;
  // Weighted log-likelihood after initialization and after every EM iteration.
  std::vector<double> log_likelihood;
  int iterations = 0;
};

// Round half away from zero, floored at 1.
int multiplicity(double p, double m_thresh);

// Local maxima >= p_thresh, strongest first, with greedy suppression of any
// maximum closer than min_seed_separation_cells to an accepted one.
std::vector<Cell> seed_clusters(const ProbGrid& grid, const ExtractionConfig& config);

SamplePoints build_sample_points(const ProbGrid& grid, const ExtractionConfig& config);

// Weighted EM with one component per seed.
GmmFit fit_gmm(const SamplePoints& points, const std::vector<Cell>& seeds, const ExtractionConfig& config);

// Seeds, samples and fits every timestep independently, then chains
// future-timestep components onto timestep-0 detections by nearest mean.
// Presence is left empty.
std::vector<DetectedObject> extract_objects(const FrameRecord& frame, const ExtractionConfig& config,
                                            double shape_pixels = 5.0);

}  // namespace bevcal::extract
