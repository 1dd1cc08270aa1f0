#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bevcal/core.hpp"

namespace bevcal::evaluate {

enum class Binning { equal_width, equal_size };

struct ReliabilityBin {
  std::size_t count = 0;
  double lo = 0.0;  // score range covered by the bin
  double hi = 0.0;
  double mean_confidence = 0.0;
  double empirical_frequency = 0.0;
  std::size_t positives = 0;
};

struct ReliabilityReport {
  Binning binning = Binning::equal_width;
  int num_bins = 10;
  std::vector<ReliabilityBin> bins;
  std::size_t total = 0;
  double ece = 0.0;
  double nll = 0.0;
};

struct RegressionCurve {
  static constexpr int kSteps = 100;
  std::array<double, kSteps + 1> nominal{};
  std::array<double, kSteps + 1> observed{};

  // sup |observed - nominal|
  double max_deviation() const;
};

// Instances sharing one score, aggregated.
struct WeightedScore {
  double p = 0.0;
  std::uint64_t count = 0;
  std::uint64_t positives = 0;
};

inline constexpr double kNllClamp = 1e-12;

ReliabilityReport compute_reliability(std::span<const ScoredLabel> pairs, Binning binning, int num_bins);
// Same statistics from aggregated instances; `scores` need not be sorted.
ReliabilityReport compute_reliability(std::vector<WeightedScore> scores, Binning binning, int num_bins);

double expected_calibration_error(std::span<const ScoredLabel> pairs, Binning binning, int num_bins);

double negative_log_likelihood(std::span<const ScoredLabel> pairs);

// Observed frequency of quantiles <= k/100 for k = 0..100.
RegressionCurve compute_regression_curve(std::span<const double> quantiles);

// Kolmogorov-Smirnov distance of the sample to Uniform(0, 1).
double ks_uniform(std::span<const double> sample);

}  // namespace bevcal::evaluate
