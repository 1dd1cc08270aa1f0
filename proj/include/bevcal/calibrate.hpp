#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bevcal/core.hpp"

namespace bevcal::calibrate {

enum class IsotonicMode { interpolate, step };

// Monotone map fitted by pool-adjacent-violators. Breakpoints are the
// weighted mean scores of the pooled blocks.
struct IsotonicMap {
  std::vector<double> breakpoints;
  std::vector<double> values;
  double clip_floor = 0.0;
  IsotonicMode mode = IsotonicMode::interpolate;

  double apply(double score) const;
};

// sigmoid(a ln p - b ln(1 - p) + c) with a, b >= 0.
struct BetaMap {
  double a = 1.0;
  double b = 1.0;
  double c = 0.0;

  double apply(double p) const;
};

// Empirical CDF of quantile observations on the 0.01 lattice, anchored at
// (0, 0) and (1, 1), linearly interpolated in between.
struct QuantileMap {
  static constexpr int kSteps = 100;
  std::array<double, kSteps + 1> frequency{};

  double apply(double q) const;
  static QuantileMap identity();
};

// Aggregates (score, label) instances by distinct score.
class ScoreHistogram {
 public:
  void add(double score, int label, std::uint64_t count = 1);
  void merge(const ScoreHistogram& other);
  std::uint64_t instances() const { return instances_; }
  std::size_t distinct() const { return bins_.size(); }
  const std::map<double, std::pair<std::uint64_t, std::uint64_t>>& bins() const { return bins_; }

 private:
  std::map<double, std::pair<std::uint64_t, std::uint64_t>> bins_;  // score -> (count, positives)
  std::uint64_t instances_ = 0;
};

struct Block {
  double score_sum = 0.0;
  double weight = 0.0;
  double label_sum = 0.0;
  std::size_t first = 0;  // index range in the sorted distinct scores
  std::size_t last = 0;

  double value() const { return label_sum / weight; }
};

// Pool-adjacent-violators on distinct sorted scores with weights. Returns the
// pooled blocks in increasing score order.
std::vector<Block> pava(std::span<const double> scores, std::span<const double> weights,
                        std::span<const double> label_sums);

// Least-squares non-decreasing fit, one value per input pair (input order,
// tied scores pooled). No clipping.
std::vector<double> isotonic_fitted_values(std::span<const ScoredLabel> pairs);

IsotonicMap fit_isotonic(std::span<const ScoredLabel> pairs, IsotonicMode mode = IsotonicMode::interpolate);
IsotonicMap fit_isotonic(const ScoreHistogram& histogram, IsotonicMode mode = IsotonicMode::interpolate);

struct BetaFitOptions {
  double tolerance = 1e-8;
  int max_iters = 10000;
};

// Maximum-likelihood beta calibration by damped Newton; negative a or b is
// pinned to zero and the remaining parameters refit.
BetaMap fit_beta(std::span<const ScoredLabel> pairs, const BetaFitOptions& options = {});

QuantileMap fit_quantile_map(std::span<const double> quantiles);

ProbGrid calibrate_grid(const ProbGrid& grid, const IsotonicMap& map);

using CalibrationMap = std::variant<IsotonicMap, BetaMap, QuantileMap>;

struct CalibFile {
  CalibrationMap map;
  std::map<std::string, std::string> metadata;
};

// Versioned text serialization; reals use shortest round-trip formatting so
// a reload reproduces every parameter bit for bit.
std::string to_calib_text(const CalibFile& file);
CalibFile from_calib_text(const std::string& text);
void write_calib(const std::filesystem::path& path, const CalibFile& file);
CalibFile read_calib(const std::filesystem::path& path);

}  // namespace bevcal::calibrate
