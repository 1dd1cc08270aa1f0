#include "bevcal/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace bevcal::evaluate {

namespace {

double clamped_log_loss(double p, bool positive) {
  const double q = std::clamp(p, kNllClamp, 1.0 - kNllClamp);
  return positive ? -std::log(q) : -std::log1p(-q);
}

void finish(ReliabilityReport& report, const std::vector<double>& conf_sum) {
  report.ece = 0.0;
  for (std::size_t i = 0; i < report.bins.size(); ++i) {
    ReliabilityBin& b = report.bins[i];
    if (b.count == 0) continue;
    b.mean_confidence = conf_sum[i] / double(b.count);
    b.empirical_frequency = double(b.positives) / double(b.count);
    report.ece += double(b.count) / double(report.total) * std::abs(b.mean_confidence - b.empirical_frequency);
  }
}

}  // namespace

ReliabilityReport compute_reliability(std::vector<WeightedScore> scores, Binning binning, int num_bins) {
  if (num_bins < 1) throw ValidationError("num_bins must be >= 1");
  std::sort(scores.begin(), scores.end(), [](const WeightedScore& a, const WeightedScore& b) { return a.p < b.p; });
  // Merge equal scores so duplicate handling is exact.
  std::vector<WeightedScore> merged;
  for (const WeightedScore& s : scores) {
    if (s.count == 0) continue;
    if (!merged.empty() && merged.back().p == s.p) {
      merged.back().count += s.count;
      merged.back().positives += s.positives;
    } else {
      merged.push_back(s);
    }
  }
  ReliabilityReport report;
  report.binning = binning;
  report.num_bins = num_bins;
  report.bins.resize(std::size_t(num_bins));
  for (const WeightedScore& s : merged) report.total += s.count;
  if (report.total == 0) throw ValidationError("reliability needs at least one instance");

  std::vector<double> conf_sum(report.bins.size(), 0.0);
  double nll = 0.0;
  for (const WeightedScore& s : merged) {
    nll += double(s.positives) * clamped_log_loss(s.p, true) +
           double(s.count - s.positives) * clamped_log_loss(s.p, false);
  }
  report.nll = nll / double(report.total);

  const auto nb = std::size_t(num_bins);
  if (binning == Binning::equal_width) {
    for (std::size_t i = 0; i < nb; ++i) {
      report.bins[i].lo = double(i) / double(nb);
      report.bins[i].hi = double(i + 1) / double(nb);
    }
    for (const WeightedScore& s : merged) {
      const double p = std::clamp(s.p, 0.0, 1.0);
      const std::size_t i = std::min(nb - 1, std::size_t(p * double(nb)));
      report.bins[i].count += s.count;
      report.bins[i].positives += s.positives;
      conf_sum[i] += s.p * double(s.count);
    }
  } else {
    // Nominal item boundaries i*n/B; a boundary landing inside a run of equal
    // scores moves to the end of that run (the earlier bin grows).
    std::size_t entry = 0;
    std::uint64_t consumed = 0;  // items assigned so far
    for (std::size_t i = 0; i < nb; ++i) {
      const std::uint64_t nominal = (i + 1 == nb) ? report.total : report.total * (i + 1) / nb;
      ReliabilityBin& b = report.bins[i];
      b.lo = entry < merged.size() ? merged[entry].p : (merged.empty() ? 0.0 : merged.back().p);
      b.hi = b.lo;
      while (entry < merged.size() && consumed < nominal) {
        const WeightedScore& s = merged[entry];
        b.count += s.count;
        b.positives += s.positives;
        conf_sum[i] += s.p * double(s.count);
        b.hi = s.p;
        consumed += s.count;
        ++entry;
      }
    }
  }
  finish(report, conf_sum);
  return report;
}

ReliabilityReport compute_reliability(std::span<const ScoredLabel> pairs, Binning binning, int num_bins) {
  if (pairs.empty()) throw ValidationError("reliability needs at least one instance");
  std::vector<WeightedScore> scores;
  scores.reserve(pairs.size());
  for (const ScoredLabel& s : pairs) scores.push_back({s.p, 1, s.label != 0 ? 1U : 0U});
  return compute_reliability(std::move(scores), binning, num_bins);
}

double expected_calibration_error(std::span<const ScoredLabel> pairs, Binning binning, int num_bins) {
  return compute_reliability(pairs, binning, num_bins).ece;
}

double negative_log_likelihood(std::span<const ScoredLabel> pairs) {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const ScoredLabel& s : pairs) sum += clamped_log_loss(s.p, s.label != 0);
  return sum / double(pairs.size());
}

double RegressionCurve::max_deviation() const {
  double worst = 0.0;
  for (std::size_t k = 0; k < nominal.size(); ++k) worst = std::max(worst, std::abs(observed[k] - nominal[k]));
  return worst;
}

RegressionCurve compute_regression_curve(std::span<const double> quantiles) {
  if (quantiles.empty()) throw ValidationError("regression curve needs at least one quantile");
  std::vector<double> sorted(quantiles.begin(), quantiles.end());
  std::sort(sorted.begin(), sorted.end());
  RegressionCurve curve;
  for (int k = 0; k <= RegressionCurve::kSteps; ++k) {
    const double level = double(k) / RegressionCurve::kSteps;
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), level) - sorted.begin();
    curve.nominal[std::size_t(k)] = level;
    curve.observed[std::size_t(k)] = double(below) / double(sorted.size());
  }
  return curve;
}

double ks_uniform(std::span<const double> sample) {
  if (sample.empty()) return 1.0;
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = double(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = std::clamp(sorted[i], 0.0, 1.0);
    d = std::max({d, double(i + 1) / n - x, x - double(i) / n});
  }
  return d;
}

}  // namespace bevcal::evaluate
