#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bevcal/match.hpp"
#include "bevcal/metrics.hpp"

namespace bevcal::evaluate {

// One row of metrics.csv. Metric names carry the timestep as a `_f<t>`
// suffix, e.g. ece_presence_f0.
struct MetricRow {
  std::string metric;
  std::string split;
  std::string variant;  // uncal | pw-cal | obj-cal
  double value = 0.0;
};

// Shortest round-trip decimal.
std::string format_real(double v);

std::string metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);

// bin_index,lo,hi,count,mean_conf,emp_freq,zero_positive
std::string reliability_csv(const ReliabilityReport& report);
// nominal,observed
std::string regression_csv(const RegressionCurve& curve);
// frame_id,timestep,detection_id,object_id; unmatched rows leave the counterpart empty
std::string matches_csv(const std::vector<match::MatchResult>& results);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bevcal::evaluate
