#include "bevcal/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace bevcal::evaluate {

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "metric,split,variant,value\n";
  for (const MetricRow& r : rows) out << r.metric << ',' << r.split << ',' << r.variant << ',' << format_real(r.value) << '\n';
  return out.str();
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "metric,split,variant,value") {
    throw FormatError("metrics.csv: missing header");
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    MetricRow row;
    std::string value;
    if (!std::getline(fields, row.metric, ',') || !std::getline(fields, row.split, ',') ||
        !std::getline(fields, row.variant, ',') || !std::getline(fields, value)) {
      throw FormatError("metrics.csv: malformed row: " + line);
    }
    const auto res = std::from_chars(value.data(), value.data() + value.size(), row.value);
    if (res.ec != std::errc()) throw FormatError("metrics.csv: bad value: " + value);
    rows.push_back(row);
  }
  return rows;
}

std::string reliability_csv(const ReliabilityReport& report) {
  std::ostringstream out;
  out << "bin_index,lo,hi,count,mean_conf,emp_freq,zero_positive\n";
  for (std::size_t i = 0; i < report.bins.size(); ++i) {
    const ReliabilityBin& b = report.bins[i];
    out << i << ',' << format_real(b.lo) << ',' << format_real(b.hi) << ',' << b.count << ','
        << format_real(b.mean_confidence) << ',' << format_real(b.empirical_frequency) << ','
        << (b.count > 0 && b.positives == 0 ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string regression_csv(const RegressionCurve& curve) {
  std::ostringstream out;
  out << "nominal,observed\n";
  for (std::size_t k = 0; k < curve.nominal.size(); ++k) {
    out << format_real(curve.nominal[k]) << ',' << format_real(curve.observed[k]) << '\n';
  }
  return out.str();
}

std::string matches_csv(const std::vector<match::MatchResult>& results) {
  std::ostringstream out;
  out << "frame_id,timestep,detection_id,object_id\n";
  for (const match::MatchResult& r : results) {
    for (const auto& [det, obj] : r.pairs) out << r.frame_id << ',' << r.timestep << ',' << det << ',' << obj << '\n';
    for (DetectionId det : r.unmatched_detections) out << r.frame_id << ',' << r.timestep << ',' << det << ",\n";
    for (ObjectId obj : r.unmatched_annotations) out << r.frame_id << ',' << r.timestep << ",," << obj << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace bevcal::evaluate
