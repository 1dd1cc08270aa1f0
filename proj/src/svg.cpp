#include "bevcal/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bevcal/uncertainty.hpp"

namespace bevcal::evaluate {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void save(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

// Maps a probability onto [0, 1] of the axis, linear or log10.
struct Axis {
  bool log = false;
  double min = 1e-4;

  double operator()(double v) const {
    if (!log) return std::clamp(v, 0.0, 1.0);
    const double lo = std::log10(min);
    const double x = std::log10(std::clamp(v, min, 1.0));
    return (x - lo) / (0.0 - lo);
  }
};

// Viridis-like ramp.
std::array<int, 3> ramp(double t) {
  static constexpr std::array<std::array<double, 3>, 5> anchors{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * double(anchors.size() - 1);
  const auto i = std::min(anchors.size() - 2, std::size_t(t));
  const double f = t - double(i);
  std::array<int, 3> rgb{};
  for (std::size_t k = 0; k < 3; ++k) rgb[k] = int(std::lround(anchors[i][k] + f * (anchors[i + 1][k] - anchors[i][k])));
  return rgb;
}

std::string rgb_string(const std::array<int, 3>& c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

}  // namespace

std::string reliability_svg(const ReliabilityReport& report, const ReliabilitySvgOptions& options) {
  constexpr double kLeft = 60.0;
  constexpr double kTop = 30.0;
  constexpr double kSize = 360.0;
  constexpr double kHistTop = kTop + kSize + 30.0;
  constexpr double kHistHeight = 90.0;
  const Axis axis{options.log_axes, options.log_axis_min};
  auto px = [&](double v) { return kLeft + axis(v) * kSize; };
  auto py = [&](double v) { return kTop + (1.0 - axis(v)) * kSize; };

  std::ostringstream s;
  s << R"(<?xml version="1.0" encoding="UTF-8"?>)" << '\n';
  s << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << num(kLeft + kSize + 20) << R"(" height=")"
    << num(kHistTop + kHistHeight + 40) << R"(" font-family="sans-serif" font-size="11">)" << '\n';
  s << R"(<rect x="0" y="0" width="100%" height="100%" fill="white"/>)" << '\n';
  if (!options.title.empty()) {
    s << R"(<text x=")" << num(kLeft) << R"(" y="18" font-size="13">)" << escape(options.title) << "</text>\n";
  }
  s << R"(<rect x=")" << num(kLeft) << R"(" y=")" << num(kTop) << R"(" width=")" << num(kSize) << R"(" height=")"
    << num(kSize) << R"(" fill="none" stroke="black"/>)" << '\n';

  // Ticks
  std::vector<double> ticks;
  if (options.log_axes) {
    for (double v = options.log_axis_min; v <= 1.0 + 1e-12; v *= 10.0) ticks.push_back(v);
  } else {
    for (int i = 0; i <= 5; ++i) ticks.push_back(i / 5.0);
  }
  for (double v : ticks) {
    char label[32];
    std::snprintf(label, sizeof label, options.log_axes ? "%.0e" : "%.1f", v);
    s << R"(<text x=")" << num(px(v)) << R"(" y=")" << num(kTop + kSize + 14) << R"(" text-anchor="middle">)" << label
      << "</text>\n";
    s << R"(<text x=")" << num(kLeft - 6) << R"(" y=")" << num(py(v) + 4) << R"(" text-anchor="end">)" << label
      << "</text>\n";
  }

  // Bars with tilted roofs: roof height at x is frequency + (x - mean confidence).
  for (std::size_t i = 0; i < report.bins.size(); ++i) {
    const ReliabilityBin& b = report.bins[i];
    const double gap = b.count > 0 ? b.empirical_frequency - b.mean_confidence : 0.0;
    const double y_lo = std::clamp(b.lo + gap, 0.0, 1.0);
    const double y_hi = std::clamp(b.hi + gap, 0.0, 1.0);
    const double base = kTop + kSize;
    if (b.count > 0) {
      s << R"(<polygon class="bar" fill="#9ecae1" stroke="#3182bd" stroke-width="0.5" points=")" << num(px(b.lo))
        << ',' << num(base) << ' ' << num(px(b.lo)) << ',' << num(py(y_lo)) << ' ' << num(px(b.hi)) << ','
        << num(py(y_hi)) << ' ' << num(px(b.hi)) << ',' << num(base) << R"("/>)" << '\n';
    }
    s << R"(<line class="roof" x1=")" << num(px(b.lo)) << R"(" y1=")" << num(py(y_lo)) << R"(" x2=")"
      << num(px(b.hi)) << R"(" y2=")" << num(py(y_hi)) << R"(" stroke=")" << (b.count > 0 ? "#08519c" : "#bbbbbb")
      << R"(" stroke-width="1.5"/>)" << '\n';
  }
  s << R"(<line class="diagonal" x1=")" << num(px(0.0)) << R"(" y1=")" << num(py(0.0)) << R"(" x2=")" << num(px(1.0))
    << R"(" y2=")" << num(py(1.0)) << R"(" stroke="gray" stroke-dasharray="4,3"/>)" << '\n';
  for (const ReliabilityBin& b : report.bins) {
    if (b.count == 0) continue;
    s << R"(<circle class="dot" cx=")" << num(px(b.mean_confidence)) << R"(" cy=")" << num(py(b.empirical_frequency))
      << R"(" r="3" fill="red"/>)" << '\n';
  }

  // Count histogram on a log scale.
  std::size_t max_count = 1;
  for (const ReliabilityBin& b : report.bins) max_count = std::max(max_count, b.count);
  const double denom = std::log10(1.0 + double(max_count));
  s << R"(<rect x=")" << num(kLeft) << R"(" y=")" << num(kHistTop) << R"(" width=")" << num(kSize)
    << R"(" height=")" << num(kHistHeight) << R"(" fill="none" stroke="black"/>)" << '\n';
  for (const ReliabilityBin& b : report.bins) {
    if (b.count == 0) continue;
    const double h = kHistHeight * std::log10(1.0 + double(b.count)) / denom;
    const double x0 = px(b.lo);
    const double w = std::max(0.5, px(b.hi) - x0);
    s << R"(<rect class="hist" x=")" << num(x0) << R"(" y=")" << num(kHistTop + kHistHeight - h) << R"(" width=")"
      << num(w) << R"(" height=")" << num(h) << R"(" fill="#bdbdbd" stroke="#636363" stroke-width="0.5"/>)" << '\n';
  }
  char footer[96];
  std::snprintf(footer, sizeof footer, "ECE %.5f  NLL %.5f  n=%zu", report.ece, report.nll, report.total);
  s << R"(<text x=")" << num(kLeft) << R"(" y=")" << num(kHistTop + kHistHeight + 20) << R"(">)" << footer
    << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

void render_reliability_svg(const ReliabilityReport& report, const std::filesystem::path& path,
                            const ReliabilitySvgOptions& options) {
  save(path, reliability_svg(report, options));
}

std::size_t visible_cells(const ProbGrid& grid, double clip_log) {
  const double floor = std::exp(clip_log);
  return std::size_t(
      std::count_if(grid.cells().begin(), grid.cells().end(), [&](float p) { return double(p) > floor; }));
}

std::string scene_svg(const FrameRecord& frame, const std::vector<DetectedObject>& detections,
                      const std::vector<RegionSpec>& regions, const SceneSvgOptions& options) {
  const ProbGrid& grid = frame.grids.at(std::size_t(options.timestep));
  const GridMeta& m = grid.meta();
  const double k = options.pixels_per_cell;
  const int h = int(m.height_cells);
  const int w = int(m.width_cells);
  // Cell (r, c) occupies [c, c+1) x [h-1-r, h-r) in cell units.
  auto sx = [&](double col) { return (col + 0.5) * k; };
  auto sy = [&](double row) { return (double(h) - 0.5 - row) * k; };

  constexpr int kLevels = 64;
  const double floor = std::exp(options.clip_log);
  auto level = [&](float p) {
    if (double(p) <= floor) return -1;
    const double t = (std::log(double(p)) - options.clip_log) / (0.0 - options.clip_log);
    return std::clamp(int(t * kLevels), 0, kLevels - 1);
  };

  std::ostringstream s;
  s << R"(<?xml version="1.0" encoding="UTF-8"?>)" << '\n';
  s << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << num(w * k) << R"(" height=")" << num(h * k)
    << R"(" shape-rendering="crispEdges">)" << '\n';
  s << "<title>" << escape(frame.frame_id) << " t=" << options.timestep << "</title>\n";
  s << R"(<rect class="floor" x="0" y="0" width=")" << num(w * k) << R"(" height=")" << num(h * k) << R"(" fill=")"
    << rgb_string(ramp(0.0)) << R"("/>)" << '\n';
  // Horizontal runs of equal color level.
  for (int r = 0; r < h; ++r) {
    int c = 0;
    while (c < w) {
      const int lv = level(grid.at(r, c));
      int end = c + 1;
      while (end < w && level(grid.at(r, end)) == lv) ++end;
      if (lv >= 0) {
        s << R"(<rect class="cell" data-n=")" << (end - c) << R"(" x=")" << num(c * k) << R"(" y=")"
          << num((h - 1 - r) * k) << R"(" width=")" << num((end - c) * k) << R"(" height=")" << num(k)
          << R"(" fill=")" << rgb_string(ramp((lv + 0.5) / kLevels)) << R"("/>)" << '\n';
      }
      c = end;
    }
  }

  const double thr = uncertainty::chi2_2dof_quantile(options.ellipse_mass);
  for (const DetectedObject& d : detections) {
    auto it = d.location.find(options.timestep);
    if (it == d.location.end()) continue;
    const Gaussian2D& g = it->second;
    // Covariance in screen axes (x = col, y = -row).
    const double sxx = g.cov.cc;
    const double syy = g.cov.rr;
    const double sxy = -g.cov.rc;
    const double half_trace = 0.5 * (sxx + syy);
    const double disc = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
    const double major = std::sqrt(thr * (half_trace + disc)) * k;
    const double minor = std::sqrt(thr * std::max(half_trace - disc, 0.0)) * k;
    const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy) * 180.0 / std::numbers::pi;
    s << R"(<ellipse class="detection" cx=")" << num(sx(g.mean.col)) << R"(" cy=")" << num(sy(g.mean.row))
      << R"(" rx=")" << num(major) << R"(" ry=")" << num(minor) << "\" transform=\"rotate(" << num(angle) << ' '
      << num(sx(g.mean.col)) << ' ' << num(sy(g.mean.row)) << R"x()" fill="none" stroke="white" stroke-width="1"/>)x"
      << '\n';
  }
  for (const RegionSpec& region : regions) {
    const double s_m = m.cell_size_m;
    const double row_lo = m.ego_row + region.forward_min / s_m;
    const double row_hi = m.ego_row + region.forward_max / s_m;
    const double col_lo = m.ego_col + region.lateral_min / s_m;
    const double col_hi = m.ego_col + region.lateral_max / s_m;
    s << R"(<rect class="region" x=")" << num(sx(col_lo)) << R"(" y=")" << num(sy(row_hi)) << R"(" width=")"
      << num((col_hi - col_lo) * k) << R"(" height=")" << num((row_hi - row_lo) * k)
      << R"(" fill="none" stroke="red" stroke-width="1.5" stroke-dasharray="6,4"/>)" << '\n';
  }
  s << R"(<rect class="ego" x=")" << num(sx(m.ego_col) - 2.0 * k) << R"(" y=")" << num(sy(m.ego_row) - 4.0 * k)
    << R"(" width=")" << num(4.0 * k) << R"(" height=")" << num(8.0 * k)
    << R"(" fill="none" stroke="#1f5fff" stroke-width="2"/>)" << '\n';
  s << "</svg>\n";
  return s.str();
}

void render_scene_svg(const FrameRecord& frame, const std::vector<DetectedObject>& detections,
                      const std::vector<RegionSpec>& regions, const std::filesystem::path& path,
                      const SceneSvgOptions& options) {
  save(path, scene_svg(frame, detections, regions, options));
}

}  // namespace bevcal::evaluate
