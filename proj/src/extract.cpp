#include "bevcal/extract.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>

namespace bevcal::extract {

void ExtractionConfig::validate() const {
  if (!(p_thresh > 0.0 && p_thresh < 1.0)) throw ConfigError("p_thresh must lie in (0, 1)");
  if (!(m_thresh > 0.0)) throw ConfigError("m_thresh must be positive");
  if (max_components <= 0) throw ConfigError("max_components must be positive");
  if (em_max_iters <= 0) throw ConfigError("em_max_iters must be positive");
  if (!(em_tol > 0.0)) throw ConfigError("em_tol must be positive");
  if (!(cov_reg > 0.0)) throw ConfigError("cov_reg must be positive");
  if (!(min_seed_separation_cells > 0.0)) throw ConfigError("min_seed_separation_cells must be positive");
  if (!(gating_cells_per_step > 0.0)) throw ConfigError("gating_cells_per_step must be positive");
}

double SamplePoints::total_weight() const {
  double w = 0.0;
  for (const SamplePoint& p : points) w += p.multiplicity;
  return w;
}

int multiplicity(double p, double m_thresh) {
  // Grid cells are single precision, so the product is taken at that precision
  // before rounding; 0.255f * 100 must count as 25.5.
  const double product = double(float(p * m_thresh));
  return std::max(1, int(std::round(product)));
}

std::vector<Cell> seed_clusters(const ProbGrid& grid, const ExtractionConfig& config) {
  const GridMeta& m = grid.meta();
  const int h = int(m.height_cells);
  const int w = int(m.width_cells);
  struct Peak {
    float value;
    Cell cell;
  };
  std::vector<Peak> peaks;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const float v = grid.at(r, c);
      if (v < float(config.p_thresh)) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if ((dr == 0 && dc == 0) || !m.contains(r + dr, c + dc)) continue;
          const float n = grid.at(r + dr, c + dc);
          // Plateaus keep only their lexicographically first cell.
          if (n > v || (n == v && Cell{r + dr, c + dc} < Cell{r, c})) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) peaks.push_back({v, {r, c}});
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.cell < b.cell;
  });
  const double sep2 = config.min_seed_separation_cells * config.min_seed_separation_cells;
  std::vector<Cell> seeds;
  for (const Peak& p : peaks) {
    if (int(seeds.size()) >= config.max_components) break;
    const bool clear = std::all_of(seeds.begin(), seeds.end(), [&](const Cell& s) {
      const double dr = s.row - p.cell.row;
      const double dc = s.col - p.cell.col;
      return dr * dr + dc * dc >= sep2;
    });
    if (clear) seeds.push_back(p.cell);
  }
  return seeds;
}

SamplePoints build_sample_points(const ProbGrid& grid, const ExtractionConfig& config) {
  const GridMeta& m = grid.meta();
  SamplePoints out;
  for (int r = 0; r < int(m.height_cells); ++r) {
    for (int c = 0; c < int(m.width_cells); ++c) {
      const float p = grid.at(r, c);
      // Cells are single precision, so the threshold is compared at that precision.
      if (p < float(config.p_thresh)) continue;
      out.points.push_back({{double(r), double(c)}, multiplicity(p, config.m_thresh)});
    }
  }
  return out;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2π)

struct Params {
  double weight;
  Gaussian2D g;
  double log_norm;  // -ln(2π) - ln|Σ|/2
};

void refresh(Params& p) {
  p.log_norm = -kLog2Pi - 0.5 * std::log(p.g.cov.det());
}

// Fills log-responsibilities and returns the weighted log-likelihood.
double e_step(const SamplePoints& pts, const std::vector<Params>& comps, std::vector<double>& resp) {
  const std::size_t k_count = comps.size();
  std::vector<double> logw(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    logw[k] = comps[k].weight > 0.0 ? std::log(comps[k].weight) : -std::numeric_limits<double>::infinity();
  }
  double ll = 0.0;
  for (std::size_t i = 0; i < pts.points.size(); ++i) {
    const Point2 x = pts.points[i].pos;
    double* r = resp.data() + i * k_count;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_count; ++k) {
      if (comps[k].weight <= 0.0) {
        r[k] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const Gaussian2D& g = comps[k].g;
      r[k] = logw[k] + comps[k].log_norm - 0.5 * g.cov.mahalanobis2(x.row - g.mean.row, x.col - g.mean.col);
      best = std::max(best, r[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      r[k] = std::exp(r[k] - best);
      sum += r[k];
    }
    for (std::size_t k = 0; k < k_count; ++k) r[k] /= sum;
    ll += pts.points[i].multiplicity * (best + std::log(sum));
  }
  return ll;
}

void m_step(const SamplePoints& pts, const std::vector<double>& resp, std::vector<Params>& comps, double total,
            double reg) {
  const std::size_t k_count = comps.size();
  for (std::size_t k = 0; k < k_count; ++k) {
    double nk = 0.0;
    double sr = 0.0;
    double sc = 0.0;
    for (std::size_t i = 0; i < pts.points.size(); ++i) {
      const double wr = pts.points[i].multiplicity * resp[i * k_count + k];
      nk += wr;
      sr += wr * pts.points[i].pos.row;
      sc += wr * pts.points[i].pos.col;
    }
    Params& p = comps[k];
    p.weight = nk / total;
    if (nk <= 1e-12 * total) continue;  // starved component keeps its last shape
    const Point2 mu{sr / nk, sc / nk};
    double crr = 0.0;
    double crc = 0.0;
    double ccc = 0.0;
    for (std::size_t i = 0; i < pts.points.size(); ++i) {
      const double wr = pts.points[i].multiplicity * resp[i * k_count + k];
      const double dr = pts.points[i].pos.row - mu.row;
      const double dc = pts.points[i].pos.col - mu.col;
      crr += wr * dr * dr;
      crc += wr * dr * dc;
      ccc += wr * dc * dc;
    }
    Cov2 cov{crr / nk + reg, crc / nk, ccc / nk + reg};
    // Collapsed components are pushed back above the regularization floor.
    while (cov.det() < reg * reg) {
      cov.rr += reg;
      cov.cc += reg;
    }
    p.g = Gaussian2D{mu, cov};
    refresh(p);
  }
}

}  // namespace

GmmFit fit_gmm(const SamplePoints& points, const std::vector<Cell>& seeds, const ExtractionConfig& config) {
  GmmFit fit;
  if (points.points.empty() || seeds.empty()) return fit;
  const std::size_t k_count = std::min(seeds.size(), points.points.size());
  const double init_var = 0.25 * config.min_seed_separation_cells * config.min_seed_separation_cells;
  std::vector<Params> comps(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    comps[k].weight = 1.0 / double(k_count);
    comps[k].g = Gaussian2D{{double(seeds[k].row), double(seeds[k].col)}, Cov2{init_var, 0.0, init_var}};
    refresh(comps[k]);
  }
  const double total = points.total_weight();
  std::vector<double> resp(points.points.size() * k_count);
  double ll = e_step(points, comps, resp);
  fit.log_likelihood.push_back(ll);
  for (int it = 0; it < config.em_max_iters; ++it) {
    m_step(points, resp, comps, total, config.cov_reg);
    const double next = e_step(points, comps, resp);
    fit.log_likelihood.push_back(next);
    ++fit.iterations;
    const bool converged = next - ll < config.em_tol * std::abs(ll);
    ll = next;
    if (converged) break;
  }
  for (const Params& p : comps) fit.components.push_back({p.g, p.weight});
  return fit;
}

std::vector<DetectedObject> extract_objects(const FrameRecord& frame, const ExtractionConfig& config,
                                            double shape_pixels) {
  std::vector<DetectedObject> detections;
  for (int t = 0; t < frame.num_timesteps(); ++t) {
    const ProbGrid& grid = frame.grids[std::size_t(t)];
    const std::vector<Cell> seeds = seed_clusters(grid, config);
    if (seeds.empty()) {
      if (t == 0) return detections;
      continue;
    }
    const GmmFit fit = fit_gmm(build_sample_points(grid, config), seeds, config);
    if (t == 0) {
      for (std::size_t k = 0; k < fit.components.size(); ++k) {
        DetectedObject d;
        d.detection_id = DetectionId(k);
        d.location[0] = fit.components[k].gaussian;
        d.mixing_weight[0] = fit.components[k].weight;
        d.shape_pixels = shape_pixels;
        detections.push_back(std::move(d));
      }
      continue;
    }
    // Greedy one-to-one nearest-mean association against the previous step.
    const double gate2 = config.gating_cells_per_step * config.gating_cells_per_step;
    std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
    for (std::size_t d = 0; d < detections.size(); ++d) {
      auto prev = detections[d].location.find(t - 1);
      if (prev == detections[d].location.end()) continue;
      for (std::size_t k = 0; k < fit.components.size(); ++k) {
        const double dr = fit.components[k].gaussian.mean.row - prev->second.mean.row;
        const double dc = fit.components[k].gaussian.mean.col - prev->second.mean.col;
        const double d2 = dr * dr + dc * dc;
        if (d2 <= gate2) candidates.emplace_back(d2, d, k);
      }
    }
    std::sort(candidates.begin(), candidates.end());
    std::vector<bool> det_used(detections.size(), false);
    std::vector<bool> comp_used(fit.components.size(), false);
    for (const auto& [d2, d, k] : candidates) {
      if (det_used[d] || comp_used[k]) continue;
      det_used[d] = true;
      comp_used[k] = true;
      detections[d].location[t] = fit.components[k].gaussian;
      detections[d].mixing_weight[t] = fit.components[k].weight;
    }
  }
  return detections;
}

}  // namespace bevcal::extract
