#include "bevcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace bevcal::calibrate {

double IsotonicMap::apply(double score) const {
  double v = clip_floor;
  if (!breakpoints.empty()) {
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), score);
    const std::size_t i = std::size_t(it - breakpoints.begin());
    if (i == 0) {
      v = values.front();
    } else if (i == breakpoints.size() || mode == IsotonicMode::step) {
      v = values[i - 1];
    } else {
      const double x0 = breakpoints[i - 1];
      const double x1 = breakpoints[i];
      const double t = (score - x0) / (x1 - x0);
      v = values[i - 1] + t * (values[i] - values[i - 1]);
    }
  }
  return std::min(1.0, std::max(clip_floor, v));
}

double BetaMap::apply(double p) const {
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  const double z = a * std::log(p) - b * std::log1p(-p) + c;
  return 1.0 / (1.0 + std::exp(-z));
}

double QuantileMap::apply(double q) const {
  q = std::clamp(q, 0.0, 1.0);
  const double x = q * kSteps;
  const double nearest = std::round(x);
  if (std::abs(x - nearest) < 1e-9) return frequency[std::size_t(nearest)];
  const auto k = std::size_t(std::floor(x));
  if (k >= std::size_t(kSteps)) return frequency.back();
  const double t = x - double(k);
  return frequency[k] + t * (frequency[k + 1] - frequency[k]);
}

QuantileMap QuantileMap::identity() {
  QuantileMap m;
  for (int k = 0; k <= kSteps; ++k) m.frequency[std::size_t(k)] = double(k) / kSteps;
  return m;
}

void ScoreHistogram::add(double score, int label, std::uint64_t count) {
  auto& bin = bins_[score];
  bin.first += count;
  if (label != 0) bin.second += count;
  instances_ += count;
}

void ScoreHistogram::merge(const ScoreHistogram& other) {
  for (const auto& [score, bin] : other.bins_) {
    auto& mine = bins_[score];
    mine.first += bin.first;
    mine.second += bin.second;
  }
  instances_ += other.instances_;
}

std::vector<Block> pava(std::span<const double> scores, std::span<const double> weights,
                        std::span<const double> label_sums) {
  std::vector<Block> blocks;
  blocks.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    blocks.push_back({scores[i] * weights[i], weights[i], label_sums[i], i, i});
    while (blocks.size() > 1) {
      Block& prev = blocks[blocks.size() - 2];
      const Block& cur = blocks.back();
      // prev.value() > cur.value() without dividing
      if (prev.label_sum * cur.weight <= cur.label_sum * prev.weight) break;
      prev.score_sum += cur.score_sum;
      prev.weight += cur.weight;
      prev.label_sum += cur.label_sum;
      prev.last = cur.last;
      blocks.pop_back();
    }
  }
  return blocks;
}

namespace {

struct Distinct {
  std::vector<double> scores;
  std::vector<double> weights;
  std::vector<double> label_sums;
};

Distinct from_histogram(const ScoreHistogram& h) {
  Distinct d;
  for (const auto& [score, bin] : h.bins()) {
    d.scores.push_back(score);
    d.weights.push_back(double(bin.first));
    d.label_sums.push_back(double(bin.second));
  }
  return d;
}

}  // namespace

std::vector<double> isotonic_fitted_values(std::span<const ScoredLabel> pairs) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pairs[a].p < pairs[b].p; });
  Distinct d;
  std::vector<std::size_t> group_of(pairs.size());
  for (std::size_t idx : order) {
    if (d.scores.empty() || d.scores.back() != pairs[idx].p) {
      d.scores.push_back(pairs[idx].p);
      d.weights.push_back(0.0);
      d.label_sums.push_back(0.0);
    }
    d.weights.back() += 1.0;
    d.label_sums.back() += pairs[idx].label != 0 ? 1.0 : 0.0;
    group_of[idx] = d.scores.size() - 1;
  }
  const std::vector<Block> blocks = pava(d.scores, d.weights, d.label_sums);
  std::vector<double> group_value(d.scores.size());
  for (const Block& b : blocks) {
    for (std::size_t g = b.first; g <= b.last; ++g) group_value[g] = b.value();
  }
  std::vector<double> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = group_value[group_of[i]];
  return out;
}

IsotonicMap fit_isotonic(const ScoreHistogram& histogram, IsotonicMode mode) {
  if (histogram.instances() < 2) throw ValidationError("isotonic fit needs at least 2 instances");
  const Distinct d = from_histogram(histogram);
  for (double s : d.scores) {
    if (!std::isfinite(s)) throw ValidationError("isotonic fit: non-finite score");
  }
  const std::vector<Block> blocks = pava(d.scores, d.weights, d.label_sums);
  IsotonicMap map;
  map.mode = mode;
  map.clip_floor = 1.0 / double(histogram.instances());
  for (const Block& b : blocks) {
    map.breakpoints.push_back(mode == IsotonicMode::step ? d.scores[b.first] : b.score_sum / b.weight);
    map.values.push_back(b.value());
  }
  return map;
}

IsotonicMap fit_isotonic(std::span<const ScoredLabel> pairs, IsotonicMode mode) {
  ScoreHistogram h;
  for (const ScoredLabel& s : pairs) h.add(s.p, s.label);
  return fit_isotonic(h, mode);
}

namespace {

struct Features {
  std::vector<std::array<double, 3>> x;  // ln p, -ln(1-p), 1
  std::vector<double> y;
};

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + exp(z)) without overflow
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double mean_loss(const Features& f, const std::array<double, 3>& w) {
  double loss = 0.0;
  for (std::size_t i = 0; i < f.x.size(); ++i) {
    const double z = w[0] * f.x[i][0] + w[1] * f.x[i][1] + w[2] * f.x[i][2];
    loss += softplus(z) - f.y[i] * z;
  }
  return loss / double(f.x.size());
}

// Solves the active sub-system of H d = g by Gaussian elimination with partial pivoting.
std::array<double, 3> solve(std::array<std::array<double, 3>, 3> h, std::array<double, 3> g,
                            const std::array<bool, 3>& active) {
  std::vector<int> idx;
  for (int i = 0; i < 3; ++i) {
    if (active[std::size_t(i)]) idx.push_back(i);
  }
  const std::size_t n = idx.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) a[r][c] = h[std::size_t(idx[r])][std::size_t(idx[c])];
    a[r][r] += 1e-12;
    a[r][n] = g[std::size_t(idx[r])];
  }
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    if (a[col][col] == 0.0) continue;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double factor = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= n; ++c) a[r][c] -= factor * a[col][c];
    }
  }
  std::array<double, 3> d{0.0, 0.0, 0.0};
  for (std::size_t r = 0; r < n; ++r) d[std::size_t(idx[r])] = a[r][r] != 0.0 ? a[r][n] / a[r][r] : 0.0;
  return d;
}

std::array<double, 3> newton(const Features& f, std::array<bool, 3> active, const BetaFitOptions& options) {
  std::array<double, 3> w{active[0] ? 1.0 : 0.0, active[1] ? 1.0 : 0.0, 0.0};
  const double n = double(f.x.size());
  double loss = mean_loss(f, w);
  double gnorm = 0.0;
  for (int it = 0; it < options.max_iters; ++it) {
    std::array<double, 3> g{};
    std::array<std::array<double, 3>, 3> h{};
    for (std::size_t i = 0; i < f.x.size(); ++i) {
      const auto& x = f.x[i];
      const double s = sigmoid(w[0] * x[0] + w[1] * x[1] + w[2] * x[2]);
      const double r = s - f.y[i];
      const double v = s * (1.0 - s);
      for (std::size_t a = 0; a < 3; ++a) {
        g[a] += r * x[a] / n;
        for (std::size_t b = 0; b < 3; ++b) h[a][b] += v * x[a] * x[b] / n;
      }
    }
    gnorm = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      if (active[a]) gnorm += g[a] * g[a];
    }
    gnorm = std::sqrt(gnorm);
    if (gnorm < options.tolerance) return w;
    std::array<double, 3> step = solve(h, g, active);
    // Fall back to steepest descent when the Newton direction is not a descent direction.
    double slope = 0.0;
    for (std::size_t a = 0; a < 3; ++a) slope += step[a] * g[a];
    if (!(slope > 0.0)) {
      for (std::size_t a = 0; a < 3; ++a) step[a] = active[a] ? g[a] : 0.0;
    }
    double t = 1.0;
    std::array<double, 3> next{};
    double next_loss = loss;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t a = 0; a < 3; ++a) next[a] = w[a] - t * step[a];
      next_loss = mean_loss(f, next);
      if (next_loss <= loss) break;
      t *= 0.5;
    }
    if (next_loss > loss) {
      // No decrease representable at this scale; the gradient is as small as it gets.
      if (gnorm < 1e3 * options.tolerance) return w;
      break;
    }
    w = next;
    loss = next_loss;
  }
  throw Error("beta calibration did not converge; final gradient norm " + std::to_string(gnorm));
}

}  // namespace

BetaMap fit_beta(std::span<const ScoredLabel> pairs, const BetaFitOptions& options) {
  if (pairs.size() < 10) throw ValidationError("beta calibration needs at least 10 pairs");
  Features f;
  f.x.reserve(pairs.size());
  f.y.reserve(pairs.size());
  for (const ScoredLabel& s : pairs) {
    if (!std::isfinite(s.p)) throw ValidationError("beta calibration: non-finite probability");
    const double p = std::clamp(s.p, 1e-6, 1.0 - 1e-6);
    f.x.push_back({std::log(p), -std::log1p(-p), 1.0});
    f.y.push_back(s.label != 0 ? 1.0 : 0.0);
  }
  std::array<bool, 3> active{true, true, true};
  std::array<double, 3> w = newton(f, active, options);
  while (w[0] < 0.0 || w[1] < 0.0) {
    // Pin the more negative coefficient and refit.
    const std::size_t pin = w[0] < w[1] ? 0 : 1;
    active[pin] = false;
    w = newton(f, active, options);
  }
  return BetaMap{w[0], w[1], w[2]};
}

QuantileMap fit_quantile_map(std::span<const double> quantiles) {
  if (quantiles.size() < 100) throw ValidationError("quantile map needs at least 100 observations");
  std::vector<double> sorted(quantiles.begin(), quantiles.end());
  std::sort(sorted.begin(), sorted.end());
  QuantileMap map;
  const double n = double(sorted.size());
  for (int k = 0; k <= QuantileMap::kSteps; ++k) {
    const double level = double(k) / QuantileMap::kSteps;
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), level) - sorted.begin();
    map.frequency[std::size_t(k)] = double(below) / n;
  }
  map.frequency.front() = 0.0;
  map.frequency.back() = 1.0;
  return map;
}

ProbGrid calibrate_grid(const ProbGrid& grid, const IsotonicMap& map) {
  std::vector<float> cells(grid.cells().size());
  // Grids repeat values heavily (background), so memoize the last lookup.
  float last_in = -1.0F;
  float last_out = 0.0F;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const float p = grid.cells()[i];
    if (p != last_in) {
      last_in = p;
      last_out = float(std::clamp(map.apply(p), 0.0, 1.0));
    }
    cells[i] = last_out;
  }
  return ProbGrid(grid.meta(), grid.timestep(), std::move(cells));
}

}  // namespace bevcal::calibrate
