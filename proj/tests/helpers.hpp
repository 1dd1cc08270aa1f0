#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bevcal/core.hpp"

namespace testutil {

inline bevcal::GridMeta small_meta(std::uint32_t h = 40, std::uint32_t w = 40, std::uint16_t steps = 0) {
  bevcal::GridMeta m;
  m.height_cells = h;
  m.width_cells = w;
  m.ego_row = float(h) / 2 - 0.5F;
  m.ego_col = float(w) / 2 - 0.5F;
  m.num_future_steps = steps;
  return m;
}

inline bevcal::ProbGrid grid_from(const bevcal::GridMeta& m, int t, const std::function<double(int, int)>& f) {
  std::vector<float> cells(m.cell_count());
  for (int r = 0; r < int(m.height_cells); ++r) {
    for (int c = 0; c < int(m.width_cells); ++c) cells[m.index(r, c)] = float(f(r, c));
  }
  return bevcal::ProbGrid(m, t, std::move(cells));
}

// Frame whose every timestep shares the same grid and annotations.
inline bevcal::FrameRecord static_frame(const bevcal::GridMeta& m, const bevcal::ProbGrid& grid0,
                                        const std::vector<bevcal::AnnotatedObject>& objects,
                                        std::string id = "f0") {
  bevcal::FrameRecord f;
  f.frame_id = std::move(id);
  f.episode_id = "e0";
  for (int t = 0; t <= m.num_future_steps; ++t) {
    f.grids.emplace_back(m, t, grid0.cells());
    f.annotations.push_back(bevcal::AnnotationMask::from_instances(m, t, objects));
  }
  return f;
}

inline bevcal::Gaussian2D gaussian(double r, double c, double rr = 1.0, double rc = 0.0, double cc = 1.0) {
  return {{r, c}, {rr, rc, cc}};
}

}  // namespace testutil
