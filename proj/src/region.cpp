#include "bevcal/region.hpp"

#include <algorithm>
#include <cmath>

namespace bevcal {

void RegionSpec::validate(const GridMeta& meta) const {
  if (!(forward_min < forward_max)) throw ValidationError("region " + name + ": forward_min must be < forward_max");
  if (!(lateral_min < lateral_max)) throw ValidationError("region " + name + ": lateral_min must be < lateral_max");
  if (cells(meta).empty()) throw ValidationError("region " + name + " does not intersect the grid");
}

bool RegionSpec::contains(const GridMeta& meta, int row, int col) const {
  const double forward = (double(row) - meta.ego_row) * meta.cell_size_m;
  const double lateral = (double(col) - meta.ego_col) * meta.cell_size_m;
  return forward >= forward_min && forward <= forward_max && lateral >= lateral_min && lateral <= lateral_max;
}

std::vector<Cell> RegionSpec::cells(const GridMeta& meta) const {
  const double s = meta.cell_size_m;
  const int h = int(meta.height_cells);
  const int w = int(meta.width_cells);
  // Candidate bounds padded by one cell, then filtered exactly.
  const int r0 = std::max(0, int(std::floor(meta.ego_row + forward_min / s)) - 1);
  const int r1 = std::min(h - 1, int(std::ceil(meta.ego_row + forward_max / s)) + 1);
  const int c0 = std::max(0, int(std::floor(meta.ego_col + lateral_min / s)) - 1);
  const int c1 = std::min(w - 1, int(std::ceil(meta.ego_col + lateral_max / s)) + 1);
  std::vector<Cell> out;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (contains(meta, r, c)) out.push_back({r, c});
    }
  }
  return out;
}

}  // namespace bevcal
