#pragma once

#include <string>
#include <vector>

#include "bevcal/core.hpp"

namespace bevcal {

// Axis-aligned rectangle in meters relative to the ego position. Forward is
// the +row direction, lateral the +col direction. Bounds are inclusive.
struct RegionSpec {
  std::string name = "ahead";
  double forward_min = 0.0;
  double forward_max = 20.0;
  double lateral_min = -5.0;
  double lateral_max = 5.0;

  // Throws ValidationError if the rectangle is empty or misses the grid.
  void validate(const GridMeta& meta) const;
  bool contains(const GridMeta& meta, int row, int col) const;
  // Cells whose centers fall in the closed rectangle, row-major order.
  std::vector<Cell> cells(const GridMeta& meta) const;
};

}  // namespace bevcal
