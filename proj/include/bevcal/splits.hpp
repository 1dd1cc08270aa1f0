#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "bevcal/core.hpp"

namespace bevcal {

enum class Split { calibration, test };

struct SplitAssignment {
  std::map<std::string, Split> by_frame;
  double calibration_fraction = 0.2;

  Split of(const std::string& frame_id) const;
  std::set<std::string> frames_in(Split split) const;
  std::size_t count(Split split) const;
};

// Minimal view of a frame for split bookkeeping.
struct FrameKey {
  std::string frame_id;
  std::string episode_id;
};

// Shuffles episodes with `seed`, then packs them greedily into the
// calibration split while doing so moves the calibration frame count closer
// to calibration_fraction * total. No episode straddles the two splits.
SplitAssignment assign_splits(const std::vector<FrameKey>& frames, double calibration_fraction, std::uint64_t seed);
SplitAssignment assign_splits(const std::vector<FrameRecord>& frames, double calibration_fraction, std::uint64_t seed);

}  // namespace bevcal
