#include "bevcal/splits.hpp"

#include <algorithm>
#include <cmath>

#include "bevcal/rng.hpp"

namespace bevcal {

Split SplitAssignment::of(const std::string& frame_id) const {
  auto it = by_frame.find(frame_id);
  if (it == by_frame.end()) throw ValidationError("frame has no split assignment: " + frame_id);
  return it->second;
}

std::set<std::string> SplitAssignment::frames_in(Split split) const {
  std::set<std::string> out;
  for (const auto& [id, s] : by_frame) {
    if (s == split) out.insert(id);
  }
  return out;
}

std::size_t SplitAssignment::count(Split split) const {
  return std::size_t(std::count_if(by_frame.begin(), by_frame.end(), [&](const auto& kv) { return kv.second == split; }));
}

SplitAssignment assign_splits(const std::vector<FrameKey>& frames, double calibration_fraction, std::uint64_t seed) {
  if (!(calibration_fraction > 0.0 && calibration_fraction < 1.0)) {
    throw ValidationError("calibration_fraction must lie in (0, 1)");
  }
  if (frames.empty()) throw ValidationError("no frames to split");

  std::map<std::string, std::vector<std::string>> episodes;
  for (const FrameKey& f : frames) episodes[f.episode_id].push_back(f.frame_id);
  if (episodes.size() == 1) throw ValidationError("cannot split single episode");

  std::vector<std::string> order;
  for (const auto& [id, _] : episodes) order.push_back(id);
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }

  const double total = double(frames.size());
  const double target = calibration_fraction * total;
  std::vector<std::string> chosen;
  double current = 0.0;
  for (const std::string& ep : order) {
    const double size = double(episodes[ep].size());
    if (std::abs(current + size - target) < std::abs(current - target)) {
      chosen.push_back(ep);
      current += size;
    }
  }
  if (chosen.empty()) {
    // Smallest episode, first by id on ties.
    auto smallest = std::min_element(episodes.begin(), episodes.end(), [](const auto& a, const auto& b) {
      return a.second.size() < b.second.size();
    });
    chosen.push_back(smallest->first);
  } else if (chosen.size() == episodes.size()) {
    chosen.pop_back();
  }

  SplitAssignment out;
  out.calibration_fraction = calibration_fraction;
  for (const FrameKey& f : frames) out.by_frame[f.frame_id] = Split::test;
  for (const std::string& ep : chosen) {
    for (const std::string& id : episodes[ep]) out.by_frame[id] = Split::calibration;
  }
  return out;
}

SplitAssignment assign_splits(const std::vector<FrameRecord>& frames, double calibration_fraction, std::uint64_t seed) {
  std::vector<FrameKey> keys;
  keys.reserve(frames.size());
  for (const FrameRecord& f : frames) keys.push_back({f.frame_id, f.episode_id});
  return assign_splits(keys, calibration_fraction, seed);
}

}  // namespace bevcal
