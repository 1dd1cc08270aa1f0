#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bevcal/core.hpp"
#include "bevcal/region.hpp"

namespace bevcal::match {

struct MatchResult {
  std::string frame_id;
  int timestep = 0;
  std::vector<std::pair<DetectionId, ObjectId>> pairs;  // sorted
  std::vector<DetectionId> unmatched_detections;
  std::vector<ObjectId> unmatched_annotations;
};

// A detection and an annotation match iff any annotation pixel lies inside
// the detection's `ellipse_mass` ellipse at `timestep`. Many-to-many.
// Detections are read from frame.detections.
MatchResult match_frame(const FrameRecord& frame, int timestep, double ellipse_mass);

// Writes the matched object ids into each detection's matched_annotations.
void record_matches(const MatchResult& result, std::vector<DetectedObject>& detections);

// One (presence, label) record per detection with presence at the result's
// timestep; label 1 iff the detection has at least one pair.
std::vector<ScoredLabel> presence_labels(const std::vector<MatchResult>& results,
                                         const std::vector<std::vector<DetectedObject>>& detections);

// Label 1 iff an annotation with no matched detection has a pixel in the
// region at timestep 0.
int area_label(const FrameRecord& frame, const MatchResult& timestep0, const RegionSpec& region);

// One record per frame and region. `p_area[f][r]` holds the precomputed
// undetected-area probability of frame f and region r.
std::vector<ScoredLabel> area_labels(const std::vector<FrameRecord>& frames, const std::vector<RegionSpec>& regions,
                                     const std::vector<MatchResult>& timestep0,
                                     const std::vector<std::vector<double>>& p_area);

}  // namespace bevcal::match
