#include "bevcal/match.hpp"

#include <algorithm>
#include <set>

#include "bevcal/uncertainty.hpp"

namespace bevcal::match {

MatchResult match_frame(const FrameRecord& frame, int timestep, double ellipse_mass) {
  MatchResult out;
  out.frame_id = frame.frame_id;
  out.timestep = timestep;
  const AnnotationMask& ann = frame.annotations.at(std::size_t(timestep));
  const double thr = uncertainty::chi2_2dof_quantile(ellipse_mass);

  std::set<DetectionId> matched_dets;
  std::set<ObjectId> matched_objs;
  for (const DetectedObject& d : frame.detections) {
    auto it = d.location.find(timestep);
    if (it == d.location.end()) continue;
    for (const AnnotatedObject& obj : ann.instances()) {
      const bool hit = std::any_of(obj.pixels.begin(), obj.pixels.end(), [&](const Cell& px) {
        return uncertainty::in_ellipse(it->second, thr, px.row, px.col);
      });
      if (hit) {
        out.pairs.emplace_back(d.detection_id, obj.object_id);
        matched_dets.insert(d.detection_id);
        matched_objs.insert(obj.object_id);
      }
    }
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (const DetectedObject& d : frame.detections) {
    if (d.location.count(timestep) != 0 && matched_dets.count(d.detection_id) == 0) {
      out.unmatched_detections.push_back(d.detection_id);
    }
  }
  for (const AnnotatedObject& obj : ann.instances()) {
    if (matched_objs.count(obj.object_id) == 0) out.unmatched_annotations.push_back(obj.object_id);
  }
  std::sort(out.unmatched_detections.begin(), out.unmatched_detections.end());
  std::sort(out.unmatched_annotations.begin(), out.unmatched_annotations.end());
  return out;
}

void record_matches(const MatchResult& result, std::vector<DetectedObject>& detections) {
  for (DetectedObject& d : detections) {
    if (d.location.count(result.timestep) == 0) continue;
    std::vector<ObjectId>& ids = d.matched_annotations[result.timestep];
    ids.clear();
    for (const auto& [det, obj] : result.pairs) {
      if (det == d.detection_id) ids.push_back(obj);
    }
  }
}

std::vector<ScoredLabel> presence_labels(const std::vector<MatchResult>& results,
                                         const std::vector<std::vector<DetectedObject>>& detections) {
  std::vector<ScoredLabel> out;
  for (std::size_t f = 0; f < results.size(); ++f) {
    const MatchResult& r = results[f];
    for (const DetectedObject& d : detections[f]) {
      auto p = d.presence.find(r.timestep);
      if (p == d.presence.end()) continue;
      const bool matched = std::any_of(r.pairs.begin(), r.pairs.end(),
                                       [&](const auto& pair) { return pair.first == d.detection_id; });
      out.push_back({p->second, matched ? 1 : 0});
    }
  }
  return out;
}

int area_label(const FrameRecord& frame, const MatchResult& timestep0, const RegionSpec& region) {
  const AnnotationMask& ann = frame.annotations.front();
  for (const AnnotatedObject& obj : ann.instances()) {
    if (!std::binary_search(timestep0.unmatched_annotations.begin(), timestep0.unmatched_annotations.end(),
                            obj.object_id)) {
      continue;
    }
    for (const Cell& px : obj.pixels) {
      if (region.contains(ann.meta(), px.row, px.col)) return 1;
    }
  }
  return 0;
}

std::vector<ScoredLabel> area_labels(const std::vector<FrameRecord>& frames, const std::vector<RegionSpec>& regions,
                                     const std::vector<MatchResult>& timestep0,
                                     const std::vector<std::vector<double>>& p_area) {
  std::vector<ScoredLabel> out;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (std::size_t r = 0; r < regions.size(); ++r) {
      out.push_back({p_area[f][r], area_label(frames[f], timestep0[f], regions[r])});
    }
  }
  return out;
}

}  // namespace bevcal::match
