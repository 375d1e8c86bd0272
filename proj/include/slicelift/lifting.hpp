#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slicelift/detections.hpp"
#include "slicelift/geometry.hpp"

namespace slicelift {

struct LiftParams {
  double tau_link = 0.3;   // adjacent-slice IoU needed to extend a track
  int max_gap = 1;         // missed slices a track may bridge
  int min_len = 3;         // members needed to emit a 3D box
  double tau_nms2d = 0.45;
  double tau_nms3d = 0.25;

  // Throws InvalidArgument unless thresholds lie in (0, 1), max_gap >= 0 and min_len >= 1.
  void validate() const;
  nlohmann::json to_json() const;
};

// Chain of slice boxes with strictly increasing z and a shared class.
struct Track {
  std::vector<Box2D> members;
  int class_id = 0;
  int gaps = 0;  // total skipped slices between consecutive members

  int first_slice() const { return members.front().z(); }
  int last_slice() const { return members.back().z(); }
  bool operator==(const Track&) const = default;
};

// Candidate ordering shared by both NMS passes: score descending, then
// x_min, y_min (, z_min), then the max corners ascending.
bool nms_order_2d(const Box2D& a, const Box2D& b);
bool nms_order_3d(const Box3D& a, const Box3D& b);

// Greedy NMS on one slice and class; suppresses boxes with IoU > tau against
// a kept box. Output is in nms_order_2d. Throws MixedSlices if z differs.
std::vector<Box2D> nms_2d(std::span<const Box2D> boxes, double tau);

// Greedy NMS over cuboids of one class, using iou_3d.
std::vector<Box3D> nms_3d(std::span<const Box3D> boxes, double tau);

// Runs nms_2d independently on every (slice, class) group. The result is
// ordered by slice, then class, then NMS order.
DetectionSet nms_per_slice(const DetectionSet& set, double tau);

// Greedy slice chaining. Slices are visited in ascending z; a box may extend
// an open track of its class whose last member lies at most max_gap + 1
// slices below, if their planar IoU >= tau_link. Candidate pairs are taken
// in descending IoU (ties: older track, then earlier box), one box per
// track per slice. Leftover boxes start new tracks. Tracks come back in
// creation order, which is also order of first slice.
std::vector<Track> link_tracks(const DetectionSet& set, const LiftParams& params);

// Drops tracks shorter than min_len and maps the rest through hull_3d.
std::vector<Box3D> tracks_to_boxes(std::span<const Track> tracks, const LiftParams& params);

// nms_per_slice -> link_tracks -> tracks_to_boxes -> per-class nms_3d.
// Output is grouped by ascending class, NMS order within a class.
std::vector<Box3D> lift(const DetectionSet& set, const LiftParams& params = {});

// { "scan_id", "boxes3d": [ { "x", "y", "z", "score", "class_id" } ], "params"? }
nlohmann::json boxes3d_to_json(const std::string& scan_id, std::span<const Box3D> boxes,
                               const nlohmann::json& params = nullptr);
std::vector<Box3D> boxes3d_from_json(const nlohmann::json& doc);

}  // namespace slicelift
