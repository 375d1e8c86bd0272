#include "slicelift/lifting.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>
#include <utility>

namespace slicelift {

namespace {

using nlohmann::json;

bool in_open_unit_interval(double v) { return v > 0.0 && v < 1.0; }

template <typename Box, typename Order, typename Iou>
std::vector<Box> greedy_nms(std::span<const Box> boxes, double tau, Order order, Iou iou) {
  std::vector<Box> sorted(boxes.begin(), boxes.end());
  std::stable_sort(sorted.begin(), sorted.end(), order);
  std::vector<Box> kept;
  kept.reserve(sorted.size());
  for (const Box& candidate : sorted) {
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const Box& k) { return iou(k, candidate) > tau; });
    if (!suppressed) {
      kept.push_back(candidate);
    }
  }
  return kept;
}

struct LinkCandidate {
  double iou;
  std::size_t track;
  std::size_t box;
};

}  // namespace

void LiftParams::validate() const {
  if (!in_open_unit_interval(tau_link) || !in_open_unit_interval(tau_nms2d) || !in_open_unit_interval(tau_nms3d)) {
    throw InvalidArgument("lift thresholds must lie in (0, 1)");
  }
  if (max_gap < 0) {
    throw InvalidArgument("max_gap must be >= 0");
  }
  if (min_len < 1) {
    throw InvalidArgument("min_len must be >= 1");
  }
}

nlohmann::json LiftParams::to_json() const {
  return {{"tau_link", tau_link},
          {"max_gap", max_gap},
          {"min_len", min_len},
          {"tau_nms2d", tau_nms2d},
          {"tau_nms3d", tau_nms3d}};
}

bool nms_order_2d(const Box2D& a, const Box2D& b) {
  if (a.score() != b.score()) {
    return a.score() > b.score();
  }
  return std::tuple(a.x_min(), a.y_min(), a.x_max(), a.y_max()) <
         std::tuple(b.x_min(), b.y_min(), b.x_max(), b.y_max());
}

bool nms_order_3d(const Box3D& a, const Box3D& b) {
  if (a.score() != b.score()) {
    return a.score() > b.score();
  }
  return std::tuple(a.x_min(), a.y_min(), a.z_min(), a.x_max(), a.y_max(), a.z_max()) <
         std::tuple(b.x_min(), b.y_min(), b.z_min(), b.x_max(), b.y_max(), b.z_max());
}

std::vector<Box2D> nms_2d(std::span<const Box2D> boxes, double tau) {
  if (!boxes.empty()) {
    const Box2D& first = boxes.front();
    for (const Box2D& b : boxes) {
      if (b.z() != first.z()) {
        throw MixedSlices("nms_2d input spans slices " + std::to_string(first.z()) + " and " +
                          std::to_string(b.z()));
      }
      if (b.class_id() != first.class_id()) {
        throw InvalidArgument("nms_2d input mixes class ids");
      }
    }
  }
  return greedy_nms(boxes, tau, nms_order_2d, iou_2d);
}

std::vector<Box3D> nms_3d(std::span<const Box3D> boxes, double tau) {
  if (!boxes.empty()) {
    const int class_id = boxes.front().class_id();
    if (std::any_of(boxes.begin(), boxes.end(), [&](const Box3D& b) { return b.class_id() != class_id; })) {
      throw InvalidArgument("nms_3d input mixes class ids");
    }
  }
  return greedy_nms(boxes, tau, nms_order_3d, iou_3d);
}

DetectionSet nms_per_slice(const DetectionSet& set, double tau) {
  std::map<std::pair<int, int>, std::vector<Box2D>> groups;
  for (const Box2D& b : set.boxes) {
    groups[{b.z(), b.class_id()}].push_back(b);
  }
  DetectionSet out = set;
  out.boxes.clear();
  for (const auto& [key, group] : groups) {
    const std::vector<Box2D> kept = nms_2d(group, tau);
    out.boxes.insert(out.boxes.end(), kept.begin(), kept.end());
  }
  return out;
}

std::vector<Track> link_tracks(const DetectionSet& set, const LiftParams& params) {
  params.validate();
  set.validate();

  std::map<int, std::vector<Box2D>> by_slice;
  for (const Box2D& b : set.boxes) {
    by_slice[b.z()].push_back(b);
  }

  std::vector<Track> tracks;
  std::vector<std::size_t> open;
  std::vector<LinkCandidate> candidates;
  for (const auto& [z, boxes] : by_slice) {
    std::erase_if(open, [&](std::size_t t) { return z - tracks[t].last_slice() > params.max_gap + 1; });

    candidates.clear();
    for (std::size_t t : open) {
      const Box2D& last = tracks[t].members.back();
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (boxes[i].class_id() != last.class_id()) {
          continue;
        }
        const double iou = iou_2d(last, boxes[i]);
        if (iou >= params.tau_link) {
          candidates.push_back({iou, t, i});
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const LinkCandidate& a, const LinkCandidate& b) {
      if (a.iou != b.iou) {
        return a.iou > b.iou;
      }
      return std::pair(a.track, a.box) < std::pair(b.track, b.box);
    });

    std::vector<bool> box_taken(boxes.size(), false);
    std::vector<std::size_t> extended;
    for (const LinkCandidate& c : candidates) {
      if (box_taken[c.box] || std::find(extended.begin(), extended.end(), c.track) != extended.end()) {
        continue;
      }
      Track& track = tracks[c.track];
      track.gaps += z - track.last_slice() - 1;
      track.members.push_back(boxes[c.box]);
      box_taken[c.box] = true;
      extended.push_back(c.track);
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (!box_taken[i]) {
        tracks.push_back(Track{{boxes[i]}, boxes[i].class_id(), 0});
        open.push_back(tracks.size() - 1);
      }
    }
  }
  return tracks;
}

std::vector<Box3D> tracks_to_boxes(std::span<const Track> tracks, const LiftParams& params) {
  params.validate();
  std::vector<Box3D> out;
  for (const Track& track : tracks) {
    if (static_cast<int>(track.members.size()) < params.min_len) {
      continue;
    }
    out.push_back(hull_3d(track.members));
  }
  return out;
}

std::vector<Box3D> lift(const DetectionSet& set, const LiftParams& params) {
  params.validate();
  const DetectionSet suppressed = nms_per_slice(set, params.tau_nms2d);
  const std::vector<Track> tracks = link_tracks(suppressed, params);
  const std::vector<Box3D> candidates = tracks_to_boxes(tracks, params);

  std::map<int, std::vector<Box3D>> by_class;
  for (const Box3D& b : candidates) {
    by_class[b.class_id()].push_back(b);
  }
  std::vector<Box3D> out;
  for (const auto& [class_id, group] : by_class) {
    const std::vector<Box3D> kept = nms_3d(group, params.tau_nms3d);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  return out;
}

nlohmann::json boxes3d_to_json(const std::string& scan_id, std::span<const Box3D> boxes,
                               const nlohmann::json& params) {
  json list = json::array();
  for (const Box3D& b : boxes) {
    list.push_back({{"x", {b.x_min(), b.x_max()}},
                    {"y", {b.y_min(), b.y_max()}},
                    {"z", {b.z_min(), b.z_max()}},
                    {"score", b.score()},
                    {"class_id", b.class_id()}});
  }
  json doc = {{"scan_id", scan_id}, {"boxes3d", std::move(list)}};
  if (!params.is_null()) {
    doc["params"] = params;
  }
  return doc;
}

std::vector<Box3D> boxes3d_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("boxes3d") || !doc["boxes3d"].is_array()) {
    throw SchemaViolation("expected an object with a \"boxes3d\" array");
  }
  auto interval = [](const json& b, const char* key) {
    if (!b.contains(key) || !b[key].is_array() || b[key].size() != 2 || !b[key][0].is_number_integer() ||
        !b[key][1].is_number_integer()) {
      throw SchemaViolation(std::string("boxes3d entry needs integer pair \"") + key + "\"");
    }
    return std::pair(b[key][0].get<int>(), b[key][1].get<int>());
  };
  std::vector<Box3D> out;
  for (const json& b : doc["boxes3d"]) {
    const auto [x0, x1] = interval(b, "x");
    const auto [y0, y1] = interval(b, "y");
    const auto [z0, z1] = interval(b, "z");
    if (!b.contains("score") || !b["score"].is_number() || !b.contains("class_id") ||
        !b["class_id"].is_number_integer()) {
      throw SchemaViolation("boxes3d entry needs numeric score and integer class_id");
    }
    try {
      out.emplace_back(x0, x1, y0, y1, z0, z1, b["score"].get<double>(), b["class_id"].get<int>());
    } catch (const InvalidBox& e) {
      throw SchemaViolation(std::string("invalid boxes3d entry: ") + e.what());
    }
  }
  return out;
}

}  // namespace slicelift
