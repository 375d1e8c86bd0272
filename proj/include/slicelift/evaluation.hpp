#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slicelift/detections.hpp"
#include "slicelift/geometry.hpp"
#include "slicelift/groundtruth.hpp"
#include "slicelift/volume.hpp"

namespace slicelift {

struct MatchPair {
  int gt_id;       // index into the gt list
  int pred_index;  // index into the prediction list
  double iou;
  double dice;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // in acceptance order (descending iou)
  std::vector<int> unmatched_gt;
  std::vector<int> unmatched_pred;
};

// Greedy one-to-one matching. Every pair with iou > 0 is ranked by iou
// descending, then prediction score descending, then gt id ascending (then
// prediction index), and accepted when both sides are still free.
MatchResult match_boxes(std::span<const Box2D> gt, std::span<const Box2D> pred);
MatchResult match_boxes(std::span<const Box3D> gt, std::span<const Box3D> pred);

enum class SliceAveraging {
  kPerGtBox,        // mean over every GT slice box
  kPerKidneySlice,  // mean per slice first, then over slices that contain GT
};

struct EvalOptions {
  int class_id = 0;
  double tp_iou = 0.5;  // precision/recall threshold
  SliceAveraging averaging = SliceAveraging::kPerGtBox;

  nlohmann::json to_json() const;
};

struct ScanMetrics {
  std::string scan_id;
  // GT-anchored means: unmatched GT contributes 0.
  double dice_2d = 0.0;
  double iou_2d = 0.0;
  double dice_3d = 0.0;
  double iou_3d = 0.0;
  double precision_2d = 0.0;
  double recall_2d = 0.0;
  double precision_3d = 0.0;
  double recall_3d = 0.0;
  // Means over matched pairs only.
  double matched_dice_2d = 0.0;
  double matched_dice_3d = 0.0;

  std::size_t gt_2d = 0;
  std::size_t pred_2d = 0;
  std::size_t matched_2d = 0;
  std::size_t tp_2d = 0;
  std::size_t gt_3d = 0;
  std::size_t pred_3d = 0;
  std::size_t matched_3d = 0;
  std::size_t tp_3d = 0;
};

// Scores one scan. 2D: per slice, GT slice boxes vs predictions of
// options.class_id on that slice. 3D: GT cuboids vs pred3d. Predictions of
// other classes are ignored. Throws ScanMismatch when pred2d belongs to a
// different scan or cannot hold the GT geometry.
ScanMetrics score_scan(const std::string& scan_id, std::span<const GtObject> gt, const DetectionSet& pred2d,
                       std::span<const Box3D> pred3d, const EvalOptions& options = {});

struct EvalReport {
  std::string set_name;
  std::map<std::string, ScanMetrics> per_scan;
  ScanMetrics aggregate;  // unweighted means over scans; counts are sums
  nlohmann::json params;
};

// Throws EmptyInput on an empty list and InvalidArgument on duplicate scan ids.
EvalReport aggregate(std::span<const ScanMetrics> scans, const std::string& set_name = "All scans",
                     const nlohmann::json& params = nullptr);

nlohmann::json report_to_json(const EvalReport& report);

// Aligned text table: "2D"/"3D" column groups with Dice and IoU under each;
// one row per scan (optional) and one aggregate row per set, labelled
// "<set name> (n=<scans>)".
std::string format_table(std::span<const EvalReport> reports, bool include_scans = true);
std::string report_to_csv(const EvalReport& report);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb&) const = default;
};

using RgbImage = Grid2D<Rgb>;

inline constexpr Rgb kGroundTruthColor{0, 255, 0};
inline constexpr Rgb kPredictionColor{255, 0, 0};

// Grey slice with 1-px rectangle outlines: GT first, predictions on top.
// Throws IndexOutOfRange if a box leaves the image.
RgbImage draw_overlay(const Image8& slice, std::span<const Box2D> gt, std::span<const Box2D> pred);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);
void render_overlay(const Image8& slice, std::span<const Box2D> gt, std::span<const Box2D> pred,
                    const std::filesystem::path& path);

}  // namespace slicelift
