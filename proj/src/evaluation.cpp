#include "slicelift/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

namespace slicelift {

namespace {

using nlohmann::json;

template <typename Box, typename Overlap>
MatchResult greedy_match(std::span<const Box> gt, std::span<const Box> pred, Overlap overlap) {
  struct Candidate {
    double iou;
    double score;
    int gt;
    int pred;
    double dice;
  };
  std::vector<Candidate> candidates;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      const OverlapCounts counts = overlap(gt[g], pred[p]);
      if (counts.intersection > 0) {
        candidates.push_back(
            {counts.iou(), pred[p].score(), static_cast<int>(g), static_cast<int>(p), counts.dice()});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tuple(-a.iou, -a.score, a.gt, a.pred) < std::tuple(-b.iou, -b.score, b.gt, b.pred);
  });

  MatchResult result;
  std::vector<bool> gt_used(gt.size(), false);
  std::vector<bool> pred_used(pred.size(), false);
  for (const Candidate& c : candidates) {
    if (gt_used[static_cast<std::size_t>(c.gt)] || pred_used[static_cast<std::size_t>(c.pred)]) {
      continue;
    }
    gt_used[static_cast<std::size_t>(c.gt)] = true;
    pred_used[static_cast<std::size_t>(c.pred)] = true;
    result.pairs.push_back({c.gt, c.pred, c.iou, c.dice});
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (!gt_used[g]) {
      result.unmatched_gt.push_back(static_cast<int>(g));
    }
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_used[p]) {
      result.unmatched_pred.push_back(static_cast<int>(p));
    }
  }
  return result;
}

double ratio(double num, std::size_t den) { return den == 0 ? 0.0 : num / static_cast<double>(den); }

json metrics_to_json(const ScanMetrics& m) {
  return {{"dice_2d", m.dice_2d},
          {"iou_2d", m.iou_2d},
          {"dice_3d", m.dice_3d},
          {"iou_3d", m.iou_3d},
          {"precision_2d", m.precision_2d},
          {"recall_2d", m.recall_2d},
          {"precision_3d", m.precision_3d},
          {"recall_3d", m.recall_3d},
          {"matched_dice_2d", m.matched_dice_2d},
          {"matched_dice_3d", m.matched_dice_3d},
          {"counts",
           {{"gt_2d", m.gt_2d},
            {"pred_2d", m.pred_2d},
            {"matched_2d", m.matched_2d},
            {"tp_2d", m.tp_2d},
            {"gt_3d", m.gt_3d},
            {"pred_3d", m.pred_3d},
            {"matched_3d", m.matched_3d},
            {"tp_3d", m.tp_3d}}}};
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string centre(const std::string& s, std::size_t width) {
  if (s.size() >= width) {
    return s;
  }
  const std::size_t left = (width - s.size()) / 2;
  return std::string(left, ' ') + s + std::string(width - s.size() - left, ' ');
}

std::string aggregate_label(const EvalReport& report) {
  return report.set_name + " (n=" + std::to_string(report.per_scan.size()) + ")";
}

void draw_outline(RgbImage& image, const Box2D& box, Rgb color) {
  if (box.x_min() < 0 || box.y_min() < 0 || box.x_max() > image.nx || box.y_max() > image.ny) {
    throw IndexOutOfRange("overlay box lies outside the image");
  }
  for (int x = box.x_min(); x < box.x_max(); ++x) {
    image.at(x, box.y_min()) = color;
    image.at(x, box.y_max() - 1) = color;
  }
  for (int y = box.y_min(); y < box.y_max(); ++y) {
    image.at(box.x_min(), y) = color;
    image.at(box.x_max() - 1, y) = color;
  }
}

}  // namespace

MatchResult match_boxes(std::span<const Box2D> gt, std::span<const Box2D> pred) {
  return greedy_match(gt, pred, overlap_2d);
}

MatchResult match_boxes(std::span<const Box3D> gt, std::span<const Box3D> pred) {
  return greedy_match(gt, pred, overlap_3d);
}

nlohmann::json EvalOptions::to_json() const {
  return {{"class_id", class_id},
          {"tp_iou", tp_iou},
          {"slice_averaging", averaging == SliceAveraging::kPerGtBox ? "per_gt_box" : "per_kidney_slice"}};
}

ScanMetrics score_scan(const std::string& scan_id, std::span<const GtObject> gt, const DetectionSet& pred2d,
                       std::span<const Box3D> pred3d, const EvalOptions& options) {
  if (pred2d.scan_id != scan_id) {
    throw ScanMismatch("detections belong to scan \"" + pred2d.scan_id + "\", expected \"" + scan_id + "\"");
  }
  std::map<int, std::vector<Box2D>> gt_by_slice;
  for (const GtObject& object : gt) {
    for (const auto& [z, box] : object.slice_boxes) {
      if (z >= pred2d.num_slices || box.x_max() > pred2d.nx || box.y_max() > pred2d.ny) {
        throw ScanMismatch("ground truth extends beyond the " + std::to_string(pred2d.nx) + "x" +
                           std::to_string(pred2d.ny) + "x" + std::to_string(pred2d.num_slices) +
                           " detection grid of scan " + scan_id);
      }
      gt_by_slice[z].push_back(box);
    }
  }
  std::map<int, std::vector<Box2D>> pred_by_slice;
  ScanMetrics m;
  m.scan_id = scan_id;
  for (const Box2D& b : pred2d.boxes) {
    if (b.class_id() == options.class_id) {
      pred_by_slice[b.z()].push_back(b);
      ++m.pred_2d;
    }
  }

  // 2D
  double dice_sum = 0.0;
  double iou_sum = 0.0;
  double slice_dice_sum = 0.0;
  double slice_iou_sum = 0.0;
  double matched_dice_sum = 0.0;
  static const std::vector<Box2D> kNone;
  for (const auto& [z, gt_boxes] : gt_by_slice) {
    const auto it = pred_by_slice.find(z);
    const std::vector<Box2D>& preds = it == pred_by_slice.end() ? kNone : it->second;
    const MatchResult match = match_boxes(std::span<const Box2D>(gt_boxes), std::span<const Box2D>(preds));
    double slice_dice = 0.0;
    double slice_iou = 0.0;
    // Accumulate in GT order so the sum does not depend on match order.
    std::vector<const MatchPair*> by_gt(gt_boxes.size(), nullptr);
    for (const MatchPair& p : match.pairs) {
      by_gt[static_cast<std::size_t>(p.gt_id)] = &p;
    }
    for (const MatchPair* p : by_gt) {
      if (p == nullptr) {
        continue;
      }
      dice_sum += p->dice;
      iou_sum += p->iou;
      slice_dice += p->dice;
      slice_iou += p->iou;
      matched_dice_sum += p->dice;
      ++m.matched_2d;
      if (p->iou >= options.tp_iou) {
        ++m.tp_2d;
      }
    }
    m.gt_2d += gt_boxes.size();
    slice_dice_sum += slice_dice / static_cast<double>(gt_boxes.size());
    slice_iou_sum += slice_iou / static_cast<double>(gt_boxes.size());
  }
  if (options.averaging == SliceAveraging::kPerGtBox) {
    m.dice_2d = ratio(dice_sum, m.gt_2d);
    m.iou_2d = ratio(iou_sum, m.gt_2d);
  } else {
    m.dice_2d = ratio(slice_dice_sum, gt_by_slice.size());
    m.iou_2d = ratio(slice_iou_sum, gt_by_slice.size());
  }
  m.matched_dice_2d = ratio(matched_dice_sum, m.matched_2d);
  m.precision_2d = ratio(static_cast<double>(m.tp_2d), m.pred_2d);
  m.recall_2d = ratio(static_cast<double>(m.tp_2d), m.gt_2d);

  // 3D
  std::vector<Box3D> gt3;
  gt3.reserve(gt.size());
  for (const GtObject& object : gt) {
    gt3.push_back(object.box3d);
  }
  std::vector<Box3D> preds3;
  for (const Box3D& b : pred3d) {
    if (b.class_id() == options.class_id) {
      preds3.push_back(b);
    }
  }
  const MatchResult match3 = match_boxes(std::span<const Box3D>(gt3), std::span<const Box3D>(preds3));
  std::vector<const MatchPair*> by_gt3(gt3.size(), nullptr);
  for (const MatchPair& p : match3.pairs) {
    by_gt3[static_cast<std::size_t>(p.gt_id)] = &p;
  }
  double dice3_sum = 0.0;
  double iou3_sum = 0.0;
  for (const MatchPair* p : by_gt3) {
    if (p == nullptr) {
      continue;
    }
    dice3_sum += p->dice;
    iou3_sum += p->iou;
    ++m.matched_3d;
    if (p->iou >= options.tp_iou) {
      ++m.tp_3d;
    }
  }
  m.gt_3d = gt3.size();
  m.pred_3d = preds3.size();
  m.dice_3d = ratio(dice3_sum, m.gt_3d);
  m.iou_3d = ratio(iou3_sum, m.gt_3d);
  m.matched_dice_3d = ratio(dice3_sum, m.matched_3d);
  m.precision_3d = ratio(static_cast<double>(m.tp_3d), m.pred_3d);
  m.recall_3d = ratio(static_cast<double>(m.tp_3d), m.gt_3d);
  return m;
}

EvalReport aggregate(std::span<const ScanMetrics> scans, const std::string& set_name, const nlohmann::json& params) {
  if (scans.empty()) {
    throw EmptyInput("cannot aggregate zero scans");
  }
  EvalReport report;
  report.set_name = set_name;
  report.params = params;
  for (const ScanMetrics& s : scans) {
    if (!report.per_scan.emplace(s.scan_id, s).second) {
      throw InvalidArgument("duplicate scan id in aggregate: " + s.scan_id);
    }
  }
  // Iterate in scan-id order so the floating-point sums are order independent.
  ScanMetrics& a = report.aggregate;
  a.scan_id = set_name;
  for (const auto& [id, s] : report.per_scan) {
    a.dice_2d += s.dice_2d;
    a.iou_2d += s.iou_2d;
    a.dice_3d += s.dice_3d;
    a.iou_3d += s.iou_3d;
    a.precision_2d += s.precision_2d;
    a.recall_2d += s.recall_2d;
    a.precision_3d += s.precision_3d;
    a.recall_3d += s.recall_3d;
    a.matched_dice_2d += s.matched_dice_2d;
    a.matched_dice_3d += s.matched_dice_3d;
    a.gt_2d += s.gt_2d;
    a.pred_2d += s.pred_2d;
    a.matched_2d += s.matched_2d;
    a.tp_2d += s.tp_2d;
    a.gt_3d += s.gt_3d;
    a.pred_3d += s.pred_3d;
    a.matched_3d += s.matched_3d;
    a.tp_3d += s.tp_3d;
  }
  const auto n = static_cast<double>(report.per_scan.size());
  for (double* v : {&a.dice_2d, &a.iou_2d, &a.dice_3d, &a.iou_3d, &a.precision_2d, &a.recall_2d, &a.precision_3d,
                    &a.recall_3d, &a.matched_dice_2d, &a.matched_dice_3d}) {
    *v /= n;
  }
  return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
  json per_scan = json::object();
  for (const auto& [id, m] : report.per_scan) {
    per_scan[id] = metrics_to_json(m);
  }
  json doc = {{"set_name", report.set_name},
              {"n_scans", report.per_scan.size()},
              {"per_scan", std::move(per_scan)},
              {"aggregate", metrics_to_json(report.aggregate)}};
  if (!report.params.is_null()) {
    doc["params"] = report.params;
  }
  return doc;
}

std::string format_table(std::span<const EvalReport> reports, bool include_scans) {
  constexpr std::size_t kCol = 8;
  constexpr std::size_t kGroup = 2 * kCol;
  constexpr std::size_t kGap = 2;

  std::size_t label_width = 12;
  for (const EvalReport& r : reports) {
    label_width = std::max(label_width, aggregate_label(r).size());
    if (include_scans) {
      for (const auto& [id, m] : r.per_scan) {
        label_width = std::max(label_width, id.size());
      }
    }
  }
  label_width += 2;
  const std::size_t total = label_width + kGroup + kGap + kGroup;

  auto row = [&](const std::string& label, const ScanMetrics& m) {
    return pad_right(label, label_width) + pad_left(fixed3(m.dice_2d), kCol) + pad_left(fixed3(m.iou_2d), kCol) +
           std::string(kGap, ' ') + pad_left(fixed3(m.dice_3d), kCol) + pad_left(fixed3(m.iou_3d), kCol) + "\n";
  };

  std::string out;
  out += std::string(total, '=') + "\n";
  out += std::string(label_width, ' ') + centre("2D", kGroup) + std::string(kGap, ' ') + centre("3D", kGroup) + "\n";
  out += std::string(label_width, ' ') + "  " + std::string(kGroup - 2, '-') + std::string(kGap, ' ') + "  " +
         std::string(kGroup - 2, '-') + "\n";
  out += std::string(label_width, ' ') + pad_left("Dice", kCol) + pad_left("IoU", kCol) + std::string(kGap, ' ') +
         pad_left("Dice", kCol) + pad_left("IoU", kCol) + "\n";
  out += std::string(total, '-') + "\n";
  for (const EvalReport& r : reports) {
    if (include_scans) {
      for (const auto& [id, m] : r.per_scan) {
        out += row(id, m);
      }
    }
    out += row(aggregate_label(r), r.aggregate);
  }
  out += std::string(total, '=') + "\n";
  return out;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "scan_id,dice_2d,iou_2d,dice_3d,iou_3d,precision_2d,recall_2d,precision_3d,recall_3d,"
         "gt_2d,pred_2d,gt_3d,pred_3d\n";
  auto row = [&](const std::string& label, const ScanMetrics& m) {
    out << label << ',' << fixed6(m.dice_2d) << ',' << fixed6(m.iou_2d) << ',' << fixed6(m.dice_3d) << ','
        << fixed6(m.iou_3d) << ',' << fixed6(m.precision_2d) << ',' << fixed6(m.recall_2d) << ','
        << fixed6(m.precision_3d) << ',' << fixed6(m.recall_3d) << ',' << m.gt_2d << ',' << m.pred_2d << ','
        << m.gt_3d << ',' << m.pred_3d << '\n';
  };
  for (const auto& [id, m] : report.per_scan) {
    row(id, m);
  }
  row(aggregate_label(report), report.aggregate);
  return out.str();
}

RgbImage draw_overlay(const Image8& slice, std::span<const Box2D> gt, std::span<const Box2D> pred) {
  RgbImage image(slice.nx, slice.ny);
  for (std::size_t i = 0; i < slice.data.size(); ++i) {
    const std::uint8_t v = slice.data[i];
    image.data[i] = {v, v, v};
  }
  for (const Box2D& b : gt) {
    draw_outline(image, b, kGroundTruthColor);
  }
  for (const Box2D& b : pred) {
    draw_outline(image, b, kPredictionColor);
  }
  return image;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoFailure("cannot open for writing: " + path.string());
  }
  out << "P6\n" << image.nx << ' ' << image.ny << "\n255\n";
  for (const Rgb& px : image.data) {
    const char rgb[3] = {static_cast<char>(px.r), static_cast<char>(px.g), static_cast<char>(px.b)};
    out.write(rgb, 3);
  }
  if (!out) {
    throw IoFailure("write failed: " + path.string());
  }
}

void render_overlay(const Image8& slice, std::span<const Box2D> gt, std::span<const Box2D> pred,
                    const std::filesystem::path& path) {
  write_ppm(draw_overlay(slice, gt, pred), path);
}

}  // namespace slicelift
