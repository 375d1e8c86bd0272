#include "slicelift/detections.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

namespace slicelift {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaViolation(where + ": missing field \"" + key + "\"");
  }
  return *it;
}

std::int64_t require_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (v.is_number_integer()) {
    return v.get<std::int64_t>();
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 1e15) {
      return static_cast<std::int64_t>(d);
    }
  }
  throw SchemaViolation(where + ": field \"" + key + "\" must be an integer");
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) {
    throw SchemaViolation(where + ": field \"" + key + "\" must be a string");
  }
  return v.get<std::string>();
}

std::pair<double, double> require_interval(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw SchemaViolation(where + ": field \"" + key + "\" must be a [min, max] number pair");
  }
  const double lo = v[0].get<double>();
  const double hi = v[1].get<double>();
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw SchemaViolation(where + ": non-finite coordinate in \"" + key + "\"");
  }
  return {lo, hi};
}

// Rounds outward; huge values saturate so that clamping still applies.
std::int64_t floor_coord(double v) {
  return static_cast<std::int64_t>(std::clamp(std::floor(v), -1e12, 1e12));
}
std::int64_t ceil_coord(double v) { return static_cast<std::int64_t>(std::clamp(std::ceil(v), -1e12, 1e12)); }

}  // namespace

void DetectionSet::validate() const {
  if (scan_id.empty()) {
    throw EmptyScanId("scan_id must be non-empty");
  }
  if (nx < 1 || ny < 1 || num_slices < 1) {
    throw InvalidArgument("image_dims and num_slices must be >= 1");
  }
  for (const Box2D& b : boxes) {
    if (b.x_min() < 0 || b.x_max() > nx || b.y_min() < 0 || b.y_max() > ny || b.z() >= num_slices) {
      throw BoundsViolation("box on slice " + std::to_string(b.z()) + " lies outside the " + std::to_string(nx) +
                            "x" + std::to_string(ny) + "x" + std::to_string(num_slices) + " scan");
    }
  }
}

ParseResult parse_detections(std::string_view text, const ParseOptions& options) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaViolation(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    throw SchemaViolation("detections document must be a JSON object");
  }
  const std::string top = "detections";
  if (require_int(doc, "format_version", top) != kDetectionFormatVersion) {
    throw SchemaViolation("unsupported format_version (expected 1)");
  }

  ParseResult result;
  DetectionSet& set = result.set;
  set.scan_id = require_string(doc, "scan_id", top);
  if (set.scan_id.empty()) {
    throw EmptyScanId("scan_id must be non-empty");
  }
  const json& dims = require(doc, "image_dims", top);
  if (!dims.is_array() || dims.size() != 2 || !dims[0].is_number_integer() || !dims[1].is_number_integer()) {
    throw SchemaViolation("image_dims must be [nx, ny] integers");
  }
  const auto nx = dims[0].get<std::int64_t>();
  const auto ny = dims[1].get<std::int64_t>();
  const auto nz = require_int(doc, "num_slices", top);
  constexpr std::int64_t kMaxDim = std::numeric_limits<std::int32_t>::max();
  if (nx < 1 || ny < 1 || nz < 1 || nx > kMaxDim || ny > kMaxDim || nz > kMaxDim) {
    throw SchemaViolation("image_dims and num_slices must be positive");
  }
  set.nx = static_cast<int>(nx);
  set.ny = static_cast<int>(ny);
  set.num_slices = static_cast<int>(nz);
  set.detector_name = require_string(doc, "detector_name", top);
  set.preprocessing_tag = require_string(doc, "preprocessing_tag", top);

  const json& boxes = require(doc, "boxes", top);
  if (!boxes.is_array()) {
    throw SchemaViolation("boxes must be an array");
  }
  set.boxes.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const json& b = boxes[i];
    const std::string where = "boxes[" + std::to_string(i) + "]";
    if (!b.is_object()) {
      throw SchemaViolation(where + " must be an object");
    }
    const std::int64_t z = require_int(b, "z", where);
    const auto [x_lo, x_hi] = require_interval(b, "x", where);
    const auto [y_lo, y_hi] = require_interval(b, "y", where);
    const json& score_json = require(b, "score", where);
    if (!score_json.is_number()) {
      throw SchemaViolation(where + ": score must be a number");
    }
    const double score = score_json.get<double>();
    if (!(score >= 0.0 && score <= 1.0)) {
      throw SchemaViolation(where + ": score outside [0, 1]");
    }
    const std::int64_t class_id = require_int(b, "class_id", where);
    if (class_id < 0 || class_id > kMaxDim) {
      throw SchemaViolation(where + ": class_id must be a non-negative integer");
    }
    if (!(x_lo < x_hi) || !(y_lo < y_hi)) {
      if (options.strict) {
        throw SchemaViolation(where + ": empty box (min >= max)");
      }
      ++result.dropped_out_of_bounds;
      continue;
    }

    std::int64_t x0 = floor_coord(x_lo);
    std::int64_t x1 = ceil_coord(x_hi);
    std::int64_t y0 = floor_coord(y_lo);
    std::int64_t y1 = ceil_coord(y_hi);
    const bool inside = z >= 0 && z < nz && x0 >= 0 && x1 <= nx && y0 >= 0 && y1 <= ny;
    if (!inside) {
      if (options.strict) {
        throw BoundsViolation(where + ": box lies outside the " + std::to_string(nx) + "x" + std::to_string(ny) +
                              "x" + std::to_string(nz) + " scan");
      }
      x0 = std::clamp<std::int64_t>(x0, 0, nx);
      x1 = std::clamp<std::int64_t>(x1, 0, nx);
      y0 = std::clamp<std::int64_t>(y0, 0, ny);
      y1 = std::clamp<std::int64_t>(y1, 0, ny);
      if (z < 0 || z >= nz || x0 >= x1 || y0 >= y1) {
        ++result.dropped_out_of_bounds;
        continue;
      }
    }
    if (score < options.min_score) {
      ++result.dropped_low_score;
      continue;
    }
    set.boxes.emplace_back(static_cast<int>(z), static_cast<int>(x0), static_cast<int>(x1), static_cast<int>(y0),
                           static_cast<int>(y1), score, static_cast<int>(class_id));
  }
  return result;
}

ParseResult read_detections(const std::filesystem::path& path, const ParseOptions& options) {
  return parse_detections(read_text_file(path), options);
}

nlohmann::json detections_to_json(const DetectionSet& set, const nlohmann::json& params) {
  json doc = json::object();
  doc["format_version"] = kDetectionFormatVersion;
  doc["scan_id"] = set.scan_id;
  doc["image_dims"] = {set.nx, set.ny};
  doc["num_slices"] = set.num_slices;
  doc["detector_name"] = set.detector_name;
  doc["preprocessing_tag"] = set.preprocessing_tag;
  json boxes = json::array();
  for (const Box2D& b : set.boxes) {
    boxes.push_back({{"z", b.z()},
                     {"x", {b.x_min(), b.x_max()}},
                     {"y", {b.y_min(), b.y_max()}},
                     {"score", b.score()},
                     {"class_id", b.class_id()}});
  }
  doc["boxes"] = std::move(boxes);
  if (!params.is_null()) {
    doc["params"] = params;
  }
  return doc;
}

void write_detections(const DetectionSet& set, const std::filesystem::path& path, const nlohmann::json& params) {
  set.validate();
  write_json_file(detections_to_json(set, params), path);
}

void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoFailure("cannot open for writing: " + path.string());
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw IoFailure("write failed: " + path.string());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoFailure("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace slicelift
