#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "slicelift/geometry.hpp"

namespace slicelift {

inline constexpr int kDetectionFormatVersion = 1;

// All 2D detections for one scan, in the order the producer emitted them.
struct DetectionSet {
  std::string scan_id;
  int nx = 0;
  int ny = 0;
  int num_slices = 0;
  std::string detector_name;
  std::string preprocessing_tag;
  std::vector<Box2D> boxes;

  // Throws EmptyScanId / BoundsViolation / InvalidArgument.
  void validate() const;
  bool operator==(const DetectionSet&) const = default;
};

struct ParseOptions {
  // Strict: out-of-image boxes and malformed boxes throw instead of being dropped.
  bool strict = false;
  // Boxes scoring below this are discarded during parsing.
  double min_score = 0.25;
};

struct ParseResult {
  DetectionSet set;
  std::size_t dropped_out_of_bounds = 0;  // degenerate after clamping, or z out of range
  std::size_t dropped_low_score = 0;
};

// Parses the format_version 1 interchange document. Fractional coordinates
// are rounded outward (floor min, ceil max) and then clamped to the image.
ParseResult parse_detections(std::string_view text, const ParseOptions& options = {});
ParseResult read_detections(const std::filesystem::path& path, const ParseOptions& options = {});

// `params`, when non-null, is embedded under "params" for provenance; parsers
// ignore it.
nlohmann::json detections_to_json(const DetectionSet& set, const nlohmann::json& params = nullptr);
void write_detections(const DetectionSet& set, const std::filesystem::path& path,
                      const nlohmann::json& params = nullptr);

// Shared by every JSON writer in the project: pretty-printed, trailing newline.
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace slicelift
