#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slicelift/geometry.hpp"
#include "slicelift/volume.hpp"

namespace slicelift {

struct BinaryMask {
  Dims dims;
  std::vector<std::uint8_t> voxels;  // 0 or 1, x fastest

  bool at(int x, int y, int z) const { return voxels[dims.index(x, y, z)] != 0; }
};

enum class Connectivity { kFace = 6, kFull = 26 };

struct Components {
  Dims dims;
  std::vector<std::int32_t> ids;  // 0 = background, objects numbered 1..count
  int count = 0;
};

// Object boxes derived from a segmentation. Scores are fixed at 1.0.
struct GtObject {
  int object_id = 0;
  Box3D box3d;
  std::map<int, Box2D> slice_boxes;  // z -> tight box of the object's voxels on that slice
  std::int64_t voxel_count = 0;
};

struct GtOptions {
  std::vector<int> foreground;  // empty: every label >= 1 (kidney and tumor merged)
  Connectivity connectivity = Connectivity::kFull;
  std::int64_t min_voxels = 50;
};

// Voxel is set iff its label is in `foreground`. Throws EmptyInput when the
// foreground set is empty; use the one-argument overload for "all >= 1".
BinaryMask binarize(const LabelVolume& labels, std::span<const int> foreground);
BinaryMask binarize(const LabelVolume& labels);

// Two-pass union-find labeling. Ids are assigned in ascending order of each
// component's first voxel in x-fastest scan order.
Components connected_components_3d(const BinaryMask& mask, Connectivity connectivity = Connectivity::kFull);

// Components below min_voxels are dropped; survivors are renumbered 1..n in
// scan order.
std::vector<GtObject> extract_gt(const LabelVolume& labels, const GtOptions& options = {});

// Ground truth in the detection (2D) and lifted-box (3D) shapes, each box
// carrying its "object_id".
nlohmann::json gt2d_to_json(const std::string& scan_id, const Dims& dims, std::span<const GtObject> objects,
                            const nlohmann::json& params = nullptr);
nlohmann::json gt3d_to_json(const std::string& scan_id, std::span<const GtObject> objects,
                            const nlohmann::json& params = nullptr);

nlohmann::json to_json(const GtOptions& options);

}  // namespace slicelift
