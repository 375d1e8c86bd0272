#include "slicelift/groundtruth.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>

namespace slicelift {

namespace {

using nlohmann::json;

struct Offset {
  int dx;
  int dy;
  int dz;
};

// Neighbours already visited in x-fastest raster order.
std::vector<Offset> backward_offsets(Connectivity connectivity) {
  if (connectivity == Connectivity::kFace) {
    return {{-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
  }
  std::vector<Offset> out;
  for (int dz = -1; dz <= 0; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const bool before = dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
        if (before) {
          out.push_back({dx, dy, dz});
        }
      }
    }
  }
  return out;
}

class DisjointSets {
 public:
  std::int32_t make() {
    parent_.push_back(static_cast<std::int32_t>(parent_.size()));
    return parent_.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent_[static_cast<std::size_t>(x)] != x) {
      auto& p = parent_[static_cast<std::size_t>(x)];
      p = parent_[static_cast<std::size_t>(p)];
      x = p;
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) {
      parent_[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  }

 private:
  std::vector<std::int32_t> parent_;
};

struct Bounds {
  int x_min = std::numeric_limits<int>::max();
  int x_max = std::numeric_limits<int>::min();
  int y_min = std::numeric_limits<int>::max();
  int y_max = std::numeric_limits<int>::min();

  void add(int x, int y) {
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
  }
};

}  // namespace

BinaryMask binarize(const LabelVolume& labels, std::span<const int> foreground) {
  if (foreground.empty()) {
    throw EmptyInput("foreground label set must be non-empty");
  }
  BinaryMask mask{labels.dims(), std::vector<std::uint8_t>(labels.labels().size(), 0)};
  const auto values = labels.labels();
  for (std::size_t i = 0; i < values.size(); ++i) {
    mask.voxels[i] = std::find(foreground.begin(), foreground.end(), values[i]) != foreground.end() ? 1 : 0;
  }
  return mask;
}

BinaryMask binarize(const LabelVolume& labels) {
  BinaryMask mask{labels.dims(), std::vector<std::uint8_t>(labels.labels().size(), 0)};
  const auto values = labels.labels();
  for (std::size_t i = 0; i < values.size(); ++i) {
    mask.voxels[i] = values[i] >= 1 ? 1 : 0;
  }
  return mask;
}

Components connected_components_3d(const BinaryMask& mask, Connectivity connectivity) {
  const Dims& d = mask.dims;
  if (mask.voxels.size() != d.count()) {
    throw InvalidArgument("mask size does not match its dims");
  }
  const std::vector<Offset> offsets = backward_offsets(connectivity);
  std::vector<std::int32_t> provisional(d.count(), -1);
  DisjointSets sets;

  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::size_t i = d.index(x, y, z);
        if (mask.voxels[i] == 0) {
          continue;
        }
        std::int32_t label = -1;
        for (const Offset& o : offsets) {
          const int nx = x + o.dx;
          const int ny = y + o.dy;
          const int nz = z + o.dz;
          if (nx < 0 || ny < 0 || nz < 0 || nx >= d.nx || ny >= d.ny) {
            continue;
          }
          const std::int32_t neighbour = provisional[d.index(nx, ny, nz)];
          if (neighbour < 0) {
            continue;
          }
          if (label < 0) {
            label = neighbour;
          } else {
            sets.unite(label, neighbour);
          }
        }
        provisional[i] = label < 0 ? sets.make() : label;
      }
    }
  }

  Components out{d, std::vector<std::int32_t>(d.count(), 0), 0};
  std::vector<std::int32_t> final_id;
  for (std::size_t i = 0; i < provisional.size(); ++i) {
    if (provisional[i] < 0) {
      continue;
    }
    const auto root = static_cast<std::size_t>(sets.find(provisional[i]));
    if (root >= final_id.size()) {
      final_id.resize(root + 1, 0);
    }
    if (final_id[root] == 0) {
      final_id[root] = ++out.count;
    }
    out.ids[i] = final_id[root];
  }
  return out;
}

std::vector<GtObject> extract_gt(const LabelVolume& labels, const GtOptions& options) {
  const BinaryMask mask = options.foreground.empty() ? binarize(labels) : binarize(labels, options.foreground);
  const Components components = connected_components_3d(mask, options.connectivity);
  const Dims& d = components.dims;

  std::vector<std::map<int, Bounds>> slices(static_cast<std::size_t>(components.count));
  std::vector<std::int64_t> counts(static_cast<std::size_t>(components.count), 0);
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const std::int32_t id = components.ids[d.index(x, y, z)];
        if (id == 0) {
          continue;
        }
        const auto k = static_cast<std::size_t>(id - 1);
        slices[k][z].add(x, y);
        ++counts[k];
      }
    }
  }

  std::vector<GtObject> out;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    if (counts[k] < options.min_voxels) {
      continue;
    }
    std::map<int, Box2D> slice_boxes;
    std::vector<Box2D> members;
    for (const auto& [z, b] : slices[k]) {
      const Box2D box(z, b.x_min, b.x_max + 1, b.y_min, b.y_max + 1, 1.0, 0);
      slice_boxes.emplace(z, box);
      members.push_back(box);
    }
    const int object_id = static_cast<int>(out.size()) + 1;
    out.push_back(GtObject{object_id, hull_3d(members), std::move(slice_boxes), counts[k]});
  }
  return out;
}

nlohmann::json gt2d_to_json(const std::string& scan_id, const Dims& dims, std::span<const GtObject> objects,
                            const nlohmann::json& params) {
  json boxes = json::array();
  // Slice-major, like detector output.
  std::map<int, std::vector<std::pair<int, const Box2D*>>> by_slice;
  for (const GtObject& o : objects) {
    for (const auto& [z, b] : o.slice_boxes) {
      by_slice[z].emplace_back(o.object_id, &b);
    }
  }
  for (const auto& [z, entries] : by_slice) {
    for (const auto& [object_id, b] : entries) {
      boxes.push_back({{"z", z},
                       {"x", {b->x_min(), b->x_max()}},
                       {"y", {b->y_min(), b->y_max()}},
                       {"score", 1.0},
                       {"class_id", b->class_id()},
                       {"object_id", object_id}});
    }
  }
  json doc = {{"format_version", 1},
              {"scan_id", scan_id},
              {"image_dims", {dims.nx, dims.ny}},
              {"num_slices", dims.nz},
              {"detector_name", "ground_truth"},
              {"preprocessing_tag", "none"},
              {"boxes", std::move(boxes)}};
  if (!params.is_null()) {
    doc["params"] = params;
  }
  return doc;
}

nlohmann::json gt3d_to_json(const std::string& scan_id, std::span<const GtObject> objects,
                            const nlohmann::json& params) {
  json list = json::array();
  for (const GtObject& o : objects) {
    const Box3D& b = o.box3d;
    list.push_back({{"x", {b.x_min(), b.x_max()}},
                    {"y", {b.y_min(), b.y_max()}},
                    {"z", {b.z_min(), b.z_max()}},
                    {"score", 1.0},
                    {"class_id", b.class_id()},
                    {"object_id", o.object_id},
                    {"voxel_count", o.voxel_count}});
  }
  json doc = {{"scan_id", scan_id}, {"boxes3d", std::move(list)}};
  if (!params.is_null()) {
    doc["params"] = params;
  }
  return doc;
}

nlohmann::json to_json(const GtOptions& options) {
  json fg = json::array();
  for (int l : options.foreground) {
    fg.push_back(l);
  }
  return {{"foreground", options.foreground.empty() ? json("all>=1") : fg},
          {"connectivity", static_cast<int>(options.connectivity)},
          {"min_voxels", options.min_voxels}};
}

}  // namespace slicelift
