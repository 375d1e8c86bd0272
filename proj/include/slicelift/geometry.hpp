#pragma once

#include <cstdint>
#include <span>

#include "slicelift/error.hpp"

namespace slicelift {

// Scored axis-aligned rectangle on slice z. Bounds are integer pixels,
// half-open: [x_min, x_max) x [y_min, y_max). Construction rejects empty
// boxes, scores outside [0, 1] and negative slice or class indices.
class Box2D {
 public:
  Box2D(int z, int x_min, int x_max, int y_min, int y_max, double score = 1.0, int class_id = 0);

  int z() const { return z_; }
  int x_min() const { return x_min_; }
  int x_max() const { return x_max_; }
  int y_min() const { return y_min_; }
  int y_max() const { return y_max_; }
  double score() const { return score_; }
  int class_id() const { return class_id_; }

  int width() const { return x_max_ - x_min_; }
  int height() const { return y_max_ - y_min_; }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }

  Box2D with_score(double score) const { return {z_, x_min_, x_max_, y_min_, y_max_, score, class_id_}; }

  bool operator==(const Box2D&) const = default;

 private:
  int z_;
  int x_min_;
  int x_max_;
  int y_min_;
  int y_max_;
  double score_;
  int class_id_;
};

// Scored axis-aligned cuboid, half-open voxel bounds on all three axes.
class Box3D {
 public:
  Box3D(int x_min, int x_max, int y_min, int y_max, int z_min, int z_max, double score = 1.0, int class_id = 0);

  int x_min() const { return x_min_; }
  int x_max() const { return x_max_; }
  int y_min() const { return y_min_; }
  int y_max() const { return y_max_; }
  int z_min() const { return z_min_; }
  int z_max() const { return z_max_; }
  double score() const { return score_; }
  int class_id() const { return class_id_; }

  std::int64_t volume() const {
    return static_cast<std::int64_t>(x_max_ - x_min_) * (y_max_ - y_min_) * (z_max_ - z_min_);
  }

  bool operator==(const Box3D&) const = default;

 private:
  int x_min_;
  int x_max_;
  int y_min_;
  int y_max_;
  int z_min_;
  int z_max_;
  double score_;
  int class_id_;
};

// Exact pixel/voxel counts behind the ratio measures.
struct OverlapCounts {
  std::int64_t intersection = 0;
  std::int64_t size_a = 0;
  std::int64_t size_b = 0;

  std::int64_t union_size() const { return size_a + size_b - intersection; }
  double iou() const { return static_cast<double>(intersection) / static_cast<double>(union_size()); }
  double dice() const { return 2.0 * static_cast<double>(intersection) / static_cast<double>(size_a + size_b); }
};

// Planar overlap; slice indices are ignored.
OverlapCounts overlap_2d(const Box2D& a, const Box2D& b);
OverlapCounts overlap_3d(const Box3D& a, const Box3D& b);

double iou_2d(const Box2D& a, const Box2D& b);
double dice_2d(const Box2D& a, const Box2D& b);
double iou_3d(const Box3D& a, const Box3D& b);
double dice_3d(const Box3D& a, const Box3D& b);

// Envelope of slice boxes: x/y are the min/max over members, z spans
// [min z, max z + 1), score is the mean member score. Members must share a
// class id. Throws EmptyInput on an empty span.
Box3D hull_3d(std::span<const Box2D> boxes);

// Restriction of a cuboid to one of its slices.
Box2D slice_of(const Box3D& box, int z);

}  // namespace slicelift
