#include "slicelift/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace slicelift {

namespace {

void check_score_and_class(double score, int class_id) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw InvalidBox("score " + std::to_string(score) + " outside [0, 1]");
  }
  if (class_id < 0) {
    throw InvalidBox("negative class id");
  }
}

std::int64_t overlap_1d(int a_min, int a_max, int b_min, int b_max) {
  return std::max(0, std::min(a_max, b_max) - std::max(a_min, b_min));
}

}  // namespace

Box2D::Box2D(int z, int x_min, int x_max, int y_min, int y_max, double score, int class_id)
    : z_(z), x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max), score_(score), class_id_(class_id) {
  if (x_min >= x_max || y_min >= y_max) {
    throw InvalidBox("degenerate 2D box [" + std::to_string(x_min) + "," + std::to_string(x_max) + ")x[" +
                     std::to_string(y_min) + "," + std::to_string(y_max) + ")");
  }
  if (z < 0) {
    throw InvalidBox("negative slice index");
  }
  check_score_and_class(score, class_id);
}

Box3D::Box3D(int x_min, int x_max, int y_min, int y_max, int z_min, int z_max, double score, int class_id)
    : x_min_(x_min),
      x_max_(x_max),
      y_min_(y_min),
      y_max_(y_max),
      z_min_(z_min),
      z_max_(z_max),
      score_(score),
      class_id_(class_id) {
  if (x_min >= x_max || y_min >= y_max || z_min >= z_max) {
    throw InvalidBox("degenerate 3D box");
  }
  check_score_and_class(score, class_id);
}

OverlapCounts overlap_2d(const Box2D& a, const Box2D& b) {
  return {overlap_1d(a.x_min(), a.x_max(), b.x_min(), b.x_max()) *
              overlap_1d(a.y_min(), a.y_max(), b.y_min(), b.y_max()),
          a.area(), b.area()};
}

OverlapCounts overlap_3d(const Box3D& a, const Box3D& b) {
  return {overlap_1d(a.x_min(), a.x_max(), b.x_min(), b.x_max()) *
              overlap_1d(a.y_min(), a.y_max(), b.y_min(), b.y_max()) *
              overlap_1d(a.z_min(), a.z_max(), b.z_min(), b.z_max()),
          a.volume(), b.volume()};
}

double iou_2d(const Box2D& a, const Box2D& b) { return overlap_2d(a, b).iou(); }
double dice_2d(const Box2D& a, const Box2D& b) { return overlap_2d(a, b).dice(); }
double iou_3d(const Box3D& a, const Box3D& b) { return overlap_3d(a, b).iou(); }
double dice_3d(const Box3D& a, const Box3D& b) { return overlap_3d(a, b).dice(); }

Box3D hull_3d(std::span<const Box2D> boxes) {
  if (boxes.empty()) {
    throw EmptyInput("hull_3d needs at least one box");
  }
  const Box2D& first = boxes.front();
  int x_min = first.x_min();
  int x_max = first.x_max();
  int y_min = first.y_min();
  int y_max = first.y_max();
  int z_min = first.z();
  int z_max = first.z();
  double score_sum = 0.0;
  for (const Box2D& b : boxes) {
    if (b.class_id() != first.class_id()) {
      throw InvalidArgument("hull_3d members must share a class id");
    }
    x_min = std::min(x_min, b.x_min());
    x_max = std::max(x_max, b.x_max());
    y_min = std::min(y_min, b.y_min());
    y_max = std::max(y_max, b.y_max());
    z_min = std::min(z_min, b.z());
    z_max = std::max(z_max, b.z());
    score_sum += b.score();
  }
  const double mean = std::clamp(score_sum / static_cast<double>(boxes.size()), 0.0, 1.0);
  return {x_min, x_max, y_min, y_max, z_min, z_max + 1, mean, first.class_id()};
}

Box2D slice_of(const Box3D& box, int z) {
  if (z < box.z_min() || z >= box.z_max()) {
    throw IndexOutOfRange("slice " + std::to_string(z) + " outside the cuboid");
  }
  return {z, box.x_min(), box.x_max(), box.y_min(), box.y_max(), box.score(), box.class_id()};
}

}  // namespace slicelift
