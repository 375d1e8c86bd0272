#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "slicelift/detections.hpp"
#include "slicelift/groundtruth.hpp"
#include "slicelift/phantom.hpp"
#include "support/oracles.hpp"

using namespace slicelift;

namespace {

LabelVolume volume_of(Dims d, std::vector<std::int32_t> labels) { return LabelVolume(d, {1, 1, 1}, std::move(labels)); }

void fill_cube(std::vector<std::int32_t>& v, const Dims& d, int x0, int y0, int z0, int side, int label) {
  for (int z = z0; z < z0 + side; ++z) {
    for (int y = y0; y < y0 + side; ++y) {
      for (int x = x0; x < x0 + side; ++x) {
        v[d.index(x, y, z)] = label;
      }
    }
  }
}

GtOptions keep_small(Connectivity c = Connectivity::kFull) {
  GtOptions o;
  o.connectivity = c;
  o.min_voxels = 1;
  return o;
}

}  // namespace

TEST_CASE("binarize picks foreground labels") {
  const Dims d{3, 1, 1};
  const LabelVolume v = volume_of(d, {0, 1, 2});
  CHECK(binarize(v).voxels == std::vector<std::uint8_t>{0, 1, 1});
  const std::vector<int> tumor{2};
  CHECK(binarize(v, tumor).voxels == std::vector<std::uint8_t>{0, 0, 1});
  CHECK_THROWS_AS(binarize(v, std::vector<int>{}), EmptyInput);
}

TEST_CASE("a tumor inside a kidney is one object") {
  const Dims d{12, 12, 12};
  std::vector<std::int32_t> v(d.count(), 0);
  fill_cube(v, d, 1, 1, 1, 10, 1);
  fill_cube(v, d, 4, 4, 4, 3, 2);
  const auto gt = extract_gt(volume_of(d, v));
  REQUIRE(gt.size() == 1);
  CHECK(gt[0].box3d == Box3D(1, 11, 1, 11, 1, 11, 1.0));
  CHECK(gt[0].voxel_count == 1000);

  GtOptions tumor_only = keep_small();
  tumor_only.foreground = {2};
  const auto tumor = extract_gt(volume_of(d, v), tumor_only);
  REQUIRE(tumor.size() == 1);
  CHECK(tumor[0].box3d == Box3D(4, 7, 4, 7, 4, 7, 1.0));
}

TEST_CASE("two disjoint cubes") {
  const Dims d{20, 10, 10};
  std::vector<std::int32_t> v(d.count(), 0);
  fill_cube(v, d, 11, 2, 2, 5, 1);
  fill_cube(v, d, 1, 2, 2, 5, 1);
  const auto gt = extract_gt(volume_of(d, v), keep_small());
  REQUIRE(gt.size() == 2);
  // Scan order: the cube with smaller x is met first on the first shared row.
  CHECK(gt[0].box3d.x_min() == 1);
  CHECK(gt[1].box3d.x_min() == 11);
  CHECK(gt[0].object_id == 1);
  CHECK(gt[1].object_id == 2);
  CHECK(gt[0].slice_boxes.size() == 5);
}

TEST_CASE("corner-touching cubes depend on connectivity") {
  const Dims d{8, 8, 8};
  std::vector<std::int32_t> v(d.count(), 0);
  fill_cube(v, d, 0, 0, 0, 3, 1);
  fill_cube(v, d, 3, 3, 3, 3, 1);
  CHECK(extract_gt(volume_of(d, v), keep_small(Connectivity::kFull)).size() == 1);
  CHECK(extract_gt(volume_of(d, v), keep_small(Connectivity::kFace)).size() == 2);
}

TEST_CASE("labelling equals breadth-first flood fill on random masks") {
  std::mt19937_64 rng(41);
  const Dims d{16, 16, 16};
  for (int trial = 0; trial < 30; ++trial) {
    BinaryMask mask{d, std::vector<std::uint8_t>(d.count())};
    const double density = 0.15 + 0.02 * trial;
    std::bernoulli_distribution on(density);
    for (auto& voxel : mask.voxels) {
      voxel = on(rng) ? 1 : 0;
    }
    for (Connectivity c : {Connectivity::kFace, Connectivity::kFull}) {
      int want_count = 0;
      const std::vector<int> want = oracle::bfs_components(mask.voxels, d.nx, d.ny, d.nz, static_cast<int>(c), &want_count);
      const Components got = connected_components_3d(mask, c);
      REQUIRE(got.count == want_count);
      REQUIRE(std::equal(got.ids.begin(), got.ids.end(), want.begin()));
    }
  }
}

TEST_CASE("solid cube gives the cube") {
  const Dims d{14, 14, 14};
  std::vector<std::int32_t> v(d.count(), 0);
  fill_cube(v, d, 2, 3, 4, 10, 1);
  const auto gt = extract_gt(volume_of(d, v));
  REQUIRE(gt.size() == 1);
  CHECK(gt[0].box3d == Box3D(2, 12, 3, 13, 4, 14, 1.0));
  for (const auto& [z, b] : gt[0].slice_boxes) {
    CHECK(b == Box2D(z, 2, 12, 3, 13, 1.0));
  }
}

TEST_CASE("ellipsoid slice widths follow the analytic cross-section") {
  PhantomSpec spec;
  spec.dims = {64, 64, 40};
  spec.ellipsoids = {Ellipsoid{{32, 30, 20}, {12, 9, 8.5}, {0, 0}, 100.0f}};
  const auto gt = extract_gt(generate_phantom(spec).labels);
  REQUIRE(gt.size() == 1);
  CHECK(gt[0].slice_boxes.size() == 17);
  for (const auto& [z, b] : gt[0].slice_boxes) {
    const double t = (z - 20.0) / 8.5;
    const double width = 2.0 * 12.0 * std::sqrt(1.0 - t * t);
    const double height = 2.0 * 9.0 * std::sqrt(1.0 - t * t);
    CAPTURE(z);
    CHECK(std::abs(b.width() - width) <= 2.0);
    CHECK(std::abs(b.height() - height) <= 2.0);
  }
}

TEST_CASE("empty mask gives no objects") {
  const Dims d{5, 5, 5};
  CHECK(extract_gt(volume_of(d, std::vector<std::int32_t>(d.count(), 0))).empty());
  const Components c = connected_components_3d(BinaryMask{d, std::vector<std::uint8_t>(d.count(), 0)});
  CHECK(c.count == 0);
}

TEST_CASE("objects partition the foreground with tight, consistent boxes") {
  std::mt19937_64 rng(42);
  const Dims d{20, 18, 12};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::int32_t> v(d.count(), 0);
    std::uniform_int_distribution<int> label(0, 9);
    for (auto& l : v) {
      const int r = label(rng);
      l = r < 7 ? 0 : r - 6;
    }
    const LabelVolume labels = volume_of(d, v);
    const auto gt = extract_gt(labels, keep_small());
    const Components comp = connected_components_3d(binarize(labels));
    REQUIRE(static_cast<int>(gt.size()) == comp.count);

    std::int64_t total = 0;
    for (const GtObject& o : gt) {
      total += o.voxel_count;
      REQUIRE(hull_3d([&] {
                std::vector<Box2D> m;
                for (const auto& [z, b] : o.slice_boxes) m.push_back(b);
                return m;
              }()) == o.box3d);
      // Tight: every slice box edge row and column holds a voxel of this object.
      for (const auto& [z, b] : o.slice_boxes) {
        bool left = false, right = false, top = false, bottom = false;
        for (int y = b.y_min(); y < b.y_max(); ++y) {
          for (int x = b.x_min(); x < b.x_max(); ++x) {
            if (comp.ids[d.index(x, y, z)] != o.object_id) continue;
            left |= x == b.x_min();
            right |= x == b.x_max() - 1;
            top |= y == b.y_min();
            bottom |= y == b.y_max() - 1;
          }
        }
        REQUIRE((left && right && top && bottom));
      }
    }
    REQUIRE(total == std::count_if(v.begin(), v.end(), [](int l) { return l >= 1; }));
    // Every voxel of component k lies inside its 3D box.
    for (int z = 0; z < d.nz; ++z) {
      for (int y = 0; y < d.ny; ++y) {
        for (int x = 0; x < d.nx; ++x) {
          const int id = comp.ids[d.index(x, y, z)];
          if (id == 0) continue;
          const Box3D& b = gt[static_cast<std::size_t>(id - 1)].box3d;
          REQUIRE((x >= b.x_min() && x < b.x_max() && y >= b.y_min() && y < b.y_max() && z >= b.z_min() &&
                   z < b.z_max()));
        }
      }
    }
  }
}

TEST_CASE("min_voxels drops small components and renumbers") {
  const Dims d{20, 10, 10};
  std::vector<std::int32_t> v(d.count(), 0);
  v[d.index(0, 0, 0)] = 1;
  fill_cube(v, d, 10, 2, 2, 4, 1);
  GtOptions o;
  o.min_voxels = 65;
  CHECK(extract_gt(volume_of(d, v), o).empty());
  o.min_voxels = 64;
  auto gt = extract_gt(volume_of(d, v), o);
  REQUIRE(gt.size() == 1);
  CHECK(gt[0].object_id == 1);
  CHECK(gt[0].voxel_count == 64);
  o.min_voxels = 1;
  CHECK(extract_gt(volume_of(d, v), o).size() == 2);
}

TEST_CASE("ground truth JSON") {
  const Dims d{16, 16, 6};
  std::vector<std::int32_t> v(d.count(), 0);
  fill_cube(v, d, 2, 2, 1, 4, 1);
  fill_cube(v, d, 9, 9, 1, 3, 2);
  const auto gt = extract_gt(volume_of(d, v), keep_small());
  REQUIRE(gt.size() == 2);

  const auto doc2 = gt2d_to_json("c", d, gt, {{"min_voxels", 1}});
  CHECK(doc2["detector_name"] == "ground_truth");
  CHECK(doc2["boxes"].size() == 7);
  CHECK(doc2["boxes"][0]["z"] == 1);
  CHECK(doc2["boxes"][0]["object_id"] == 1);
  CHECK(doc2["boxes"][1]["object_id"] == 2);
  CHECK(doc2["params"]["min_voxels"] == 1);
  // The 2D document is a valid detections file.
  ParseOptions all;
  all.strict = true;
  all.min_score = 0.0;
  const DetectionSet set = parse_detections(doc2.dump(), all).set;
  CHECK(set.boxes.size() == 7);

  const auto doc3 = gt3d_to_json("c", gt);
  REQUIRE(doc3["boxes3d"].size() == 2);
  CHECK(doc3["boxes3d"][0]["x"] == nlohmann::json{2, 6});
  CHECK(doc3["boxes3d"][1]["voxel_count"] == 27);
  CHECK(!doc3.contains("params"));

  CHECK(to_json(GtOptions{})["foreground"] == "all>=1");
  CHECK(to_json(GtOptions{})["connectivity"] == 26);
}
