#include <random>
#include <string>

#include "doctest.h"
#include "slicelift/detections.hpp"
#include "support/testing.hpp"

using namespace slicelift;
using nlohmann::json;

namespace {

json document(json boxes, int nx = 512, int ny = 512, int nz = 100) {
  return {{"format_version", 1},
          {"scan_id", "case_00001"},
          {"image_dims", {nx, ny}},
          {"num_slices", nz},
          {"detector_name", "yolov3"},
          {"preprocessing_tag", "histeq-4096"},
          {"boxes", std::move(boxes)}};
}

json box(double z, json x, json y, double score = 0.9, int class_id = 0) {
  return {{"z", z}, {"x", std::move(x)}, {"y", std::move(y)}, {"score", score}, {"class_id", class_id}};
}

ParseOptions strict() {
  ParseOptions o;
  o.strict = true;
  return o;
}

DetectionSet random_set(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  DetectionSet set{"scan-" + std::to_string(seed), 512, 480, 90, "random", "none", {}};
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int x0 = static_cast<int>(rng() % 511);
    const int y0 = static_cast<int>(rng() % 479);
    const int x1 = x0 + 1 + static_cast<int>(rng() % static_cast<unsigned>(512 - x0));
    const int y1 = y0 + 1 + static_cast<int>(rng() % static_cast<unsigned>(480 - y0));
    set.boxes.emplace_back(static_cast<int>(rng() % 90), x0, x1, y0, y1, score(rng), static_cast<int>(rng() % 3));
  }
  return set;
}

}  // namespace

TEST_CASE("single box document") {
  const ParseResult r = parse_detections(document({box(5, {10, 50}, {20, 60})}).dump());
  REQUIRE(r.set.boxes.size() == 1);
  CHECK(r.set.boxes[0] == Box2D(5, 10, 50, 20, 60, 0.9, 0));
  CHECK(r.set.scan_id == "case_00001");
  CHECK(r.set.nx == 512);
  CHECK(r.set.num_slices == 100);
  CHECK(r.set.detector_name == "yolov3");
}

TEST_CASE("fractional coordinates round outward") {
  const ParseResult r = parse_detections(document({box(5, {10.2, 49.7}, {0.5, 1.0})}).dump());
  REQUIRE(r.set.boxes.size() == 1);
  CHECK(r.set.boxes[0].x_min() == 10);
  CHECK(r.set.boxes[0].x_max() == 50);
  CHECK(r.set.boxes[0].y_min() == 0);
  CHECK(r.set.boxes[0].y_max() == 1);
}

TEST_CASE("out-of-range slice: strict throws, lenient drops") {
  const std::string text = document({box(100, {10, 50}, {20, 60}), box(3, {1, 2}, {1, 2})}).dump();
  CHECK_THROWS_AS(parse_detections(text, strict()), SchemaViolation);
  CHECK_THROWS_AS(parse_detections(text, strict()), BoundsViolation);
  const ParseResult r = parse_detections(text);
  CHECK(r.set.boxes.size() == 1);
  CHECK(r.dropped_out_of_bounds == 1);
}

TEST_CASE("lenient mode clamps partially outside boxes") {
  const ParseResult r = parse_detections(document({box(0, {-5, 20}, {500, 530})}).dump());
  REQUIRE(r.set.boxes.size() == 1);
  CHECK(r.set.boxes[0] == Box2D(0, 0, 20, 500, 512, 0.9));
  CHECK_THROWS_AS(parse_detections(document({box(0, {-5, 20}, {500, 530})}).dump(), strict()), BoundsViolation);
  // Entirely outside after clamping: dropped.
  const ParseResult gone = parse_detections(document({box(0, {600, 700}, {0, 10})}).dump());
  CHECK(gone.set.boxes.empty());
  CHECK(gone.dropped_out_of_bounds == 1);
}

TEST_CASE("empty intervals") {
  const std::string text = document({box(0, {20, 20}, {0, 10})}).dump();
  CHECK_THROWS_AS(parse_detections(text, strict()), SchemaViolation);
  CHECK(parse_detections(text).set.boxes.empty());
}

TEST_CASE("score filter") {
  const std::string text = document({box(0, {0, 10}, {0, 10}, 0.2), box(0, {0, 10}, {0, 10}, 0.25)}).dump();
  const ParseResult r = parse_detections(text);
  REQUIRE(r.set.boxes.size() == 1);
  CHECK(r.set.boxes[0].score() == 0.25);
  CHECK(r.dropped_low_score == 1);
  ParseOptions keep_all;
  keep_all.min_score = 0.0;
  CHECK(parse_detections(text, keep_all).set.boxes.size() == 2);
}

TEST_CASE("schema violations") {
  CHECK_THROWS_AS(parse_detections("{not json"), SchemaViolation);
  CHECK_THROWS_AS(parse_detections("[]"), SchemaViolation);
  json doc = document(json::array());
  SUBCASE("version") {
    doc["format_version"] = 2;
    CHECK_THROWS_AS(parse_detections(doc.dump()), SchemaViolation);
  }
  SUBCASE("missing field") {
    doc.erase("detector_name");
    CHECK_THROWS_AS(parse_detections(doc.dump()), SchemaViolation);
  }
  SUBCASE("empty scan id") {
    doc["scan_id"] = "";
    CHECK_THROWS_AS(parse_detections(doc.dump()), EmptyScanId);
  }
  SUBCASE("bad dims") {
    doc["image_dims"] = {512};
    CHECK_THROWS_AS(parse_detections(doc.dump()), SchemaViolation);
  }
  SUBCASE("score outside [0, 1]") {
    doc["boxes"] = {box(0, {0, 1}, {0, 1}, 1.5)};
    CHECK_THROWS_AS(parse_detections(doc.dump()), SchemaViolation);
  }
  SUBCASE("negative class") {
    doc["boxes"] = {box(0, {0, 1}, {0, 1}, 0.5, -1)};
    CHECK_THROWS_AS(parse_detections(doc.dump()), SchemaViolation);
  }
  SUBCASE("fractional slice") {
    doc["boxes"] = {box(1.5, {0, 1}, {0, 1})};
    CHECK_THROWS_AS(parse_detections(doc.dump()), SchemaViolation);
  }
  SUBCASE("interval shape") {
    doc["boxes"] = {box(0, {0, 1, 2}, {0, 1})};
    CHECK_THROWS_AS(parse_detections(doc.dump()), SchemaViolation);
  }
}

TEST_CASE("write then parse is the identity") {
  testing::TempDir dir;
  ParseOptions all;
  all.min_score = 0.0;
  all.strict = true;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const DetectionSet set = random_set(seed, 200);
    write_detections(set, dir / "d.json");
    CHECK(read_detections(dir / "d.json", all).set == set);
  }
}

TEST_CASE("empty box list") {
  testing::TempDir dir;
  const DetectionSet set{"empty", 64, 64, 10, "none", "none", {}};
  write_detections(set, dir / "d.json");
  const json doc = json::parse(read_text_file(dir / "d.json"));
  CHECK(doc["boxes"] == json::array());
  CHECK(read_detections(dir / "d.json").set == set);
}

TEST_CASE("10,000 boxes keep their order") {
  ParseOptions all;
  all.min_score = 0.0;
  const DetectionSet set = random_set(99, 10000);
  const ParseResult back = parse_detections(detections_to_json(set).dump(), all);
  REQUIRE(back.set.boxes.size() == 10000);
  CHECK(back.set.boxes == set.boxes);
}

TEST_CASE("params block is written and ignored on parse") {
  const DetectionSet set{"p", 8, 8, 2, "d", "t", {Box2D(1, 0, 2, 0, 2, 0.5)}};
  const json doc = detections_to_json(set, {{"tau_link", 0.3}});
  CHECK(doc["params"]["tau_link"] == 0.3);
  CHECK(parse_detections(doc.dump()).set == set);
}

TEST_CASE("validate rejects out-of-bounds sets") {
  DetectionSet set{"v", 8, 8, 2, "d", "t", {Box2D(2, 0, 2, 0, 2)}};
  CHECK_THROWS_AS(set.validate(), BoundsViolation);
  set.boxes = {Box2D(0, 0, 9, 0, 2)};
  CHECK_THROWS_AS(set.validate(), BoundsViolation);
  set.boxes.clear();
  set.scan_id.clear();
  CHECK_THROWS_AS(set.validate(), EmptyScanId);
}
