#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "slicelift/detections.hpp"
#include "slicelift/groundtruth.hpp"
#include "slicelift/volume.hpp"

namespace slicelift {

// Reproducible random source for fixtures ("slicelift-rng v1").
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++
// standard. The samplers are defined here rather than taken from <random>
// because the std distributions are implementation-defined:
//   uniform01    (next() >> 11) * 2^-53, in [0, 1)
//   normal       Box-Muller, cosine branch, two uniforms per sample:
//                sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
//   uniform_int  lo + floor(uniform01() * (hi - lo + 1)), inclusive range
//   poisson      Knuth multiplication method
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform01();
  double normal();
  int uniform_int(int lo, int hi);
  int poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

struct Ellipsoid {
  std::array<double, 3> center{};  // voxels
  std::array<double, 3> radii{};   // voxels
  std::array<double, 2> drift{};   // in-plane centre shift per slice away from center z
  float intensity = 200.0f;
};

struct PhantomSpec {
  Dims dims{64, 64, 40};
  Spacing spacing{1.0f, 1.0f, 1.0f};
  std::vector<Ellipsoid> ellipsoids;
  float background = -50.0f;
  double noise_sigma = 0.0;  // additive Gaussian on intensities
  std::uint64_t seed = 0;

  // Throws SpecOutOfBounds if an ellipsoid (including its drift) leaves the grid.
  void validate() const;
};

struct Phantom {
  Volume image;
  LabelVolume labels;
};

// Voxel (x, y, z) belongs to ellipsoid e iff
//   ((x - cx - dx (z - cz)) / rx)^2 + ((y - cy - dy (z - cz)) / ry)^2 + ((z - cz) / rz)^2 <= 1.
// Labels number ellipsoids 1..k; a later ellipsoid wins where two overlap.
Phantom generate_phantom(const PhantomSpec& spec);

// The two-kidney phantom used throughout the tests: 64 x 64 x 40, ellipsoids
// centred at (32, 16, 20) radii (9, 11, 9.5) and (30, 47, 19) radii
// (8, 10, 8.5). The half-voxel z radii give the end caps a real cross-section,
// so without drift every pair of adjacent slice boxes has IoU above 0.35.
// Fits drifts up to 3 px/slice along x.
PhantomSpec standard_phantom(std::array<double, 2> drift = {0.0, 0.0}, std::uint64_t seed = 0);

// Two thin ellipsoids (radii 5.5, 8, 4.5) stacked along y. Undrifted, adjacent
// slice boxes overlap with IoU >= 0.35; a 6 px/slice drift pushes every
// adjacent IoU below 0.3.
PhantomSpec misaligned_phantom(std::array<double, 2> drift, std::uint64_t seed = 0);

struct NoiseSpec {
  double jitter_sigma = 0.0;  // px, per box edge
  double p_drop = 0.0;        // per GT slice box
  double fp_rate = 0.0;       // expected false positives per slice
  std::pair<double, double> score_range{0.5, 1.0};
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

// Simulated detector output over the GT slice boxes. Per slice, in ascending
// z: for each object (in order) one drop draw, four edge jitters (x_min,
// x_max, y_min, y_max) and a score draw; then Poisson(fp_rate) random boxes
// of 4..max(4, n/4) px sides. All boxes carry class 0.
DetectionSet simulate_detections(std::span<const GtObject> gt, const NoiseSpec& noise, const Dims& dims,
                                 const std::string& scan_id);

}  // namespace slicelift
