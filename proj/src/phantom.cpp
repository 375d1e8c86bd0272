#include "slicelift/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace slicelift {

namespace {

// Returns the clamped, non-empty half-open interval closest to [lo, hi).
std::pair<int, int> fix_interval(int lo, int hi, int n) {
  lo = std::clamp(lo, 0, n);
  hi = std::clamp(hi, 0, n);
  if (hi <= lo) {
    hi = std::min(lo + 1, n);
    lo = hi - 1;
  }
  return {lo, hi};
}

int jitter(int value, double sigma, Rng& rng) {
  return value + static_cast<int>(std::round(sigma * rng.normal()));
}

}  // namespace

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::uniform_int(int lo, int hi) {
  const double span = static_cast<double>(hi) - static_cast<double>(lo) + 1.0;
  const int v = lo + static_cast<int>(std::floor(uniform01() * span));
  return std::min(v, hi);
}

int Rng::poisson(double mean) {
  const double limit = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform01();
  } while (p > limit);
  return k - 1;
}

void PhantomSpec::validate() const {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) {
    throw SpecOutOfBounds("phantom dims must be >= 1");
  }
  if (!(noise_sigma >= 0.0)) {
    throw SpecOutOfBounds("noise_sigma must be >= 0");
  }
  for (std::size_t i = 0; i < ellipsoids.size(); ++i) {
    const Ellipsoid& e = ellipsoids[i];
    const std::string name = "ellipsoid " + std::to_string(i + 1);
    if (!(e.radii[0] > 0.0 && e.radii[1] > 0.0 && e.radii[2] > 0.0)) {
      throw SpecOutOfBounds(name + ": radii must be positive");
    }
    // Extent of the sheared ellipsoid along x and y.
    const double ext_x = std::hypot(e.radii[0], e.drift[0] * e.radii[2]);
    const double ext_y = std::hypot(e.radii[1], e.drift[1] * e.radii[2]);
    const bool fits = e.center[0] - ext_x >= 0.0 && e.center[0] + ext_x <= dims.nx - 1 &&
                      e.center[1] - ext_y >= 0.0 && e.center[1] + ext_y <= dims.ny - 1 &&
                      e.center[2] - e.radii[2] >= 0.0 && e.center[2] + e.radii[2] <= dims.nz - 1;
    if (!fits) {
      throw SpecOutOfBounds(name + " does not fit inside the " + std::to_string(dims.nx) + "x" +
                            std::to_string(dims.ny) + "x" + std::to_string(dims.nz) + " grid");
    }
  }
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Dims& d = spec.dims;
  std::vector<std::int32_t> labels(d.count(), 0);
  for (int z = 0; z < d.nz; ++z) {
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        for (std::size_t k = 0; k < spec.ellipsoids.size(); ++k) {
          const Ellipsoid& e = spec.ellipsoids[k];
          const double dz = z - e.center[2];
          const double ux = (x - e.center[0] - e.drift[0] * dz) / e.radii[0];
          const double uy = (y - e.center[1] - e.drift[1] * dz) / e.radii[1];
          const double uz = dz / e.radii[2];
          if (ux * ux + uy * uy + uz * uz <= 1.0) {
            labels[d.index(x, y, z)] = static_cast<std::int32_t>(k + 1);
          }
        }
      }
    }
  }

  std::vector<float> voxels(d.count());
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const float base = labels[i] == 0 ? spec.background : spec.ellipsoids[static_cast<std::size_t>(labels[i] - 1)].intensity;
    const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
    voxels[i] = static_cast<float>(base + noise);
  }
  return Phantom{Volume(d, spec.spacing, std::move(voxels)), LabelVolume(d, spec.spacing, std::move(labels))};
}

PhantomSpec standard_phantom(std::array<double, 2> drift, std::uint64_t seed) {
  PhantomSpec spec;
  spec.dims = {64, 64, 40};
  spec.spacing = {0.8f, 0.8f, 2.5f};
  spec.background = -50.0f;
  spec.noise_sigma = 20.0;
  spec.seed = seed;
  spec.ellipsoids = {
      Ellipsoid{{32.0, 16.0, 20.0}, {9.0, 11.0, 9.5}, drift, 180.0f},
      Ellipsoid{{30.0, 47.0, 19.0}, {8.0, 10.0, 8.5}, drift, 160.0f},
  };
  return spec;
}

PhantomSpec misaligned_phantom(std::array<double, 2> drift, std::uint64_t seed) {
  PhantomSpec spec;
  spec.dims = {64, 64, 40};
  spec.spacing = {0.8f, 0.8f, 2.5f};
  spec.background = -50.0f;
  spec.noise_sigma = 20.0;
  spec.seed = seed;
  spec.ellipsoids = {
      Ellipsoid{{32.0, 16.0, 20.0}, {5.5, 8.0, 4.5}, drift, 180.0f},
      Ellipsoid{{32.0, 48.0, 20.0}, {5.5, 8.0, 4.5}, drift, 160.0f},
  };
  return spec;
}

void NoiseSpec::validate() const {
  if (!(jitter_sigma >= 0.0)) {
    throw InvalidArgument("jitter_sigma must be >= 0");
  }
  if (!(p_drop >= 0.0 && p_drop < 1.0)) {
    throw InvalidArgument("p_drop must lie in [0, 1)");
  }
  if (!(fp_rate >= 0.0)) {
    throw InvalidArgument("fp_rate must be >= 0");
  }
  const auto [lo, hi] = score_range;
  if (!(lo >= 0.0 && lo <= hi && hi <= 1.0)) {
    throw InvalidArgument("score_range must satisfy 0 <= lo <= hi <= 1");
  }
}

nlohmann::json NoiseSpec::to_json() const {
  return {{"jitter_sigma", jitter_sigma},
          {"p_drop", p_drop},
          {"fp_rate", fp_rate},
          {"score_range", {score_range.first, score_range.second}},
          {"seed", seed}};
}

DetectionSet simulate_detections(std::span<const GtObject> gt, const NoiseSpec& noise, const Dims& dims,
                                 const std::string& scan_id) {
  noise.validate();
  DetectionSet set;
  set.scan_id = scan_id;
  set.nx = dims.nx;
  set.ny = dims.ny;
  set.num_slices = dims.nz;
  set.detector_name = "simulated";
  set.preprocessing_tag = "none";

  Rng rng(noise.seed);
  const auto [score_lo, score_hi] = noise.score_range;
  auto draw_score = [&] { return score_lo + (score_hi - score_lo) * rng.uniform01(); };
  const int max_w = std::max(1, dims.nx / 4);
  const int max_h = std::max(1, dims.ny / 4);
  const int min_w = std::min(4, max_w);
  const int min_h = std::min(4, max_h);

  for (int z = 0; z < dims.nz; ++z) {
    for (const GtObject& object : gt) {
      const auto it = object.slice_boxes.find(z);
      if (it == object.slice_boxes.end()) {
        continue;
      }
      const Box2D& b = it->second;
      if (rng.uniform01() < noise.p_drop) {
        continue;
      }
      const int x0 = jitter(b.x_min(), noise.jitter_sigma, rng);
      const int x1 = jitter(b.x_max(), noise.jitter_sigma, rng);
      const int y0 = jitter(b.y_min(), noise.jitter_sigma, rng);
      const int y1 = jitter(b.y_max(), noise.jitter_sigma, rng);
      const auto [xa, xb] = fix_interval(x0, x1, dims.nx);
      const auto [ya, yb] = fix_interval(y0, y1, dims.ny);
      set.boxes.emplace_back(z, xa, xb, ya, yb, draw_score(), 0);
    }
    const int false_positives = rng.poisson(noise.fp_rate);
    for (int i = 0; i < false_positives; ++i) {
      const int w = rng.uniform_int(min_w, max_w);
      const int h = rng.uniform_int(min_h, max_h);
      const int x0 = rng.uniform_int(0, dims.nx - w);
      const int y0 = rng.uniform_int(0, dims.ny - h);
      set.boxes.emplace_back(z, x0, x0 + w, y0, y0 + h, draw_score(), 0);
    }
  }
  return set;
}

}  // namespace slicelift
