#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slicelift/volume.hpp"

namespace slicelift {

struct IntensityWindow {
  float lo = 0.0f;
  float hi = 0.0f;
};

struct EqualizationParams {
  static constexpr int kOutputLevels = 256;

  int bins = 4096;
  std::optional<IntensityWindow> window;  // clamp in input units before binning

  // Throws InvalidArgument if bins < 2 or the window is empty.
  void validate() const;
};

// Global histogram equalization of one slice to 8 bits.
//
// Values are binned into `bins` equal-width bins spanning [min, max] of the
// (optionally window-clamped) slice. Each pixel maps to
//   round(255 * (cdf(v) - cdf_min) / (1 - cdf_min))
// where cdf_min is the cumulative fraction of the lowest occupied bin. The
// arithmetic is done on integer counts, so results are exact and portable.
// A slice whose pixels all fall in one bin maps to zeros.
Image8 equalize_slice(const Slice& slice, const EqualizationParams& params = {});

// Equalizes every slice independently; output[z] corresponds to plane z.
std::vector<Image8> preprocess_volume(const Volume& volume, const EqualizationParams& params = {});

// Binary 8-bit PGM (P5), maxval 255.
void write_pgm(const Image8& image, const std::filesystem::path& path);
Image8 read_pgm(const std::filesystem::path& path);

// "<scan_id>_z<index>.pgm", the naming the detector adapter consumes.
std::string slice_filename(std::string_view scan_id, int z);

}  // namespace slicelift
