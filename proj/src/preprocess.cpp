#include "slicelift/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace slicelift {

void EqualizationParams::validate() const {
  if (bins < 2) {
    throw InvalidArgument("equalization needs at least 2 bins");
  }
  if (window && !(window->lo < window->hi)) {
    throw InvalidArgument("equalization window must satisfy lo < hi");
  }
}

Image8 equalize_slice(const Slice& slice, const EqualizationParams& params) {
  params.validate();
  if (slice.data.empty()) {
    throw InvalidArgument("cannot equalize an empty slice");
  }
  for (float v : slice.data) {
    if (!std::isfinite(v)) {
      throw NonFiniteInput("slice contains NaN or Inf");
    }
  }

  std::vector<double> values(slice.data.begin(), slice.data.end());
  if (params.window) {
    const double lo = params.window->lo;
    const double hi = params.window->hi;
    for (double& v : values) {
      v = std::clamp(v, lo, hi);
    }
  }
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *min_it;
  const double range = *max_it - lo;

  Image8 out(slice.nx, slice.ny, 0);
  if (range <= 0.0) {
    return out;
  }

  const auto bins = static_cast<std::size_t>(params.bins);
  auto bin_of = [&](double v) {
    const auto b = static_cast<std::size_t>((v - lo) / range * static_cast<double>(bins));
    return std::min(b, bins - 1);
  };

  std::vector<std::int64_t> cumulative(bins, 0);
  for (double v : values) {
    ++cumulative[bin_of(v)];
  }
  for (std::size_t b = 1; b < bins; ++b) {
    cumulative[b] += cumulative[b - 1];
  }
  // Lowest occupied bin; the bin of the slice minimum is always occupied.
  const std::int64_t cdf_min = cumulative[0];

  const auto total = static_cast<std::int64_t>(values.size());
  const std::int64_t denom = total - cdf_min;
  if (denom == 0) {
    return out;  // every pixel in one bin
  }
  // Exact round-half-up of 255 * (c - cdf_min) / denom.
  std::vector<std::uint8_t> lut(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const std::int64_t num = std::max<std::int64_t>(cumulative[b] - cdf_min, 0);
    lut[b] = static_cast<std::uint8_t>((2 * 255 * num + denom) / (2 * denom));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.data[i] = lut[bin_of(values[i])];
  }
  return out;
}

std::vector<Image8> preprocess_volume(const Volume& volume, const EqualizationParams& params) {
  std::vector<Image8> out;
  out.reserve(static_cast<std::size_t>(volume.dims().nz));
  for (int z = 0; z < volume.dims().nz; ++z) {
    out.push_back(equalize_slice(extract_slice(volume, z), params));
  }
  return out;
}

void write_pgm(const Image8& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoFailure("cannot open for writing: " + path.string());
  }
  out << "P5\n" << image.nx << ' ' << image.ny << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
  if (!out) {
    throw IoFailure("write failed: " + path.string());
  }
}

Image8 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoFailure("cannot open " + path.string());
  }
  std::string magic;
  int nx = 0;
  int ny = 0;
  int maxval = 0;
  in >> magic >> nx >> ny >> maxval;
  if (magic != "P5" || nx <= 0 || ny <= 0 || maxval != 255) {
    throw IoFailure("not an 8-bit binary PGM: " + path.string());
  }
  in.get();  // single whitespace before raster
  Image8 image(nx, ny);
  in.read(reinterpret_cast<char*>(image.data.data()), static_cast<std::streamsize>(image.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.data.size())) {
    throw IoFailure("truncated PGM raster: " + path.string());
  }
  return image;
}

std::string slice_filename(std::string_view scan_id, int z) {
  return std::string(scan_id) + "_z" + std::to_string(z) + ".pgm";
}

}  // namespace slicelift
