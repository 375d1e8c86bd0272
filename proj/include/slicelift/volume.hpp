#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slicelift/error.hpp"

namespace slicelift {

// NIfTI-1 datatype codes accepted by the reader and writer.
enum class Datatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kUint16 = 512,
};

enum class ByteOrder { kLittle, kBig };

std::string to_string(Datatype dtype);
std::size_t item_size(Datatype dtype);
// Throws UnsupportedDatatype for codes outside the Datatype enum.
Datatype datatype_from_code(int code);

struct Dims {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(nx) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny) * static_cast<std::size_t>(z));
  }
  bool operator==(const Dims&) const = default;
};

// Millimetres per voxel, kept in the header's float32 precision so that
// write/read round-trips are exact.
using Spacing = std::array<float, 3>;

// Row-major 2D grid with x fastest.
template <typename T>
struct Grid2D {
  int nx = 0;
  int ny = 0;
  std::vector<T> data;

  Grid2D() = default;
  Grid2D(int width, int height, T fill = T{})
      : nx(width), ny(height), data(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(x)]; }
  const T& at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(x)];
  }
  bool operator==(const Grid2D&) const = default;
};

using Slice = Grid2D<float>;
using Image8 = Grid2D<std::uint8_t>;

// Scalar CT volume. Voxels hold scaled intensities (raw * slope + inter) as
// float32, x fastest, slice axis = third dimension. Immutable once built.
class Volume {
 public:
  Volume(Dims dims, Spacing spacing, std::vector<float> voxels, Datatype source_dtype = Datatype::kFloat32,
         ByteOrder byte_order = ByteOrder::kLittle);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::span<const float> voxels() const { return voxels_; }
  float at(int x, int y, int z) const { return voxels_[dims_.index(x, y, z)]; }
  Datatype source_dtype() const { return source_dtype_; }
  ByteOrder byte_order() const { return byte_order_; }

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<float> voxels_;
  Datatype source_dtype_;
  ByteOrder byte_order_;
};

// Segmentation volume; 0 is background, other values are small labels.
class LabelVolume {
 public:
  LabelVolume(Dims dims, Spacing spacing, std::vector<std::int32_t> labels);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::span<const std::int32_t> labels() const { return labels_; }
  std::int32_t at(int x, int y, int z) const { return labels_[dims_.index(x, y, z)]; }

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<std::int32_t> labels_;
};

// Parsed NIfTI-1 header. Orientation fields are kept for `info` but never
// used for geometry; everything downstream works in voxel index space.
struct NiftiHeader {
  ByteOrder byte_order = ByteOrder::kLittle;
  bool gzipped = false;
  std::array<std::int16_t, 8> dim{};
  Datatype datatype = Datatype::kFloat32;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 352.0f;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  std::array<float, 3> quatern{};
  std::array<float, 3> qoffset{};
  std::array<std::array<float, 4>, 3> srow{};
  std::string descrip;

  Dims dims() const;
  Spacing spacing() const;
};

NiftiHeader read_nifti_header(const std::filesystem::path& path);
Volume read_nifti(const std::filesystem::path& path);
// Reads a segmentation; every scaled voxel must be a non-negative integer.
LabelVolume read_label_nifti(const std::filesystem::path& path);

// Converts a scalar volume holding integral values into labels.
LabelVolume to_labels(const Volume& volume);

enum class Compression { kAuto, kNone, kGzip };  // kAuto: gzip iff path ends in ".gz"

struct WriteOptions {
  Datatype dtype = Datatype::kFloat32;
  ByteOrder byte_order = ByteOrder::kLittle;
  Compression compression = Compression::kAuto;
  // Integer dtypes only: round non-integral values to nearest instead of
  // raising ValueOverflow. Out-of-range values always raise.
  bool round_to_integer = false;
};

// Writes a single-file NIfTI-1 ("n+1", vox_offset 352, scl_slope 1).
void write_nifti(const Volume& volume, const std::filesystem::path& path, const WriteOptions& options = {});
void write_nifti(const LabelVolume& labels, const std::filesystem::path& path, const WriteOptions& options = {});

// Serialization without touching the filesystem; used by the writer and tests.
std::vector<std::uint8_t> encode_nifti(const Volume& volume, const WriteOptions& options);
Volume decode_nifti(std::span<const std::uint8_t> bytes);

Slice extract_slice(const Volume& volume, int z);

}  // namespace slicelift
