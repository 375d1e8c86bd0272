#include "slicelift/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "gzip.hpp"

namespace slicelift {

namespace {

constexpr std::int32_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;
constexpr char kMagic[4] = {'n', '+', '1', '\0'};

// Header field offsets (NIfTI-1).
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

bool host_is_little() { return std::endian::native == std::endian::little; }

template <typename T>
T load(const std::uint8_t* p, ByteOrder order) {
  std::uint8_t tmp[sizeof(T)];
  std::memcpy(tmp, p, sizeof(T));
  const bool swap = (order == ByteOrder::kLittle) != host_is_little();
  if (swap) {
    std::reverse(tmp, tmp + sizeof(T));
  }
  T value;
  std::memcpy(&value, tmp, sizeof(T));
  return value;
}

template <typename T>
void store(std::uint8_t* p, T value, ByteOrder order) {
  std::uint8_t tmp[sizeof(T)];
  std::memcpy(tmp, &value, sizeof(T));
  const bool swap = (order == ByteOrder::kLittle) != host_is_little();
  if (swap) {
    std::reverse(tmp, tmp + sizeof(T));
  }
  std::memcpy(p, tmp, sizeof(T));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoFailure("cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoFailure("read failed: " + path.string());
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoFailure("cannot open for writing: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoFailure("write failed: " + path.string());
  }
}

bool wants_gzip(const std::filesystem::path& path, Compression compression) {
  switch (compression) {
    case Compression::kGzip:
      return true;
    case Compression::kNone:
      return false;
    case Compression::kAuto:
      break;
  }
  const std::string name = path.filename().string();
  return name.size() >= 3 && name.compare(name.size() - 3, 3, ".gz") == 0;
}

NiftiHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < static_cast<std::size_t>(kHeaderSize)) {
    throw CorruptHeader("file shorter than the 348-byte NIfTI-1 header");
  }
  const std::uint8_t* p = bytes.data();
  NiftiHeader h;
  const bool little = load<std::int32_t>(p, ByteOrder::kLittle) == kHeaderSize;
  const bool big = load<std::int32_t>(p, ByteOrder::kBig) == kHeaderSize;
  if (little == big) {
    throw CorruptHeader("sizeof_hdr is not 348 under exactly one byte order");
  }
  h.byte_order = little ? ByteOrder::kLittle : ByteOrder::kBig;
  const ByteOrder other = little ? ByteOrder::kBig : ByteOrder::kLittle;

  if (std::memcmp(p + kOffMagic, kMagic, 4) != 0) {
    throw CorruptHeader("magic is not \"n+1\" (only single-file NIfTI-1 is supported)");
  }

  const auto dim0 = load<std::int16_t>(p + kOffDim, h.byte_order);
  if (dim0 < 1 || dim0 > 7) {
    const auto swapped = load<std::int16_t>(p + kOffDim, other);
    if (swapped < 1 || swapped > 7) {
      throw BadDimension("dim[0] = " + std::to_string(dim0) + " is outside [1, 7]");
    }
    throw CorruptHeader("dim[0] byte order disagrees with sizeof_hdr");
  }
  for (std::size_t i = 0; i < 8; ++i) {
    h.dim[i] = load<std::int16_t>(p + kOffDim + 2 * i, h.byte_order);
  }
  for (int i = 1; i <= dim0; ++i) {
    if (h.dim[i] < 1) {
      throw BadDimension("dim[" + std::to_string(i) + "] = " + std::to_string(h.dim[i]));
    }
  }
  for (int i = 4; i <= dim0; ++i) {
    if (h.dim[i] != 1) {
      throw BadDimension("volumes with more than three non-singleton dimensions are not supported");
    }
  }

  h.datatype = datatype_from_code(load<std::int16_t>(p + kOffDatatype, h.byte_order));
  h.bitpix = load<std::int16_t>(p + kOffBitpix, h.byte_order);
  for (std::size_t i = 0; i < 8; ++i) {
    h.pixdim[i] = load<float>(p + kOffPixdim + 4 * i, h.byte_order);
  }
  h.vox_offset = load<float>(p + kOffVoxOffset, h.byte_order);
  h.scl_slope = load<float>(p + kOffSclSlope, h.byte_order);
  h.scl_inter = load<float>(p + kOffSclInter, h.byte_order);
  h.qform_code = load<std::int16_t>(p + kOffQformCode, h.byte_order);
  h.sform_code = load<std::int16_t>(p + kOffSformCode, h.byte_order);
  for (std::size_t i = 0; i < 3; ++i) {
    h.quatern[i] = load<float>(p + kOffQuatern + 4 * i, h.byte_order);
    h.qoffset[i] = load<float>(p + kOffQoffset + 4 * i, h.byte_order);
    for (std::size_t j = 0; j < 4; ++j) {
      h.srow[i][j] = load<float>(p + kOffSrow + 16 * i + 4 * j, h.byte_order);
    }
  }
  const char* descrip = reinterpret_cast<const char*>(p + kOffDescrip);
  h.descrip.assign(descrip, strnlen(descrip, 80));

  if (!std::isfinite(h.vox_offset) || h.vox_offset < static_cast<float>(kHeaderSize)) {
    throw CorruptHeader("vox_offset must be >= 348 for single-file NIfTI-1");
  }
  if (!std::isfinite(h.scl_slope) || !std::isfinite(h.scl_inter)) {
    throw CorruptHeader("non-finite scl_slope/scl_inter");
  }
  (void)h.spacing();  // validates pixdim
  return h;
}

template <typename T>
void decode_voxels(const std::uint8_t* p, std::size_t count, ByteOrder order, double slope, double inter,
                   bool scaled, std::vector<float>& out) {
  out.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const T raw = load<T>(p + i * sizeof(T), order);
    const double value = scaled ? static_cast<double>(raw) * slope + inter : static_cast<double>(raw);
    out[i] = static_cast<float>(value);
    if (!std::isfinite(out[i])) {
      throw NonFiniteInput("voxel " + std::to_string(i) + " is not finite after intensity scaling");
    }
  }
}

template <typename T>
void encode_voxels(std::span<const float> voxels, ByteOrder order, bool round_to_integer, std::uint8_t* out) {
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    double v = voxels[i];
    if constexpr (std::is_integral_v<T>) {
      if (v != std::floor(v)) {
        if (!round_to_integer) {
          throw ValueOverflow("value " + std::to_string(v) + " at voxel " + std::to_string(i) +
                              " is not integral; enable rounding to store it in an integer datatype");
        }
        v = std::round(v);
      }
      if (v < static_cast<double>(std::numeric_limits<T>::min()) ||
          v > static_cast<double>(std::numeric_limits<T>::max())) {
        throw ValueOverflow("value " + std::to_string(v) + " at voxel " + std::to_string(i) +
                            " does not fit the target datatype");
      }
    }
    store<T>(out + i * sizeof(T), static_cast<T>(v), order);
  }
}

}  // namespace

std::string to_string(Datatype dtype) {
  switch (dtype) {
    case Datatype::kUint8:
      return "uint8";
    case Datatype::kInt16:
      return "int16";
    case Datatype::kInt32:
      return "int32";
    case Datatype::kFloat32:
      return "float32";
    case Datatype::kFloat64:
      return "float64";
    case Datatype::kUint16:
      return "uint16";
  }
  return "unknown";
}

std::size_t item_size(Datatype dtype) {
  switch (dtype) {
    case Datatype::kUint8:
      return 1;
    case Datatype::kInt16:
    case Datatype::kUint16:
      return 2;
    case Datatype::kInt32:
    case Datatype::kFloat32:
      return 4;
    case Datatype::kFloat64:
      return 8;
  }
  return 0;
}

Datatype datatype_from_code(int code) {
  switch (code) {
    case 2:
    case 4:
    case 8:
    case 16:
    case 64:
    case 512:
      return static_cast<Datatype>(code);
    default:
      throw UnsupportedDatatype("NIfTI datatype code " + std::to_string(code) + " is not supported");
  }
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<float> voxels, Datatype source_dtype, ByteOrder byte_order)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)), source_dtype_(source_dtype), byte_order_(byte_order) {
  if (dims_.nx < 1 || dims_.ny < 1 || dims_.nz < 1) {
    throw BadDimension("volume dimensions must be >= 1");
  }
  if (voxels_.size() != dims_.count()) {
    throw InvalidArgument("voxel count " + std::to_string(voxels_.size()) + " does not match dims");
  }
  for (float s : spacing_) {
    if (!(s > 0.0f) || !std::isfinite(s)) {
      throw InvalidArgument("spacing components must be positive and finite");
    }
  }
  for (std::size_t i = 0; i < voxels_.size(); ++i) {
    if (!std::isfinite(voxels_[i])) {
      throw NonFiniteInput("voxel " + std::to_string(i) + " is not finite");
    }
  }
}

LabelVolume::LabelVolume(Dims dims, Spacing spacing, std::vector<std::int32_t> labels)
    : dims_(dims), spacing_(spacing), labels_(std::move(labels)) {
  if (dims_.nx < 1 || dims_.ny < 1 || dims_.nz < 1) {
    throw BadDimension("volume dimensions must be >= 1");
  }
  if (labels_.size() != dims_.count()) {
    throw InvalidArgument("label count does not match dims");
  }
  for (float s : spacing_) {
    if (!(s > 0.0f) || !std::isfinite(s)) {
      throw InvalidArgument("spacing components must be positive and finite");
    }
  }
  if (std::any_of(labels_.begin(), labels_.end(), [](std::int32_t l) { return l < 0; })) {
    throw InvalidArgument("labels must be non-negative");
  }
}

Dims NiftiHeader::dims() const {
  const int n = dim[0];
  return Dims{dim[1], n >= 2 ? dim[2] : 1, n >= 3 ? dim[3] : 1};
}

Spacing NiftiHeader::spacing() const {
  Spacing s{1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 3; ++i) {
    if (i + 1 > dim[0]) {
      continue;  // absent axis
    }
    const float v = std::fabs(pixdim[static_cast<std::size_t>(i) + 1]);
    if (!(v > 0.0f) || !std::isfinite(v)) {
      throw CorruptHeader("pixdim[" + std::to_string(i + 1) + "] must be non-zero and finite");
    }
    s[static_cast<std::size_t>(i)] = v;
  }
  return s;
}

Volume decode_nifti(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> inflated;
  const bool gzipped = detail::has_gzip_magic(bytes);
  if (gzipped) {
    inflated = detail::gzip_decompress(bytes);
    bytes = inflated;
  }
  NiftiHeader h = parse_header(bytes);
  h.gzipped = gzipped;

  const Dims dims = h.dims();
  const std::size_t count = dims.count();
  const std::size_t itemsize = item_size(h.datatype);
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  if (bytes.size() < offset || bytes.size() - offset < count * itemsize) {
    throw TruncatedData("expected " + std::to_string(count * itemsize) + " voxel bytes at offset " +
                        std::to_string(offset) + ", file has " + std::to_string(bytes.size()));
  }

  // A zero slope disables scaling altogether, intercept included.
  const bool unscaled = h.scl_slope == 0.0f;
  const double slope = unscaled ? 1.0 : static_cast<double>(h.scl_slope);
  const double inter = unscaled ? 0.0 : static_cast<double>(h.scl_inter);
  const bool scaled = !(slope == 1.0 && inter == 0.0);
  const std::uint8_t* p = bytes.data() + offset;
  std::vector<float> voxels;
  switch (h.datatype) {
    case Datatype::kUint8:
      decode_voxels<std::uint8_t>(p, count, h.byte_order, slope, inter, scaled, voxels);
      break;
    case Datatype::kInt16:
      decode_voxels<std::int16_t>(p, count, h.byte_order, slope, inter, scaled, voxels);
      break;
    case Datatype::kInt32:
      decode_voxels<std::int32_t>(p, count, h.byte_order, slope, inter, scaled, voxels);
      break;
    case Datatype::kFloat32:
      decode_voxels<float>(p, count, h.byte_order, slope, inter, scaled, voxels);
      break;
    case Datatype::kFloat64:
      decode_voxels<double>(p, count, h.byte_order, slope, inter, scaled, voxels);
      break;
    case Datatype::kUint16:
      decode_voxels<std::uint16_t>(p, count, h.byte_order, slope, inter, scaled, voxels);
      break;
  }
  return Volume(dims, h.spacing(), std::move(voxels), h.datatype, h.byte_order);
}

NiftiHeader read_nifti_header(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = read_file(path);
  const bool gzipped = detail::has_gzip_magic(bytes);
  if (gzipped) {
    bytes = detail::gzip_decompress(bytes);
  }
  NiftiHeader h = parse_header(bytes);
  h.gzipped = gzipped;
  return h;
}

Volume read_nifti(const std::filesystem::path& path) { return decode_nifti(read_file(path)); }

LabelVolume to_labels(const Volume& volume) {
  std::vector<std::int32_t> labels(volume.voxels().size());
  const auto voxels = volume.voxels();
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const float v = voxels[i];
    if (v < 0.0f || v != std::floor(v) || v > static_cast<float>(std::numeric_limits<std::int32_t>::max() / 2)) {
      throw ValueOverflow("label voxel " + std::to_string(i) + " = " + std::to_string(v) +
                          " is not a non-negative integer");
    }
    labels[i] = static_cast<std::int32_t>(v);
  }
  return LabelVolume(volume.dims(), volume.spacing(), std::move(labels));
}

LabelVolume read_label_nifti(const std::filesystem::path& path) { return to_labels(read_nifti(path)); }

std::vector<std::uint8_t> encode_nifti(const Volume& volume, const WriteOptions& options) {
  const Dims& d = volume.dims();
  for (int n : {d.nx, d.ny, d.nz}) {
    if (n > std::numeric_limits<std::int16_t>::max()) {
      throw BadDimension("dimension exceeds the NIfTI-1 int16 limit");
    }
  }
  const std::size_t itemsize = item_size(options.dtype);
  std::vector<std::uint8_t> out(kVoxOffset + volume.voxels().size() * itemsize, 0);
  std::uint8_t* p = out.data();
  const ByteOrder o = options.byte_order;

  store<std::int32_t>(p, kHeaderSize, o);
  p[38] = 'r';  // regular
  const std::int16_t dim[8] = {3, static_cast<std::int16_t>(d.nx), static_cast<std::int16_t>(d.ny),
                               static_cast<std::int16_t>(d.nz), 1, 1, 1, 1};
  for (std::size_t i = 0; i < 8; ++i) {
    store<std::int16_t>(p + kOffDim + 2 * i, dim[i], o);
  }
  store<std::int16_t>(p + kOffDatatype, static_cast<std::int16_t>(options.dtype), o);
  store<std::int16_t>(p + kOffBitpix, static_cast<std::int16_t>(8 * itemsize), o);
  const Spacing& s = volume.spacing();
  const float pixdim[8] = {1.0f, s[0], s[1], s[2], 1.0f, 1.0f, 1.0f, 1.0f};
  for (std::size_t i = 0; i < 8; ++i) {
    store<float>(p + kOffPixdim + 4 * i, pixdim[i], o);
  }
  store<float>(p + kOffVoxOffset, static_cast<float>(kVoxOffset), o);
  store<float>(p + kOffSclSlope, 1.0f, o);
  store<float>(p + kOffSclInter, 0.0f, o);
  p[kOffXyztUnits] = 2;  // NIFTI_UNITS_MM
  const char descrip[] = "slicelift";
  std::memcpy(p + kOffDescrip, descrip, sizeof(descrip) - 1);
  // Scanner-space qform: axis-aligned scaling, no rotation.
  store<std::int16_t>(p + kOffQformCode, 1, o);
  store<std::int16_t>(p + kOffSformCode, 0, o);
  std::memcpy(p + kOffMagic, kMagic, 4);

  std::uint8_t* data = p + kVoxOffset;
  const auto voxels = volume.voxels();
  switch (options.dtype) {
    case Datatype::kUint8:
      encode_voxels<std::uint8_t>(voxels, o, options.round_to_integer, data);
      break;
    case Datatype::kInt16:
      encode_voxels<std::int16_t>(voxels, o, options.round_to_integer, data);
      break;
    case Datatype::kInt32:
      encode_voxels<std::int32_t>(voxels, o, options.round_to_integer, data);
      break;
    case Datatype::kFloat32:
      encode_voxels<float>(voxels, o, options.round_to_integer, data);
      break;
    case Datatype::kFloat64:
      encode_voxels<double>(voxels, o, options.round_to_integer, data);
      break;
    case Datatype::kUint16:
      encode_voxels<std::uint16_t>(voxels, o, options.round_to_integer, data);
      break;
  }
  return out;
}

void write_nifti(const Volume& volume, const std::filesystem::path& path, const WriteOptions& options) {
  std::vector<std::uint8_t> bytes = encode_nifti(volume, options);
  if (wants_gzip(path, options.compression)) {
    bytes = detail::gzip_compress(bytes);
  }
  write_file(path, bytes);
}

void write_nifti(const LabelVolume& labels, const std::filesystem::path& path, const WriteOptions& options) {
  std::vector<float> values(labels.labels().size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::int32_t l = labels.labels()[i];
    if (l > (1 << 24)) {
      throw ValueOverflow("label " + std::to_string(l) + " is too large to store exactly");
    }
    values[i] = static_cast<float>(l);
  }
  write_nifti(Volume(labels.dims(), labels.spacing(), std::move(values)), path, options);
}

Slice extract_slice(const Volume& volume, int z) {
  const Dims& d = volume.dims();
  if (z < 0 || z >= d.nz) {
    throw IndexOutOfRange("slice " + std::to_string(z) + " outside [0, " + std::to_string(d.nz) + ")");
  }
  Slice out;
  out.nx = d.nx;
  out.ny = d.ny;
  const auto begin = volume.voxels().begin() + static_cast<std::ptrdiff_t>(d.index(0, 0, z));
  out.data.assign(begin, begin + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(d.nx) * d.ny));
  return out;
}

}  // namespace slicelift
