#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace slicelift::detail {

inline bool has_gzip_magic(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

// Inflates one or more concatenated gzip members. Throws CorruptHeader on a
// malformed stream.
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes);

// Deflates into a single gzip member with a zeroed mtime, so output is a pure
// function of the input bytes.
std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);

}  // namespace slicelift::detail
