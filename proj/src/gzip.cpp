#include "gzip.hpp"

#include <zlib.h>

#include <cstring>
#include <string>

#include "slicelift/error.hpp"

namespace slicelift::detail {

namespace {

constexpr std::size_t kChunk = 1 << 16;

}  // namespace

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> out;
  z_stream stream{};
  // 16 + MAX_WBITS: gzip wrapper only.
  if (inflateInit2(&stream, 16 + MAX_WBITS) != Z_OK) {
    throw CorruptHeader("gzip: inflateInit2 failed");
  }
  stream.next_in = const_cast<Bytef*>(bytes.data());
  stream.avail_in = static_cast<uInt>(bytes.size());

  std::uint8_t buffer[kChunk];
  for (;;) {
    stream.next_out = buffer;
    stream.avail_out = kChunk;
    const int rc = inflate(&stream, Z_NO_FLUSH);
    out.insert(out.end(), buffer, buffer + (kChunk - stream.avail_out));
    if (rc == Z_STREAM_END) {
      // Concatenated members are legal gzip.
      if (stream.avail_in > 0 && stream.avail_in >= 2 && stream.next_in[0] == 0x1F && stream.next_in[1] == 0x8B) {
        inflateReset(&stream);
        continue;
      }
      break;
    }
    if (rc != Z_OK) {
      const std::string msg = stream.msg != nullptr ? stream.msg : "stream error";
      inflateEnd(&stream);
      if (rc == Z_BUF_ERROR) {
        throw TruncatedData("gzip: unexpected end of compressed stream");
      }
      throw CorruptHeader("gzip: " + msg);
    }
  }
  inflateEnd(&stream);
  return out;
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream stream{};
  if (deflateInit2(&stream, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw IoFailure("gzip: deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&stream, static_cast<uLong>(bytes.size())) + 32);
  stream.next_in = const_cast<Bytef*>(bytes.data());
  stream.avail_in = static_cast<uInt>(bytes.size());
  stream.next_out = out.data();
  stream.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&stream, Z_FINISH);
  if (rc != Z_STREAM_END) {
    deflateEnd(&stream);
    throw IoFailure("gzip: deflate did not finish");
  }
  out.resize(stream.total_out);
  deflateEnd(&stream);
  return out;
}

}  // namespace slicelift::detail
