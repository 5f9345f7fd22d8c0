#include "desatscan/dstf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "desatscan/common.hpp"

namespace desatscan {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_dstf(std::span<const std::uint32_t> dims,
                                      std::span<const float> data) {
  if (dims.size() > 255) throw ConfigError("DSTF: rank exceeds 255");
  std::size_t count = 1;
  for (auto d : dims) count *= d;
  if (count != data.size()) throw ConfigError("DSTF: dims do not match data length");

  std::vector<std::uint8_t> out{'D', 'S', 'T', 'F'};
  out.reserve(9 + 4 * dims.size() + 4 * data.size());
  put_u32(out, kDstfVersion);
  out.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  for (float f : data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

DstfTensor decode_dstf(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  if (bytes.size() < 9 || std::memcmp(bytes.data(), "DSTF", 4) != 0)
    throw ParseError("DSTF: bad magic or truncated header");
  if (get_u32(bytes.data() + 4) != kDstfVersion) throw ParseError("DSTF: unsupported version");
  const std::size_t rank = bytes[8];
  std::size_t pos = 9;
  if (bytes.size() < pos + 4 * rank) throw ParseError("DSTF: truncated dims");
  DstfTensor t;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i, pos += 4) {
    t.dims.push_back(get_u32(bytes.data() + pos));
    count *= t.dims.back();
  }
  if (bytes.size() < pos + 4 * count) throw ParseError("DSTF: truncated data");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i, pos += 4)
    t.data[i] = std::bit_cast<float>(get_u32(bytes.data() + pos));
  if (consumed) *consumed = pos;
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError(path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_dstf(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                std::span<const float> data) {
  write_file_bytes(path, encode_dstf(dims, data));
}

DstfTensor read_dstf(const std::filesystem::path& path) { return decode_dstf(read_file_bytes(path)); }

}  // namespace desatscan
