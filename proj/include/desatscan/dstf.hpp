#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace desatscan {

/// Dense float tensor in the DSTF container:
///   "DSTF" | u32 version=1 | u8 rank | rank x u32 dims | f32 data (row-major)
/// All integers and floats little-endian.
struct DstfTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

inline constexpr std::uint32_t kDstfVersion = 1;

std::vector<std::uint8_t> encode_dstf(std::span<const std::uint32_t> dims,
                                      std::span<const float> data);
/// Decodes one tensor from the front of `bytes`; `consumed` receives its
/// encoded size so callers can walk concatenated tensors.
DstfTensor decode_dstf(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

void write_dstf(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                std::span<const float> data);
DstfTensor read_dstf(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace desatscan
