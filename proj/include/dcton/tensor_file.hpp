#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <torch/torch.h>

namespace dcton {

// On-disk layout (all integers little-endian):
//   "DCTN" | dtype u8 | rank u8 | rank x u32 shape | row-major payload
enum class DType : std::uint8_t {
  kFloat32 = 1,
  kFloat64 = 2,
  kInt32 = 3,
  kUInt8 = 4,
  kInt64 = 5,
};

std::size_t dtype_size(DType dtype);
DType dtype_of(const torch::Tensor& t);
std::string dtype_name(DType dtype);

std::string encode_tensor(const torch::Tensor& t);
torch::Tensor decode_tensor(const std::string& bytes);

void write_tensor(const std::filesystem::path& path, const torch::Tensor& t);
torch::Tensor read_tensor(const std::filesystem::path& path);

}  // namespace dcton
