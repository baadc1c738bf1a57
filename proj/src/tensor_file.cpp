#include "dcton/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dcton/errors.hpp"

namespace dcton {

namespace {

constexpr char kMagic[4] = {'D', 'C', 'T', 'N'};

void append_le(std::string& out, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const char*>(data);
  if constexpr (std::endian::native == std::endian::little) {
    out.append(bytes, size);
  } else {
    for (std::size_t i = size; i > 0; --i) out.push_back(bytes[i - 1]);
  }
}

void read_le(const char* src, void* dst, std::size_t size) {
  auto* out = static_cast<char*>(dst);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out, src, size);
  } else {
    for (std::size_t i = 0; i < size; ++i) out[i] = src[size - 1 - i];
  }
}

torch::ScalarType scalar_type(DType d) {
  switch (d) {
    case DType::kFloat32: return torch::kFloat32;
    case DType::kFloat64: return torch::kFloat64;
    case DType::kInt32: return torch::kInt32;
    case DType::kUInt8: return torch::kUInt8;
    case DType::kInt64: return torch::kInt64;
  }
  throw FormatError("unknown dtype code " + std::to_string(static_cast<int>(d)));
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return 4;
    case DType::kFloat64: return 8;
    case DType::kInt32: return 4;
    case DType::kUInt8: return 1;
    case DType::kInt64: return 8;
  }
  throw FormatError("unknown dtype code " + std::to_string(static_cast<int>(dtype)));
}

DType dtype_of(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32: return DType::kFloat32;
    case torch::kFloat64: return DType::kFloat64;
    case torch::kInt32: return DType::kInt32;
    case torch::kUInt8: return DType::kUInt8;
    case torch::kInt64: return DType::kInt64;
    default: break;
  }
  throw InvalidArgument(std::string("tensor file: unsupported dtype ") +
                        std::string(c10::toString(t.scalar_type())));
}

std::string dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kFloat32: return "f32";
    case DType::kFloat64: return "f64";
    case DType::kInt32: return "i32";
    case DType::kUInt8: return "u8";
    case DType::kInt64: return "i64";
  }
  return "?";
}

std::string encode_tensor(const torch::Tensor& t) {
  const DType dtype = dtype_of(t);
  if (t.dim() > 255) throw InvalidArgument("tensor file: rank exceeds 255");
  auto c = t.detach().cpu().contiguous();
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(dtype));
  out.push_back(static_cast<char>(c.dim()));
  for (auto d : c.sizes()) {
    const auto dim = static_cast<std::uint32_t>(d);
    append_le(out, &dim, sizeof dim);
  }
  const std::size_t elem = dtype_size(dtype);
  const auto* base = static_cast<const char*>(c.data_ptr());
  if constexpr (std::endian::native == std::endian::little) {
    out.append(base, elem * c.numel());
  } else {
    for (int64_t i = 0; i < c.numel(); ++i) append_le(out, base + i * elem, elem);
  }
  return out;
}

torch::Tensor decode_tensor(const std::string& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("tensor file: bad magic");
  }
  const auto dtype = static_cast<DType>(static_cast<std::uint8_t>(bytes[4]));
  const auto type = scalar_type(dtype);
  const std::size_t rank = static_cast<std::uint8_t>(bytes[5]);
  std::size_t offset = 6;
  if (bytes.size() < offset + 4 * rank) throw FormatError("tensor file: truncated header");
  std::vector<int64_t> shape(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    std::uint32_t d = 0;
    read_le(bytes.data() + offset, &d, sizeof d);
    offset += 4;
    shape[i] = d;
    count *= d;
  }
  const std::size_t elem = dtype_size(dtype);
  if (bytes.size() != offset + count * elem) {
    throw FormatError("tensor file: payload holds " + std::to_string(bytes.size() - offset) +
                      " bytes, header declares " + std::to_string(count * elem));
  }
  auto t = torch::empty(shape, torch::TensorOptions().dtype(type));
  auto* dst = static_cast<char*>(t.data_ptr());
  for (std::size_t i = 0; i < count; ++i) {
    read_le(bytes.data() + offset + i * elem, dst + i * elem, elem);
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const torch::Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

torch::Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("tensor file not found: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return decode_tensor(buf.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace dcton
