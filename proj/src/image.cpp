#include "dcton/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "dcton/errors.hpp"

namespace dcton {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    if (mode[0] == 'r') throw NotFound("image not found: " + path.string());
    throw IoError("cannot open for writing: " + path.string());
  }
  return f;
}

void png_warn(png_structp, png_const_charp) {}

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
    if (!png) throw IoError("png_create_write_struct failed");
    info = png_create_info_struct(png);
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
    if (!png) throw IoError("png_create_read_struct failed");
    info = png_create_info_struct(png);
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

void write_rows(const std::filesystem::path& path, int width, int height, int color_type,
                const std::vector<png_color>& palette, std::vector<std::uint8_t>& pixels,
                int channels) {
  auto file = open_file(path, "wb");
  PngWriter w;
  // libpng reports errors by longjmp; everything with a destructor is already alive here.
  if (setjmp(png_jmpbuf(w.png))) throw IoError("png encode failed: " + path.string());
  {
    png_init_io(w.png, file.get());
    png_set_IHDR(w.png, w.info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(w.png, 6);
    if (!palette.empty()) {
      png_set_PLTE(w.png, w.info, palette.data(), static_cast<int>(palette.size()));
    }
    png_write_info(w.png, w.info);
    for (int y = 0; y < height; ++y) {
      png_write_row(w.png, pixels.data() + static_cast<std::size_t>(y) * width * channels);
    }
    png_write_end(w.png, nullptr);
  }
}

// Returns [H,W,C] uint8. When keep_indices is set, palette images are not expanded.
torch::Tensor read_rows(const std::filesystem::path& path, bool keep_indices) {
  auto file = open_file(path, "rb");
  PngReader r;
  if (setjmp(png_jmpbuf(r.png))) throw FormatError("corrupt PNG: " + path.string());
  png_init_io(r.png, file.get());
    png_read_info(r.png, r.info);
    const int color = png_get_color_type(r.png, r.info);
    const int depth = png_get_bit_depth(r.png, r.info);
    if (keep_indices) {
      if (color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY) {
        throw FormatError("label map must be palette or grayscale: " + path.string());
      }
      if (depth < 8) png_set_packing(r.png);
      if (depth == 16) png_set_strip_16(r.png);
    } else {
      if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
      if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
      if (depth == 16) png_set_strip_16(r.png);
      if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(r.png);
      }
      if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
      if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    }
    png_read_update_info(r.png, r.info);
    const int width = static_cast<int>(png_get_image_width(r.png, r.info));
    const int height = static_cast<int>(png_get_image_height(r.png, r.info));
    int channels = png_get_channels(r.png, r.info);
    auto out = torch::empty({height, width, channels}, torch::kUInt8);
    std::vector<png_bytep> rows(height);
    auto* base = out.data_ptr<std::uint8_t>();
    for (int y = 0; y < height; ++y) rows[y] = base + static_cast<std::size_t>(y) * width * channels;
    if (setjmp(png_jmpbuf(r.png))) throw FormatError("corrupt PNG: " + path.string());
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
    if (!keep_indices && channels == 4) out = out.slice(2, 0, 3).contiguous();
    return out;
}

torch::Tensor to_bytes(const torch::Tensor& image) {
  return ((image.detach().to(torch::kFloat32).cpu() + 1.0) * 127.5)
      .round()
      .clamp(0, 255)
      .to(torch::kUInt8);
}

}  // namespace

torch::Tensor quantize8(const torch::Tensor& image) {
  return to_bytes(image).to(torch::kFloat32) / 127.5 - 1.0;
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image) {
  if (image.dim() != 3 || (image.size(0) != 3 && image.size(0) != 1)) {
    throw InvalidArgument("write_png: expected [3,H,W] or [1,H,W] image");
  }
  auto hwc = to_bytes(image.size(0) == 1 ? image.expand({3, image.size(1), image.size(2)}) : image)
                 .permute({1, 2, 0})
                 .contiguous();
  std::vector<std::uint8_t> pixels(hwc.data_ptr<std::uint8_t>(),
                                   hwc.data_ptr<std::uint8_t>() + hwc.numel());
  write_rows(path, static_cast<int>(hwc.size(1)), static_cast<int>(hwc.size(0)),
             PNG_COLOR_TYPE_RGB, {}, pixels, 3);
}

torch::Tensor read_png_bytes(const std::filesystem::path& path) {
  return read_rows(path, false);
}

torch::Tensor read_png(const std::filesystem::path& path) {
  return read_rows(path, false).permute({2, 0, 1}).to(torch::kFloat32) / 127.5 - 1.0;
}

void write_label_png(const std::filesystem::path& path, const torch::Tensor& labels) {
  if (labels.dim() != 2) throw InvalidArgument("write_label_png: expected [H,W] labels");
  auto l = labels.detach().cpu().to(torch::kInt64);
  if (l.numel() > 0 && (l.min().item<int64_t>() < 0 || l.max().item<int64_t>() > 255)) {
    throw InvalidArgument("write_label_png: labels must be in 0..255");
  }
  // Fixed palette: background, clothes, skin, other body, then a gray ramp.
  std::vector<png_color> palette = {{0, 0, 0}, {200, 40, 40}, {240, 200, 150}, {60, 80, 200}};
  const int max_label = l.numel() > 0 ? static_cast<int>(l.max().item<int64_t>()) : 0;
  for (int i = static_cast<int>(palette.size()); i <= max_label; ++i) {
    const auto v = static_cast<png_byte>(i);
    palette.push_back({v, v, v});
  }
  auto bytes = l.to(torch::kUInt8).contiguous();
  std::vector<std::uint8_t> pixels(bytes.data_ptr<std::uint8_t>(),
                                   bytes.data_ptr<std::uint8_t>() + bytes.numel());
  write_rows(path, static_cast<int>(l.size(1)), static_cast<int>(l.size(0)),
             PNG_COLOR_TYPE_PALETTE, palette, pixels, 1);
}

torch::Tensor read_label_png(const std::filesystem::path& path) {
  return read_rows(path, true).select(2, 0).to(torch::kInt64);
}

}  // namespace dcton
