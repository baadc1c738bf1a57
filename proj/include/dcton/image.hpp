#pragma once

#include <filesystem>

#include <torch/torch.h>

namespace dcton {

// Images live in memory as float32 [C,H,W] tensors with values in [-1,1].
// Conversion to and from 8-bit happens only at the file boundary.

/// Quantize to the nearest 8-bit level and back, i.e. what a PNG round trip yields.
torch::Tensor quantize8(const torch::Tensor& image);

void write_png(const std::filesystem::path& path, const torch::Tensor& image);
torch::Tensor read_png(const std::filesystem::path& path);

/// Palette-indexed label map, [H,W] integer tensor with small non-negative labels.
void write_label_png(const std::filesystem::path& path, const torch::Tensor& labels);
torch::Tensor read_label_png(const std::filesystem::path& path);

/// Decoded 8-bit pixels, [H,W,C] uint8, for byte-level comparisons.
torch::Tensor read_png_bytes(const std::filesystem::path& path);

}  // namespace dcton
