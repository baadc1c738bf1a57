#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "dcton/nets.hpp"

namespace dcton::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand and returns the process exit code.
int dispatch(int argc, const char* const* argv);

struct InferResult {
  torch::Tensor image;        // [3,H,W]
  nets::GeneratorOutput raw;  // batched intermediates
  torch::Tensor skin;         // S1 fed to the generator, [3,H,W]
  std::int64_t passes = 0;    // generator passes spent on this call
};

/// Single forward pass of the generator on one person/clothes pair.
InferResult infer(nets::TryOnModel& model, const torch::Tensor& person,
                  const torch::Tensor& clothes, const torch::Tensor& descriptor,
                  const torch::Tensor& parse);

/// Writes the try-on PNG and, when `debug_dir` is set, warped clothes, masks and skin.
void write_inference(const InferResult& result, const std::filesystem::path& out,
                     const std::optional<std::filesystem::path>& debug_dir);

/// Rows of (input, clothes, result) separated by 4-pixel white gutters.
torch::Tensor compose_grid(const std::vector<std::array<torch::Tensor, 3>>& cases);

inline constexpr int kGutter = 4;

/// A checkpoint directory, or a training run directory whose latest.txt names one.
std::filesystem::path resolve_checkpoint(const std::filesystem::path& path);

}  // namespace dcton::cli
