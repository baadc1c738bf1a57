#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace dcton::nets {

inline constexpr std::array<int, 5> kEncoderFilters = {64, 128, 256, 512, 512};
/// Input widths of the five try-on decoder stages. Each stage reads the
/// previous stage output concatenated with three encoder levels.
inline constexpr std::array<int, 5> kDecoderFilters = {1536, 2048, 1024, 512, 256};
inline constexpr std::array<int, 5> kDecoderOutputs = {512, 256, 128, 64, 64};
inline constexpr std::array<int, 5> kMpnDecoderFilters = {512, 1024, 512, 256, 128};
inline constexpr int kGridRows = 5;
inline constexpr int kGridCols = 5;
inline constexpr int kGridPoints = kGridRows * kGridCols;

using FeaturePyramid = std::vector<torch::Tensor>;

struct MaskPair {
  torch::Tensor clothes;  // [B,1,H,W] in [0,1]
  torch::Tensor skin;     // [B,1,H,W] in [0,1]
};

/// conv3x3 -> instance norm -> LeakyReLU(0.2)
struct ConvBlockImpl : torch::nn::Module {
  ConvBlockImpl(int in, int out, int stride);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::InstanceNorm2d norm{nullptr};
};
TORCH_MODULE(ConvBlock);

struct ResidualBlockImpl : torch::nn::Module {
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

  ConvBlock first{nullptr};
  torch::nn::Conv2d second{nullptr};
  torch::nn::InstanceNorm2d norm{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Five stride-2 stages with residual blocks after the 3rd and 5th.
/// Produces maps at 1/2 .. 1/32 scale.
struct EncoderImpl : torch::nn::Module {
  explicit EncoderImpl(int in_channels);
  FeaturePyramid forward(const torch::Tensor& x);

  int in_channels;
  torch::nn::ModuleList stages;
  ResidualBlock res3{nullptr};
  ResidualBlock res5{nullptr};
};
TORCH_MODULE(Encoder);

/// U-Net style decoder. Stage s works at pyramid level 4-s, then resizes to
/// the next level (the last stage to full resolution) before a conv head.
struct DecoderImpl : torch::nn::Module {
  DecoderImpl(std::vector<int> stage_inputs, std::vector<int> stage_outputs, int out_channels);
  torch::Tensor forward(const std::vector<FeaturePyramid>& pyramids, int out_h, int out_w);

  std::vector<int> stage_inputs;
  torch::nn::ModuleList stages;
  torch::nn::Conv2d head1{nullptr};
  torch::nn::Conv2d head2{nullptr};
};
TORCH_MODULE(Decoder);

/// Mask prediction network: (descriptor, clothes) -> soft clothes/skin layout.
struct MpnImpl : torch::nn::Module {
  explicit MpnImpl(int descriptor_channels);
  MaskPair forward(const torch::Tensor& descriptor, const torch::Tensor& clothes);

  Encoder encoder{nullptr};
  Decoder decoder{nullptr};
};
TORCH_MODULE(Mpn);

struct StnOutput {
  torch::Tensor offsets;    // [B,K,2], each coordinate in [-1,1]
  torch::Tensor dst;        // [B,K,2] canonical grid + offsets
  torch::Tensor transform;  // [B,3,K] homogeneous dst points
};

/// Regresses TPS control-point offsets from (clothes mask, clothes image).
struct StnImpl : torch::nn::Module {
  StnImpl();
  StnOutput forward(const torch::Tensor& clothes_mask, const torch::Tensor& clothes);
  /// Warps `clothes` so that the canonical lattice lands on `dst`.
  torch::Tensor warp(const torch::Tensor& clothes, const torch::Tensor& dst) const;

  torch::nn::ModuleList stages;
  torch::nn::Linear fc1{nullptr};
  torch::nn::Linear fc2{nullptr};
  torch::Tensor canonical;  // [K,2] buffer
};
TORCH_MODULE(Stn);

/// PatchGAN critic: three stride-2 convs and a 1-channel logit map.
struct PatchDiscriminatorImpl : torch::nn::Module {
  explicit PatchDiscriminatorImpl(int in_channels = 3);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

struct GeneratorOutput {
  torch::Tensor image;           // [B,3,H,W] in [-1,1]
  MaskPair masks;                // predicted layout of the output person
  torch::Tensor transform;       // [B,3,K]
  torch::Tensor warped_clothes;  // [B,3,H,W]
};

struct ModelConfig {
  bool skin_encoder = true;
  int descriptor_channels = 7;
};

/// The try-on generator (MPN, three encoders, decoder) plus the STN it warps with.
/// The STN is owned here but is trained only by STN pretraining.
struct TryOnModelImpl : torch::nn::Module {
  explicit TryOnModelImpl(ModelConfig config = {});

  GeneratorOutput forward(const torch::Tensor& person, const torch::Tensor& skin,
                          const torch::Tensor& clothes, const torch::Tensor& descriptor);

  /// Parameters updated during cycle training (everything except the STN).
  std::vector<torch::Tensor> generator_parameters() const;

  ModelConfig config;
  Mpn mpn{nullptr};
  Stn stn{nullptr};
  Encoder clothes_encoder{nullptr};
  Encoder skin_encoder{nullptr};  // null when the skin branch is ablated
  Encoder person_encoder{nullptr};
  Decoder decoder{nullptr};
  std::int64_t passes = 0;
};
TORCH_MODULE(TryOnModel);

/// Spatial sizes accepted by every network (multiples of 16, >= 32).
void check_input(const torch::Tensor& x, int channels, const char* what);

/// Re-initializes all weights deterministically from `seed`.
void init_weights(torch::nn::Module& module, std::uint64_t seed);

TryOnModel make_model(const ModelConfig& config, std::uint64_t seed);
PatchDiscriminator make_discriminator(std::uint64_t seed);

std::int64_t parameter_count(const torch::nn::Module& module);

// ---------------------------------------------------------------------------
// Checkpoints: a directory holding manifest.txt, config.txt and one tensor
// file per entry.

inline constexpr const char* kCheckpointHeader = "DCTON-CHECKPOINT 1";

struct Checkpoint {
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
  std::map<std::string, std::string> config;

  const torch::Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Appends parameters and buffers of `module` under `prefix`.
void collect(const torch::nn::Module& module, const std::string& prefix, Checkpoint& out);
/// Copies tensors named `prefix.*` into the module. Missing names or shape
/// mismatches raise FormatError.
void restore(torch::nn::Module& module, const std::string& prefix, const Checkpoint& ckpt);

}  // namespace dcton::nets
