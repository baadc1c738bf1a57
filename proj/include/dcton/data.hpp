#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace dcton::data {

enum Label : std::int64_t {
  kBackground = 0,
  kClothes = 1,
  kSkin = 2,
  kOtherBody = 3,
};
inline constexpr int kNumLabels = 4;

// Surface descriptor layout: two UV-like coordinates followed by one-hot body parts.
enum DescriptorChannel : int {
  kU = 0,
  kV = 1,
  kHead = 2,
  kTorso = 3,
  kLeftArm = 4,
  kRightArm = 5,
  kLowerBody = 6,
};
inline constexpr int kDescriptorChannels = 7;

/// Fill value for pixels outside a region (mid-gray in [-1,1]).
inline constexpr double kPadding = 0.0;

/// Background of in-shop clothes images.
inline constexpr double kClothesBackground = 1.0;

struct TryOnSample {
  std::string id;
  torch::Tensor person;          // I1, [3,H,W]
  torch::Tensor clothes_self;    // C1, [3,H,W]
  torch::Tensor clothes_target;  // C2, [3,H,W]
  torch::Tensor descriptor;      // D, [7,H,W]
  torch::Tensor parse;           // [H,W] int64 labels
  torch::Tensor skin;            // S1, [3,H,W]
  torch::Tensor warp_points;     // optional ground-truth TPS destination points, [K,2] f64

  int height() const { return static_cast<int>(person.size(1)); }
  int width() const { return static_cast<int>(person.size(2)); }
};

struct DatasetSpec {
  int count = 1;
  int height = 64;
  int width = 48;
  std::uint64_t seed = 0;
  int clothes_styles = 6;

  void validate() const;
};

/// Spatial sizes accepted by the networks: multiples of 16, at least 32.
void check_image_size(int height, int width);

/// Renders sample `index` of the synthetic set in memory. Images are already
/// quantized to 8-bit levels, so saving and reloading is lossless.
TryOnSample render_sample(const DatasetSpec& spec, int index);

/// Writes the dataset directory and returns the sorted sample ids.
std::vector<std::string> generate_dataset(const DatasetSpec& spec,
                                          const std::filesystem::path& out_dir);

void save_sample(const std::filesystem::path& dir, const TryOnSample& sample);

/// Sample ids in sorted order, from manifest.txt when present, otherwise from person/.
std::vector<std::string> list_ids(const std::filesystem::path& dir);

TryOnSample load_sample(const std::filesystem::path& dir, const std::string& id);
std::vector<TryOnSample> load_dataset(const std::filesystem::path& dir);

/// person where parse == skin, kPadding elsewhere.
torch::Tensor extract_skin(const torch::Tensor& person, const torch::Tensor& parse);

/// One-hot [4,H,W] float masks in label order.
torch::Tensor parse_masks(const torch::Tensor& parse);

/// [1,H,W] float mask of one label.
torch::Tensor label_mask(const torch::Tensor& parse, Label label);

}  // namespace dcton::data
