#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

namespace dcton::metrics {

/// SSIM on luma (0.299/0.587/0.114) of two [3,H,W] images in [-1,1]; 11x11
/// Gaussian window with sigma 1.5, mean over fully covered windows.
double ssim(const torch::Tensor& a, const torch::Tensor& b);

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased
  std::int64_t n = 0;
};

/// features: n x d, n >= 2.
GaussianStats gaussian_stats(const Eigen::MatrixXd& features);

double fid(const GaussianStats& a, const GaussianStats& b);

struct ScoreSpread {
  double mean = 0.0;
  double stdev = 0.0;
};

/// probs: n x K rows summing to 1. Splits are contiguous; stdev is the population stdev.
ScoreSpread inception_score(const Eigen::MatrixXd& probs, int splits = 10);

/// Image -> feature vector for FID.
class Embedder {
 public:
  virtual ~Embedder() = default;
  /// [N,3,H,W] -> N x d
  virtual Eigen::MatrixXd embed(const torch::Tensor& images) const = 0;
  virtual std::string name() const = 0;
};

/// Image -> class probabilities for IS.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Eigen::MatrixXd probabilities(const torch::Tensor& images) const = 0;
  virtual std::string name() const = 0;
};

/// Frozen conv stack with seed-fixed weights, mean- and std-pooled per channel.
class RandomConvEmbedder final : public Embedder {
 public:
  explicit RandomConvEmbedder(std::uint64_t seed = 7, std::vector<int> channels = {16, 32, 32});
  Eigen::MatrixXd embed(const torch::Tensor& images) const override;
  std::string name() const override;

 private:
  std::uint64_t seed_;
  std::vector<torch::Tensor> weights_;
};

/// Softmax of a seed-fixed random linear map over an embedder's features.
class RandomLinearClassifier final : public Classifier {
 public:
  RandomLinearClassifier(std::shared_ptr<const Embedder> embedder, int classes = 10,
                         std::uint64_t seed = 11);
  Eigen::MatrixXd probabilities(const torch::Tensor& images) const override;
  std::string name() const override;

 private:
  std::shared_ptr<const Embedder> embedder_;
  int classes_;
  std::uint64_t seed_;
  mutable Eigen::MatrixXd weights_;  // d x K, sized on first use
};

struct Backend {
  std::shared_ptr<const Embedder> embedder;
  std::shared_ptr<const Classifier> classifier;
  std::string name() const;
};

/// Known names: "random-conv". Unknown names raise InvalidArgument.
Backend make_backend(const std::string& name);

struct MetricReport {
  std::string backend;
  std::int64_t n_images = 0;
  double ssim_mean = 0.0;
  double ssim_stdev = 0.0;
  double fid = 0.0;
  double is_mean = 0.0;
  double is_stdev = 0.0;

  std::string text() const;
  std::string csv() const;  // header line plus one row
};

/// Pairs <id>.png files of both directories. Any id present on one side only
/// raises InvalidArgument listing every such id.
MetricReport evaluate_dirs(const std::filesystem::path& pred_dir,
                           const std::filesystem::path& ref_dir, const Backend& backend,
                           int splits = 10);

/// Same as evaluate_dirs on in-memory, id-aligned [3,H,W] images.
MetricReport evaluate_images(const std::vector<torch::Tensor>& pred,
                             const std::vector<torch::Tensor>& ref, const Backend& backend,
                             int splits = 10);

}  // namespace dcton::metrics
