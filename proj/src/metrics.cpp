#include "dcton/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <set>
#include <sstream>

#include "dcton/errors.hpp"
#include "dcton/image.hpp"

namespace dcton::metrics {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

Eigen::MatrixXd luma01(const torch::Tensor& img) {
  const auto x = img.to(torch::kFloat64).contiguous();
  const auto h = x.size(1), w = x.size(2);
  auto a = x.accessor<double, 3>();
  Eigen::MatrixXd y(h, w);
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      const double v = 0.299 * a[0][i][j] + 0.587 * a[1][i][j] + 0.114 * a[2][i][j];
      y(i, j) = (v + 1.0) * 0.5;
    }
  }
  return y;
}

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

/// Valid-mode separable filtering.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& x) {
  static const auto g = gaussian_window();
  const auto h = x.rows(), w = x.cols();
  Eigen::MatrixXd rows(h, w - kWindow + 1);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * x(i, j + k);
      rows(i, j) = s;
    }
  }
  Eigen::MatrixXd out(h - kWindow + 1, rows.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * rows(i + k, j);
      out(i, j) = s;
    }
  }
  return out;
}

void check_image(const torch::Tensor& img, const char* what) {
  if (img.dim() != 3 || img.size(0) != 3) {
    throw InvalidArgument(std::string(what) + ": expected a [3,H,W] image");
  }
}

Eigen::MatrixXd to_eigen_rows(const torch::Tensor& t) {
  const auto x = t.to(torch::kFloat64).contiguous();
  Eigen::MatrixXd m(x.size(0), x.size(1));
  auto a = x.accessor<double, 2>();
  for (int64_t i = 0; i < x.size(0); ++i) {
    for (int64_t j = 0; j < x.size(1); ++j) m(i, j) = a[i][j];
  }
  return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

std::vector<std::string> png_ids(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw NotFound("directory not found: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
  check_image(a, "ssim");
  check_image(b, "ssim");
  if (a.sizes() != b.sizes()) throw InvalidArgument("ssim: image sizes differ");
  if (a.size(1) < kWindow || a.size(2) < kWindow) {
    throw InvalidArgument("ssim: images must be at least 11x11");
  }
  const Eigen::MatrixXd x = luma01(a), y = luma01(b);
  const Eigen::MatrixXd mx = filter_valid(x), my = filter_valid(y);
  const Eigen::MatrixXd sxx = filter_valid(x.cwiseProduct(x)) - mx.cwiseProduct(mx);
  const Eigen::MatrixXd syy = filter_valid(y.cwiseProduct(y)) - my.cwiseProduct(my);
  const Eigen::MatrixXd sxy = filter_valid(x.cwiseProduct(y)) - mx.cwiseProduct(my);
  const Eigen::ArrayXXd num = (2.0 * mx.cwiseProduct(my).array() + kC1) * (2.0 * sxy.array() + kC2);
  const Eigen::ArrayXXd den =
      (mx.array().square() + my.array().square() + kC1) * (sxx.array() + syy.array() + kC2);
  return (num / den).mean();
}

GaussianStats gaussian_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) throw InvalidArgument("gaussian_stats: need at least two rows");
  GaussianStats s;
  s.n = features.rows();
  s.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * centered / static_cast<double>(s.n - 1);
  s.cov = 0.5 * (s.cov + s.cov.transpose());
  return s;
}

double fid(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows()) {
    throw InvalidArgument("fid: feature dimensions differ");
  }
  // Tr((S1 S2)^1/2) = Tr((S1^1/2 S2 S1^1/2)^1/2), which is symmetric PSD.
  const Eigen::MatrixXd r1 = psd_sqrt(a.cov);
  const Eigen::MatrixXd inner = r1 * b.cov * r1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()),
                                                     Eigen::EigenvaluesOnly);
  const double cross = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value =
      (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
  return std::max(value, 0.0);
}

ScoreSpread inception_score(const Eigen::MatrixXd& probs, int splits) {
  const auto n = probs.rows();
  if (n == 0 || probs.cols() == 0) throw InvalidArgument("inception_score: empty input");
  if (splits < 1 || splits > n) {
    throw InvalidArgument("inception_score: splits must lie in [1, n]");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-6 || probs.row(i).minCoeff() < 0.0) {
      throw InvalidArgument("inception_score: row " + std::to_string(i) +
                            " is not a probability vector");
    }
  }
  std::vector<double> scores;
  for (int s = 0; s < splits; ++s) {
    const auto begin = s * n / splits, end = (s + 1) * n / splits;
    const auto part = probs.middleRows(begin, end - begin);
    const Eigen::RowVectorXd marginal = part.colwise().mean();
    double kl = 0.0;
    for (Eigen::Index i = 0; i < part.rows(); ++i) {
      for (Eigen::Index k = 0; k < part.cols(); ++k) {
        const double p = part(i, k);
        if (p > 0.0) kl += p * (std::log(p) - std::log(marginal(k)));
      }
    }
    scores.push_back(std::exp(kl / static_cast<double>(part.rows())));
  }
  ScoreSpread out;
  for (double v : scores) out.mean += v;
  out.mean /= static_cast<double>(scores.size());
  for (double v : scores) out.stdev += (v - out.mean) * (v - out.mean);
  out.stdev = std::sqrt(out.stdev / static_cast<double>(scores.size()));
  return out;
}

RandomConvEmbedder::RandomConvEmbedder(std::uint64_t seed, std::vector<int> channels)
    : seed_(seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int prev = 3;
  for (int c : channels) {
    weights_.push_back(torch::randn({c, prev, 3, 3}, gen, torch::kFloat64) *
                       std::sqrt(2.0 / (prev * 9)));
    prev = c;
  }
}

Eigen::MatrixXd RandomConvEmbedder::embed(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw InvalidArgument("embedder: expected [N,3,H,W] images");
  }
  torch::NoGradGuard no_grad;
  auto h = images.to(torch::kFloat64);
  for (const auto& w : weights_) {
    h = F::conv2d(h, w, F::Conv2dFuncOptions().stride(2).padding(1));
    h = torch::tanh(h);
  }
  const auto feats = torch::cat({h.mean({2, 3}), h.std({2, 3}, /*unbiased=*/false)}, 1);
  return to_eigen_rows(feats);
}

std::string RandomConvEmbedder::name() const {
  return "random-conv" + std::to_string(weights_.size()) + "-seed" + std::to_string(seed_);
}

RandomLinearClassifier::RandomLinearClassifier(std::shared_ptr<const Embedder> embedder,
                                               int classes, std::uint64_t seed)
    : embedder_(std::move(embedder)), classes_(classes), seed_(seed) {
  if (!embedder_) throw InvalidArgument("classifier: embedder is null");
  if (classes_ < 2) throw InvalidArgument("classifier: need at least two classes");
}

Eigen::MatrixXd RandomLinearClassifier::probabilities(const torch::Tensor& images) const {
  const Eigen::MatrixXd f = embedder_->embed(images);
  if (weights_.rows() != f.cols()) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed_);
    const auto w = torch::randn({f.cols(), classes_}, gen, torch::kFloat64) * 4.0;
    weights_ = to_eigen_rows(w);
  }
  Eigen::MatrixXd logits = f * weights_;
  Eigen::MatrixXd probs(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp().matrix();
    probs.row(i) = e / e.sum();
  }
  return probs;
}

std::string RandomLinearClassifier::name() const {
  return "random-linear" + std::to_string(classes_) + "-seed" + std::to_string(seed_);
}

std::string Backend::name() const {
  return (embedder ? embedder->name() : "none") + "+" + (classifier ? classifier->name() : "none");
}

Backend make_backend(const std::string& name) {
  if (name == "random-conv") {
    auto embedder = std::make_shared<RandomConvEmbedder>();
    return {embedder, std::make_shared<RandomLinearClassifier>(embedder)};
  }
  throw InvalidArgument("unknown metric backend '" + name + "' (known: random-conv)");
}

std::string MetricReport::text() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "backend: %s\nimages: %lld\nSSIM: %.6f +- %.6f\nFID: %.6f\nIS: %.6f +- %.6f\n",
                backend.c_str(), static_cast<long long>(n_images), ssim_mean, ssim_stdev, fid,
                is_mean, is_stdev);
  return buf;
}

std::string MetricReport::csv() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "backend,n_images,ssim_mean,ssim_stdev,fid,is_mean,is_stdev\n"
                "%s,%lld,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                backend.c_str(), static_cast<long long>(n_images), ssim_mean, ssim_stdev, fid,
                is_mean, is_stdev);
  return buf;
}

MetricReport evaluate_images(const std::vector<torch::Tensor>& pred,
                             const std::vector<torch::Tensor>& ref, const Backend& backend,
                             int splits) {
  if (pred.size() != ref.size()) throw InvalidArgument("evaluate: image counts differ");
  if (pred.size() < 2) throw InvalidArgument("evaluate: need at least two images");
  if (!backend.embedder || !backend.classifier) throw InvalidArgument("evaluate: empty backend");
  MetricReport r;
  r.backend = backend.name();
  r.n_images = static_cast<std::int64_t>(pred.size());
  std::vector<double> s;
  for (size_t i = 0; i < pred.size(); ++i) s.push_back(ssim(pred[i], ref[i]));
  for (double v : s) r.ssim_mean += v;
  r.ssim_mean /= static_cast<double>(s.size());
  for (double v : s) r.ssim_stdev += (v - r.ssim_mean) * (v - r.ssim_mean);
  r.ssim_stdev = std::sqrt(r.ssim_stdev / static_cast<double>(s.size()));

  const auto pred_batch = torch::stack(pred);
  const auto ref_batch = torch::stack(ref);
  r.fid = fid(gaussian_stats(backend.embedder->embed(pred_batch)),
              gaussian_stats(backend.embedder->embed(ref_batch)));
  const auto is = inception_score(backend.classifier->probabilities(pred_batch),
                                  std::min<int>(splits, static_cast<int>(pred.size())));
  r.is_mean = is.mean;
  r.is_stdev = is.stdev;
  return r;
}

MetricReport evaluate_dirs(const fs::path& pred_dir, const fs::path& ref_dir,
                           const Backend& backend, int splits) {
  const auto pred_ids = png_ids(pred_dir);
  const auto ref_ids = png_ids(ref_dir);
  std::vector<std::string> only_pred, only_ref;
  std::set_difference(pred_ids.begin(), pred_ids.end(), ref_ids.begin(), ref_ids.end(),
                      std::back_inserter(only_pred));
  std::set_difference(ref_ids.begin(), ref_ids.end(), pred_ids.begin(), pred_ids.end(),
                      std::back_inserter(only_ref));
  if (!only_pred.empty() || !only_ref.empty()) {
    std::ostringstream msg;
    msg << "image ids differ between directories;";
    if (!only_ref.empty()) {
      msg << " missing from " << pred_dir.string() << ':';
      for (const auto& id : only_ref) msg << ' ' << id;
      msg << ';';
    }
    if (!only_pred.empty()) {
      msg << " missing from " << ref_dir.string() << ':';
      for (const auto& id : only_pred) msg << ' ' << id;
    }
    throw InvalidArgument(msg.str());
  }
  std::vector<torch::Tensor> pred, ref;
  for (const auto& id : pred_ids) {
    pred.push_back(read_png(pred_dir / (id + ".png")));
    ref.push_back(read_png(ref_dir / (id + ".png")));
  }
  return evaluate_images(pred, ref, backend, splits);
}

}  // namespace dcton::metrics
