#include "dcton/losses.hpp"

#include "dcton/errors.hpp"
#include "dcton/geometry.hpp"

namespace dcton::losses {

namespace F = torch::nn::functional;

namespace {

void require_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw InvalidArgument(std::string(what) + ": tensor sizes differ");
  }
}

void require_spatial(const torch::Tensor& mask, const torch::Tensor& image, const char* what) {
  if (mask.dim() != image.dim() || mask.size(-1) != image.size(-1) ||
      mask.size(-2) != image.size(-2) || (mask.size(-3) != 1 && mask.size(-3) != image.size(-3))) {
    throw InvalidArgument(std::string(what) + ": mask does not match image size");
  }
}

torch::Tensor real_term(const torch::Tensor& logits) {
  return F::softplus(-logits.clamp(-kLogitClamp, kLogitClamp)).mean();
}

torch::Tensor fake_term(const torch::Tensor& logits) {
  return F::softplus(logits.clamp(-kLogitClamp, kLogitClamp)).mean();
}

}  // namespace

void LambdaConfig::validate() const {
  if (lambda_cyc < 0 || lambda_vgg < 0 || lambda_pre < 0) {
    throw InvalidArgument("loss weights must be non-negative");
  }
}

torch::Tensor appearance_loss(const torch::Tensor& warped, const torch::Tensor& person,
                              const torch::Tensor& clothes_mask) {
  require_same(warped, person, "stn appearance loss");
  require_spatial(clothes_mask, person, "stn appearance loss");
  auto support = (clothes_mask > 0).to(person.scalar_type()).expand_as(person);
  auto diff = (warped - person * clothes_mask).abs() * support;
  auto count = support.sum();
  return torch::where(count > 0, diff.sum() / count.clamp_min(1.0), diff.sum() * 0.0);
}

StnLoss stn_pretrain_loss(const torch::Tensor& warped, const torch::Tensor& person,
                          const torch::Tensor& clothes_mask, const torch::Tensor& t_prev,
                          const torch::Tensor& t_curr, bool use_regularization) {
  StnLoss out;
  out.appearance = appearance_loss(warped, person, clothes_mask);
  if (use_regularization) {
    out.regularization =
        t_curr.dim() == 2
            ? geometry::regularization_term(geometry::TransformMatrix{t_prev},
                                            geometry::TransformMatrix{t_curr})
            : geometry::regularization_term(t_prev, t_curr);
    out.regularization = out.regularization.to(out.appearance.scalar_type());
  } else {
    out.regularization = torch::zeros({}, out.appearance.options());
  }
  out.total = out.appearance + out.regularization;
  return out;
}

AdversarialLoss adversarial_loss(const AdversarialScores& s) {
  AdversarialLoss out;
  out.generator = real_term(s.person_fwd) + real_term(s.person_back) + real_term(s.skin_fwd) +
                  real_term(s.skin_back);
  if (!s.person_real.defined() || !s.skin_real.defined()) return out;
  const auto real_p = real_term(s.person_real);
  const auto real_s = real_term(s.skin_real);
  out.person_disc = (real_p + fake_term(s.person_fwd)) + (real_p + fake_term(s.person_back));
  out.skin_disc = (real_s + fake_term(s.skin_fwd)) + (real_s + fake_term(s.skin_back));
  return out;
}

torch::Tensor cycle_loss(const torch::Tensor& i1_back, const torch::Tensor& i1,
                         const torch::Tensor& s1_back, const torch::Tensor& s1) {
  require_same(i1_back, i1, "cycle loss (person)");
  require_same(s1_back, s1, "cycle loss (skin)");
  return (i1_back - i1).abs().mean() + (s1_back - s1).abs().mean();
}

torch::Tensor content_preserving_loss(const torch::Tensor& i2, const torch::Tensor& i1_back,
                                      const torch::Tensor& i1, const torch::Tensor& m_skin,
                                      const torch::Tensor& m_clothes) {
  require_same(i2, i1, "content loss");
  require_same(i1_back, i1, "content loss");
  require_same(m_skin, m_clothes, "content loss masks");
  require_spatial(m_skin, i1, "content loss");
  auto keep = (1.0 - m_skin - m_clothes).clamp(0.0, 1.0);
  return (keep * (i2 - i1)).abs().mean() + (keep * (i1_back - i1)).abs().mean();
}

RandomConvExtractor::RandomConvExtractor(std::uint64_t seed, std::vector<int> channels,
                                         int in_channels)
    : seed_(seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int prev = in_channels;
  for (int c : channels) {
    const double scale = std::sqrt(2.0 / (prev * 9));
    weights_.push_back(torch::randn({c, prev, 3, 3}, gen, torch::kFloat64) * scale);
    biases_.push_back(torch::randn({c}, gen, torch::kFloat64) * 0.1);
    prev = c;
  }
}

std::vector<torch::Tensor> RandomConvExtractor::features(const torch::Tensor& x) const {
  std::vector<torch::Tensor> out;
  auto h = x;
  for (size_t i = 0; i < weights_.size(); ++i) {
    const auto stride = i == 0 ? 1 : 2;
    h = F::conv2d(h, weights_[i].to(x.scalar_type()),
                  F::Conv2dFuncOptions().bias(biases_[i].to(x.scalar_type())).stride(stride).padding(1));
    h = F::leaky_relu(h, F::LeakyReLUFuncOptions().negative_slope(0.2));
    out.push_back(h);
  }
  return out;
}

std::string RandomConvExtractor::name() const {
  return "random-conv-" + std::to_string(weights_.size()) + "x-seed" + std::to_string(seed_);
}

torch::Tensor perceptual_loss(const FeatureExtractor& extractor, const torch::Tensor& c2_warp,
                              const torch::Tensor& i2, const torch::Tensor& m1_clothes,
                              const torch::Tensor& c1_warp, const torch::Tensor& i1_back,
                              const torch::Tensor& m2_clothes) {
  require_same(c2_warp, i2, "perceptual loss");
  require_same(c1_warp, i1_back, "perceptual loss");
  require_spatial(m1_clothes, i2, "perceptual loss");
  require_spatial(m2_clothes, i1_back, "perceptual loss");
  const auto fa = extractor.features(c2_warp);
  const auto fb = extractor.features(m1_clothes * i2);
  const auto fc = extractor.features(c1_warp);
  const auto fd = extractor.features(m2_clothes * i1_back);
  if (fa.empty() || fa.size() != fb.size() || fa.size() != fc.size() || fa.size() != fd.size()) {
    throw InvalidArgument("perceptual loss: extractor returned inconsistent layer counts");
  }
  auto total = torch::zeros({}, c2_warp.options());
  for (size_t l = 0; l < fa.size(); ++l) {
    if (fa[l].sizes() != fb[l].sizes() || fc[l].sizes() != fd[l].sizes()) {
      throw InvalidArgument("perceptual loss: feature shapes differ at layer " + std::to_string(l));
    }
    // 1/(W H C) per sample, then the batch mean: together an element mean.
    total = total + (fa[l] - fb[l]).abs().sum() / fa[l].numel() +
            (fc[l] - fd[l]).abs().sum() / fc[l].numel();
  }
  return total;
}

torch::Tensor mpn_mask_loss(const nets::MaskPair& pred, const nets::MaskPair& gt) {
  require_same(pred.clothes, gt.clothes, "mask loss (clothes)");
  require_same(pred.skin, gt.skin, "mask loss (skin)");
  return (pred.clothes - gt.clothes).abs().mean() + (pred.skin - gt.skin).abs().mean();
}

double total_loss(const LossReport& r, const LambdaConfig& l) {
  return total_loss(r.adv, r.cyc, r.vgg, r.pre, l);
}

}  // namespace dcton::losses
