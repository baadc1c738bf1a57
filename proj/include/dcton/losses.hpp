#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "dcton/nets.hpp"

namespace dcton::losses {

// All L1 terms are element means unless stated otherwise.

struct LambdaConfig {
  double lambda_cyc = 10.0;
  double lambda_vgg = 10.0;
  double lambda_pre = 10.0;

  void validate() const;
};

struct LossReport {
  double adv = 0.0;
  double cyc = 0.0;
  double pre = 0.0;
  double vgg = 0.0;
  double mpn = 0.0;
  double stn_a = 0.0;
  double stn_rb = 0.0;
  double total = 0.0;
  std::int64_t iteration = 0;
};

struct StnLoss {
  torch::Tensor appearance;      // L_a
  torch::Tensor regularization;  // R_b
  torch::Tensor total;           // L_a + R_b
};

/// L_a: mean |warped - person * mask| over the support of the mask (mask > 0).
/// R_b: homography-fit residual of t_curr against t_prev ([3,K] and [B,3,K] or [3,K]).
/// With use_regularization = false, R_b is an exact zero.
StnLoss stn_pretrain_loss(const torch::Tensor& warped, const torch::Tensor& person,
                          const torch::Tensor& clothes_mask, const torch::Tensor& t_prev,
                          const torch::Tensor& t_curr, bool use_regularization = true);

torch::Tensor appearance_loss(const torch::Tensor& warped, const torch::Tensor& person,
                              const torch::Tensor& clothes_mask);

/// Logits are clamped to +-kLogitClamp before the log-sigmoid terms.
inline constexpr double kLogitClamp = 30.0;

/// Discriminator logit maps for one cycle.
struct AdversarialScores {
  torch::Tensor person_fwd;   // D_p(I2)
  torch::Tensor person_back;  // D_p(I1<-)
  torch::Tensor skin_fwd;     // D_s(S2)
  torch::Tensor skin_back;    // D_s(S1<-)
  torch::Tensor person_real;  // D_p(I1)
  torch::Tensor skin_real;    // D_s(S1)
};

struct AdversarialLoss {
  torch::Tensor generator;     // sum over the four fakes of -log D(fake)
  torch::Tensor person_disc;   // sum over (I1, fake) pairs of -log D(I1) - log(1 - D(fake))
  torch::Tensor skin_disc;
};

/// Without real scores only the generator term is formed.
AdversarialLoss adversarial_loss(const AdversarialScores& s);

torch::Tensor cycle_loss(const torch::Tensor& i1_back, const torch::Tensor& i1,
                         const torch::Tensor& s1_back, const torch::Tensor& s1);

/// Penalizes changes outside the clothes and skin layout, M = clamp(1 - skin - clothes).
torch::Tensor content_preserving_loss(const torch::Tensor& i2, const torch::Tensor& i1_back,
                                      const torch::Tensor& i1, const torch::Tensor& m_skin,
                                      const torch::Tensor& m_clothes);

/// Multi-layer feature source for the perceptual loss.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<torch::Tensor> features(const torch::Tensor& x) const = 0;
  virtual std::string name() const = 0;
};

/// Returns its input as the single feature layer.
class IdentityExtractor final : public FeatureExtractor {
 public:
  std::vector<torch::Tensor> features(const torch::Tensor& x) const override { return {x}; }
  std::string name() const override { return "identity"; }
};

/// Frozen conv stack with seed-fixed random weights; three feature layers at
/// full, 1/2 and 1/4 resolution. Runs in the dtype of its input.
class RandomConvExtractor final : public FeatureExtractor {
 public:
  explicit RandomConvExtractor(std::uint64_t seed = 19, std::vector<int> channels = {16, 32, 64},
                               int in_channels = 3);
  std::vector<torch::Tensor> features(const torch::Tensor& x) const override;
  std::string name() const override;

 private:
  std::uint64_t seed_;
  std::vector<torch::Tensor> weights_;
  std::vector<torch::Tensor> biases_;
};

/// sum_l 1/(W_l H_l C_l) * ( |phi_l(c2_warp) - phi_l(m1 * i2)|_1
///                         + |phi_l(c1_warp) - phi_l(m2 * i1_back)|_1 ), averaged over the batch.
torch::Tensor perceptual_loss(const FeatureExtractor& extractor, const torch::Tensor& c2_warp,
                              const torch::Tensor& i2, const torch::Tensor& m1_clothes,
                              const torch::Tensor& c1_warp, const torch::Tensor& i1_back,
                              const torch::Tensor& m2_clothes);

torch::Tensor mpn_mask_loss(const nets::MaskPair& pred, const nets::MaskPair& gt);

/// L_all = adv + l_cyc * cyc + l_vgg * vgg + l_pre * pre
template <class T>
T total_loss(const T& adv, const T& cyc, const T& vgg, const T& pre, const LambdaConfig& l) {
  return adv + l.lambda_cyc * cyc + l.lambda_vgg * vgg + l.lambda_pre * pre;
}

double total_loss(const LossReport& r, const LambdaConfig& l);

}  // namespace dcton::losses
