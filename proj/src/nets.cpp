#include "dcton/nets.hpp"

#include "dcton/data.hpp"
#include "dcton/errors.hpp"
#include "dcton/geometry.hpp"

namespace dcton::nets {

namespace F = torch::nn::functional;
using torch::nn::Conv2d;
using torch::nn::Conv2dOptions;

namespace {

Conv2d conv(int in, int out, int kernel, int stride, int padding, bool bias = true) {
  return Conv2d(Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(bias));
}

torch::nn::InstanceNorm2d instance_norm(int channels) {
  return torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(channels).affine(true));
}

torch::Tensor lrelu(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2));
}

torch::Tensor resize(const torch::Tensor& x, int64_t h, int64_t w) {
  if (x.size(2) == h && x.size(3) == w) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{h, w})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

}  // namespace

void check_input(const torch::Tensor& x, int channels, const char* what) {
  if (x.dim() != 4) throw InvalidArgument(std::string(what) + ": expected [B,C,H,W]");
  if (channels > 0 && x.size(1) != channels) {
    throw InvalidArgument(std::string(what) + ": expected " + std::to_string(channels) +
                          " channels, got " + std::to_string(x.size(1)));
  }
  data::check_image_size(static_cast<int>(x.size(2)), static_cast<int>(x.size(3)));
}

ConvBlockImpl::ConvBlockImpl(int in, int out, int stride)
    : conv(register_module("conv", nets::conv(in, out, 3, stride, 1, false))),
      norm(register_module("norm", instance_norm(out))) {}

torch::Tensor ConvBlockImpl::forward(const torch::Tensor& x) { return lrelu(norm(conv(x))); }

ResidualBlockImpl::ResidualBlockImpl(int channels)
    : first(register_module("first", ConvBlock(channels, channels, 1))),
      second(register_module("second", conv(channels, channels, 3, 1, 1, false))),
      norm(register_module("norm", instance_norm(channels))) {}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  return x + norm(second(first(x)));
}

EncoderImpl::EncoderImpl(int in_channels) : in_channels(in_channels) {
  int prev = in_channels;
  for (int filters : kEncoderFilters) {
    stages->push_back(ConvBlock(prev, filters, 2));
    prev = filters;
  }
  register_module("stages", stages);
  res3 = register_module("res3", ResidualBlock(kEncoderFilters[2]));
  res5 = register_module("res5", ResidualBlock(kEncoderFilters[4]));
}

FeaturePyramid EncoderImpl::forward(const torch::Tensor& input) {
  if (input.dim() != 4 || input.size(1) != in_channels) {
    throw InvalidArgument("encoder: expected " + std::to_string(in_channels) +
                          " input channels, got " +
                          (input.dim() == 4 ? std::to_string(input.size(1)) : "bad rank"));
  }
  FeaturePyramid out;
  auto x = input;
  for (size_t i = 0; i < stages->size(); ++i) {
    x = stages[i]->as<ConvBlockImpl>()->forward(x);
    if (i == 2) x = res3(x);
    if (i == 4) x = res5(x);
    out.push_back(x);
  }
  return out;
}

DecoderImpl::DecoderImpl(std::vector<int> inputs, std::vector<int> outputs, int out_channels)
    : stage_inputs(std::move(inputs)) {
  if (stage_inputs.size() != outputs.size()) {
    throw InvalidArgument("decoder: stage input/output lists differ in length");
  }
  for (size_t s = 0; s < stage_inputs.size(); ++s) {
    stages->push_back(ConvBlock(stage_inputs[s], outputs[s], 1));
  }
  register_module("stages", stages);
  head1 = register_module("head1", conv(outputs.back(), 32, 3, 1, 1));
  head2 = register_module("head2", conv(32, out_channels, 3, 1, 1));
}

torch::Tensor DecoderImpl::forward(const std::vector<FeaturePyramid>& pyramids, int out_h,
                                   int out_w) {
  const int levels = static_cast<int>(stages->size());
  torch::Tensor x;
  for (int s = 0; s < levels; ++s) {
    const int level = levels - 1 - s;
    std::vector<torch::Tensor> parts;
    if (x.defined()) parts.push_back(x);
    for (const auto& p : pyramids) parts.push_back(p.at(level));
    auto joined = torch::cat(parts, 1);
    if (joined.size(1) != stage_inputs[s]) {
      throw InvalidArgument("decoder stage " + std::to_string(s) + " expects " +
                            std::to_string(stage_inputs[s]) + " channels, got " +
                            std::to_string(joined.size(1)));
    }
    x = stages[s]->as<ConvBlockImpl>()->forward(joined);
    if (level > 0) {
      const auto& next = pyramids.front().at(level - 1);
      x = resize(x, next.size(2), next.size(3));
    } else {
      x = resize(x, out_h, out_w);
    }
  }
  return head2(lrelu(head1(x)));
}

MpnImpl::MpnImpl(int descriptor_channels)
    : encoder(register_module("encoder", Encoder(descriptor_channels + 3))),
      decoder(register_module(
          "decoder",
          Decoder(std::vector<int>(kMpnDecoderFilters.begin(), kMpnDecoderFilters.end()),
                  std::vector<int>(kDecoderOutputs.begin(), kDecoderOutputs.end()), 2))) {}

MaskPair MpnImpl::forward(const torch::Tensor& descriptor, const torch::Tensor& clothes) {
  check_input(descriptor, encoder->in_channels - 3, "mpn descriptor");
  check_input(clothes, 3, "mpn clothes");
  const auto h = static_cast<int>(clothes.size(2)), w = static_cast<int>(clothes.size(3));
  auto logits = decoder->forward({encoder(torch::cat({descriptor, clothes}, 1))}, h, w);
  auto masks = torch::sigmoid(logits);
  return {masks.slice(1, 0, 1), masks.slice(1, 1, 2)};
}

StnImpl::StnImpl() {
  int prev = 4;
  for (int filters : kEncoderFilters) {
    stages->push_back(torch::nn::Sequential(
        conv(prev, filters, 3, 2, 1),
        torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)),
        torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(1).padding(1))));
    prev = filters;
  }
  register_module("stages", stages);
  fc1 = register_module("fc1", torch::nn::Linear(kEncoderFilters.back() * 4, 256));
  fc2 = register_module("fc2", torch::nn::Linear(256, 2 * kGridPoints));
  canonical = register_buffer("canonical",
                              geometry::build_control_grid(kGridRows, kGridCols).points);
}

StnOutput StnImpl::forward(const torch::Tensor& clothes_mask, const torch::Tensor& clothes) {
  check_input(clothes_mask, 1, "stn mask");
  check_input(clothes, 3, "stn clothes");
  auto x = torch::cat({clothes_mask, clothes}, 1);
  for (const auto& stage : *stages) x = stage->as<torch::nn::SequentialImpl>()->forward(x);
  x = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions({2, 2})).flatten(1);
  auto offsets = torch::tanh(fc2(lrelu(fc1(x)))).view({-1, kGridPoints, 2});
  auto dst = canonical.unsqueeze(0) + offsets;
  return {offsets, dst, geometry::homogeneous_points(dst)};
}

torch::Tensor StnImpl::warp(const torch::Tensor& clothes, const torch::Tensor& dst) const {
  auto grid = geometry::tps_sampling_grid(canonical, dst, static_cast<int>(clothes.size(2)),
                                          static_cast<int>(clothes.size(3)));
  return geometry::apply_warp(clothes, grid, data::kPadding);
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(int in_channels) {
  auto act = [] { return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)); };
  body = register_module(
      "body", torch::nn::Sequential(conv(in_channels, 64, 4, 2, 1), act(),
                                    conv(64, 128, 4, 2, 1), instance_norm(128), act(),
                                    conv(128, 256, 4, 2, 1), instance_norm(256), act(),
                                    conv(256, 1, 3, 1, 1)));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 3) {
    throw InvalidArgument("discriminator: expected a [B,3,H,W] image batch");
  }
  return body->forward(x);
}

TryOnModelImpl::TryOnModelImpl(ModelConfig cfg) : config(cfg) {
  mpn = register_module("mpn", Mpn(config.descriptor_channels));
  stn = register_module("stn", Stn());
  clothes_encoder = register_module("clothes_encoder", Encoder(4));
  if (config.skin_encoder) skin_encoder = register_module("skin_encoder", Encoder(3));
  person_encoder = register_module("person_encoder", Encoder(3));
  decoder = register_module(
      "decoder", Decoder(std::vector<int>(kDecoderFilters.begin(), kDecoderFilters.end()),
                         std::vector<int>(kDecoderOutputs.begin(), kDecoderOutputs.end()), 3));
}

GeneratorOutput TryOnModelImpl::forward(const torch::Tensor& person, const torch::Tensor& skin,
                                        const torch::Tensor& clothes,
                                        const torch::Tensor& descriptor) {
  check_input(person, 3, "generator person");
  check_input(skin, 3, "generator skin");
  check_input(clothes, 3, "generator clothes");
  check_input(descriptor, config.descriptor_channels, "generator descriptor");
  if (skin.sizes() != person.sizes() || clothes.sizes() != person.sizes() ||
      descriptor.size(2) != person.size(2) || descriptor.size(3) != person.size(3)) {
    throw InvalidArgument("generator: inputs differ in size");
  }
  ++passes;
  const auto h = static_cast<int>(person.size(2)), w = static_cast<int>(person.size(3));

  GeneratorOutput out;
  out.masks = mpn(descriptor, clothes);
  auto placement = stn(out.masks.clothes, clothes);
  out.transform = placement.transform;
  out.warped_clothes = stn->warp(clothes, placement.dst);

  auto clothes_features = clothes_encoder(torch::cat({out.warped_clothes, out.masks.skin}, 1));
  FeaturePyramid skin_features;
  if (skin_encoder) {
    skin_features = skin_encoder(skin);
  } else {
    for (const auto& f : clothes_features) skin_features.push_back(torch::zeros_like(f));
  }
  auto person_features = person_encoder(person);
  out.image = torch::tanh(decoder->forward({clothes_features, skin_features, person_features}, h, w));
  return out;
}

std::vector<torch::Tensor> TryOnModelImpl::generator_parameters() const {
  std::vector<torch::Tensor> params;
  for (const auto& item : named_parameters(true)) {
    if (item.key().rfind("stn.", 0) != 0) params.push_back(item.value());
  }
  return params;
}

void init_weights(torch::nn::Module& module, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  torch::manual_seed(seed);
  module.apply([](torch::nn::Module& m) {
    if (auto* c = m.as<torch::nn::Conv2dImpl>()) {
      torch::nn::init::normal_(c->weight, 0.0, 0.02);
      if (c->bias.defined()) torch::nn::init::zeros_(c->bias);
    } else if (auto* l = m.as<torch::nn::LinearImpl>()) {
      torch::nn::init::normal_(l->weight, 0.0, 0.02);
      torch::nn::init::zeros_(l->bias);
    } else if (auto* n = m.as<torch::nn::InstanceNorm2dImpl>()) {
      if (n->weight.defined()) torch::nn::init::ones_(n->weight);
      if (n->bias.defined()) torch::nn::init::zeros_(n->bias);
    }
  });
  // The STN has no normalization, so its convs need fan-in scaled weights, and
  // a zero regression head makes the initial warp the identity.
  module.apply([](torch::nn::Module& m) {
    if (auto* stn = m.as<StnImpl>()) {
      for (auto& sub : stn->modules(false)) {
        if (auto* c = sub->as<torch::nn::Conv2dImpl>()) {
          torch::nn::init::kaiming_normal_(c->weight, 0.2, torch::kFanIn, torch::kLeakyReLU);
        }
      }
      torch::nn::init::kaiming_normal_(stn->fc1->weight, 0.2, torch::kFanIn, torch::kLeakyReLU);
      torch::nn::init::zeros_(stn->fc2->weight);
      torch::nn::init::zeros_(stn->fc2->bias);
    }
  });
}

TryOnModel make_model(const ModelConfig& config, std::uint64_t seed) {
  torch::manual_seed(seed);
  TryOnModel model(config);
  init_weights(*model, seed);
  return model;
}

PatchDiscriminator make_discriminator(std::uint64_t seed) {
  torch::manual_seed(seed);
  PatchDiscriminator d(3);
  init_weights(*d, seed);
  return d;
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters(true)) n += p.numel();
  return n;
}

}  // namespace dcton::nets
