// Procedural paper-doll renderer for the synthetic try-on set.
//
// Every body part and the shirt are laid out in the flat "template" frame of
// the in-shop clothes image. A ground-truth TPS field maps person pixels back
// into that frame, so the worn clothes are literally apply_warp(C1, field)
// and all masks and descriptors are exact.

#include <array>
#include <cmath>
#include <numbers>

#include "dcton/data.hpp"
#include "dcton/errors.hpp"
#include "dcton/geometry.hpp"
#include "dcton/image.hpp"
#include "dcton/rng.hpp"

namespace dcton::data {

namespace {

using Color = std::array<double, 3>;

// Colors are kept on the 8-bit lattice so that PNG round trips are exact.
double snap(double v01) { return std::round(std::clamp(v01, 0.0, 1.0) * 255.0) / 127.5 - 1.0; }

Color random_color(Rng& rng, double lo, double hi) {
  return {snap(rng.uniform(lo, hi)), snap(rng.uniform(lo, hi)), snap(rng.uniform(lo, hi))};
}

Color skin_tone(Rng& rng) {
  static constexpr std::array<Color, 4> kBase = {
      Color{0.96, 0.80, 0.69}, Color{0.87, 0.67, 0.53}, Color{0.70, 0.50, 0.36},
      Color{0.45, 0.31, 0.22}};
  const auto& b = kBase[rng.below(static_cast<int>(kBase.size()))];
  const double j = rng.uniform(-0.04, 0.04);
  return {snap(b[0] + j), snap(b[1] + j), snap(b[2] + j)};
}

// Shirt outline in template coordinates.
constexpr double kBodyHalfWidth = 0.55;
constexpr double kShoulderV = -0.7;
constexpr double kHemV = 0.9;
constexpr double kSleeveOuter = 0.86;
constexpr std::array<double, 3> kSleeveLength = {0.0, 0.45, 1.4};

double pixel_center(int i, int n) { return (2.0 * i + 1.0) / n - 1.0; }

bool in_neckline(double u, double v) {
  const double du = u / 0.2, dv = (v - kShoulderV) / 0.18;
  return du * du + dv * dv <= 1.0;
}

bool in_shirt(double u, double v, int sleeve) {
  if (in_neckline(u, v)) return false;
  if (std::abs(u) <= kBodyHalfWidth && v >= kShoulderV && v <= kHemV) return true;
  const double len = kSleeveLength[sleeve];
  return len > 0.0 && std::abs(u) > kBodyHalfWidth && std::abs(u) <= kSleeveOuter &&
         v >= kShoulderV && v <= kShoulderV + len;
}

struct ClothesStyle {
  int sleeve = 0;
  int pattern = 0;
  Color base{};
  Color accent{};
  double period = 0.3;
  double phase = 0.0;
};

ClothesStyle make_style(Rng& rng, int style) {
  ClothesStyle s;
  s.sleeve = style % 3;
  s.pattern = (style / 3) % 4;
  s.base = random_color(rng, 0.05, 0.85);
  s.accent = random_color(rng, 0.3, 0.95);
  s.period = rng.uniform(0.22, 0.4);
  s.phase = rng.uniform(0.0, 1.0);
  return s;
}

Color shirt_color(const ClothesStyle& s, double u, double v) {
  auto band = [&](double t) {
    return static_cast<long>(std::floor(t / s.period + s.phase)) % 2 != 0;
  };
  bool accent = false;
  switch (s.pattern) {
    case 1: accent = band(v); break;
    case 2: accent = band(u); break;
    case 3: accent = band(u) != band(v); break;
    default: break;
  }
  return accent ? s.accent : s.base;
}

/// In-shop clothes image on a white canvas. Returns [3,H,W] and the [1,H,W] alpha.
std::pair<torch::Tensor, torch::Tensor> render_clothes(const ClothesStyle& s, int h, int w) {
  auto img = torch::full({3, h, w}, kClothesBackground, torch::kFloat32);
  auto alpha = torch::zeros({1, h, w}, torch::kFloat32);
  auto ia = img.accessor<float, 3>();
  auto aa = alpha.accessor<float, 3>();
  for (int i = 0; i < h; ++i) {
    const double v = pixel_center(i, h);
    for (int j = 0; j < w; ++j) {
      const double u = pixel_center(j, w);
      if (!in_shirt(u, v, s.sleeve)) continue;
      const auto c = shirt_color(s, u, v);
      for (int ch = 0; ch < 3; ++ch) ia[ch][i][j] = static_cast<float>(c[ch]);
      aa[0][i][j] = 1.0f;
    }
  }
  return {img, alpha};
}

double capsule_dist(double u, double v, double u0, double v0, double u1, double v1) {
  const double du = u1 - u0, dv = v1 - v0;
  double t = ((u - u0) * du + (v - v0) * dv) / (du * du + dv * dv);
  t = std::clamp(t, 0.0, 1.0);
  const double eu = u - (u0 + t * du), ev = v - (v0 + t * dv);
  return std::sqrt(eu * eu + ev * ev);
}

struct Pose {
  double center_x = 0.0;  // pixels relative to the image center
  double center_y = 0.0;
  double scale_u = 1.0;  // pixels per template unit
  double scale_v = 1.0;
  double tilt = 0.0;
  double left_swing = 0.0;
  double right_swing = 0.0;
};

/// Ground-truth destination control points: a tilted, scaled torso plus jitter.
torch::Tensor pose_control_points(const Pose& pose, Rng& rng, int h, int w) {
  const auto canonical = geometry::build_control_grid(5, 5, torch::kFloat64).points;
  auto dst = torch::empty_like(canonical);
  auto src = canonical.accessor<double, 2>();
  auto out = dst.accessor<double, 2>();
  const double c = std::cos(pose.tilt), s = std::sin(pose.tilt);
  for (int64_t k = 0; k < canonical.size(0); ++k) {
    const double pu = pose.scale_u * src[k][0];
    const double pv = pose.scale_v * (src[k][1] - 0.1);
    const double px = c * pu - s * pv + pose.center_x;
    const double py = s * pu + c * pv + pose.center_y;
    out[k][0] = px / (0.5 * w) + rng.uniform(-0.035, 0.035);
    out[k][1] = py / (0.5 * h) + rng.uniform(-0.035, 0.035);
  }
  return dst;
}

}  // namespace

TryOnSample render_sample(const DatasetSpec& spec, int index) {
  spec.validate();
  if (index < 0 || index >= spec.count) {
    throw InvalidArgument("render_sample: index " + std::to_string(index) + " out of range");
  }
  const int h = spec.height, w = spec.width;
  Rng rng(spec.seed, static_cast<std::uint64_t>(index));

  Pose pose;
  pose.center_x = rng.uniform(-0.06, 0.06) * w;
  pose.center_y = rng.uniform(0.0, 0.1) * h;
  pose.scale_u = rng.uniform(0.3, 0.36) * w;
  pose.scale_v = rng.uniform(0.25, 0.29) * h;
  pose.tilt = rng.uniform(-0.1, 0.1);
  pose.left_swing = rng.uniform(-0.05, 0.3);
  pose.right_swing = rng.uniform(-0.05, 0.3);

  const int self_style = rng.below(spec.clothes_styles);
  int target_style = rng.below(spec.clothes_styles - 1);
  if (target_style >= self_style) ++target_style;
  const auto style_self = make_style(rng, self_style);
  const auto style_target = make_style(rng, target_style);

  const Color background = [&] {
    const double g = rng.uniform(0.86, 0.97);
    return Color{snap(g), snap(g + rng.uniform(-0.02, 0.02)), snap(g)};
  }();
  const Color skin = skin_tone(rng);
  const Color hair = random_color(rng, 0.05, 0.35);
  const Color pants = random_color(rng, 0.1, 0.5);

  const auto dst = pose_control_points(pose, rng, h, w);
  const auto canonical = geometry::build_control_grid(5, 5, torch::kFloat64);
  const auto field = geometry::solve_tps(canonical, {5, 5, dst}, h, w);

  auto [clothes, alpha] = render_clothes(style_self, h, w);
  auto [target, target_alpha] = render_clothes(style_target, h, w);
  (void)target_alpha;
  const auto grid32 = field.grid.to(torch::kFloat32);
  const auto worn = geometry::apply_warp(clothes, grid32);
  const auto worn_alpha = geometry::apply_warp(alpha, grid32);

  auto person = torch::empty({3, h, w}, torch::kFloat32);
  auto parse = torch::zeros({h, w}, torch::kInt64);
  auto descriptor = torch::zeros({kDescriptorChannels, h, w}, torch::kFloat32);
  auto pa = person.accessor<float, 3>();
  auto la = parse.accessor<int64_t, 2>();
  auto da = descriptor.accessor<float, 3>();
  auto fa = field.grid.accessor<double, 3>();
  auto wa = worn.accessor<float, 3>();
  auto waa = worn_alpha.accessor<float, 3>();

  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double u = fa[i][j][0], v = fa[i][j][1];
      int part = -1;
      const double hu = u / 0.36, hv = (v + 1.22) / 0.3;
      if (hu * hu + hv * hv <= 1.0) {
        part = kHead;
      } else if (std::abs(u) <= 0.15 && v >= -1.0 && v <= kShoulderV) {
        part = kTorso;  // neck
      } else if (capsule_dist(u, v, -0.7, -0.6, -0.7 - pose.left_swing, 0.75) <= 0.14) {
        part = kLeftArm;
      } else if (capsule_dist(u, v, 0.7, -0.6, 0.7 + pose.right_swing, 0.75) <= 0.14) {
        part = kRightArm;
      } else if (std::abs(u) <= kBodyHalfWidth && v >= kShoulderV && v <= kHemV) {
        part = kTorso;
      } else if (std::abs(u) <= kBodyHalfWidth && v > kHemV) {
        part = kLowerBody;
      }

      Color c = background;
      Label label = kBackground;
      if (part == kHead) {
        c = v < -1.32 ? hair : skin;
        label = kOtherBody;
      } else if (part == kLowerBody) {
        c = pants;
        label = kOtherBody;
      } else if (part >= 0) {
        if (waa[0][i][j] > 0.5f) {
          c = {wa[0][i][j], wa[1][i][j], wa[2][i][j]};
          label = kClothes;
        } else {
          c = skin;
          label = kSkin;
        }
      }
      for (int ch = 0; ch < 3; ++ch) pa[ch][i][j] = static_cast<float>(c[ch]);
      la[i][j] = label;
      if (part >= 0) {
        da[kU][i][j] = static_cast<float>(std::clamp((u + 1.0) / 2.0, 0.0, 1.0));
        da[kV][i][j] = static_cast<float>(std::clamp((v + 1.6) / 4.0, 0.0, 1.0));
        da[part][i][j] = 1.0f;
      }
    }
  }

  char id[16];
  std::snprintf(id, sizeof id, "%06d", index);
  TryOnSample sample;
  sample.id = id;
  sample.person = quantize8(person);
  sample.clothes_self = clothes;
  sample.clothes_target = target;
  sample.descriptor = descriptor;
  sample.parse = parse;
  sample.skin = extract_skin(sample.person, parse);
  sample.warp_points = dst;
  return sample;
}

}  // namespace dcton::data
