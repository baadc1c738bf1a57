#include "../support/doctest_torch.hpp"

#include <cmath>

#include "../support/oracles.hpp"
#include "dcton/errors.hpp"
#include "dcton/geometry.hpp"
#include "dcton/losses.hpp"

using namespace dcton;
using namespace dcton::losses;

namespace {

torch::Tensor rnd(std::vector<int64_t> shape, uint64_t seed) {
  torch::manual_seed(seed);
  return torch::rand(shape, torch::kFloat64) * 2 - 1;
}

torch::Tensor unit(std::vector<int64_t> shape, uint64_t seed) {
  torch::manual_seed(seed);
  return torch::rand(shape, torch::kFloat64);
}

// Plain loops over contiguous double buffers.
std::vector<double> values(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat64).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

double mean_abs_diff(const torch::Tensor& a, const torch::Tensor& b) {
  auto x = values(a), y = values(b);
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
  auto v = values(t);
  Eigen::MatrixXd m(t.size(0), t.size(1));
  for (int64_t r = 0; r < t.size(0); ++r) {
    for (int64_t c = 0; c < t.size(1); ++c) m(r, c) = v[r * t.size(1) + c];
  }
  return m;
}

torch::Tensor random_transform(uint64_t seed, double jitter) {
  auto grid = geometry::build_control_grid(5, 5, torch::kFloat64);
  torch::manual_seed(seed);
  auto pts = grid.points + torch::randn({25, 2}, torch::kFloat64) * jitter;
  return geometry::homogeneous_points(pts);
}

}  // namespace

TEST_SUITE("losses") {
  TEST_CASE("stn loss examples") {
    auto person = rnd({1, 3, 8, 8}, 1);
    auto mask = (unit({1, 1, 8, 8}, 2) > 0.3).to(torch::kFloat64);
    auto t = random_transform(3, 0.05);
    auto zero = stn_pretrain_loss(person * mask, person, mask, t, t);
    CHECK(std::abs(zero.appearance.item<double>()) < 1e-12);
    CHECK(zero.regularization.item<double>() < 1e-12);
    CHECK(zero.total.item<double>() < 1e-12);

    auto full = torch::ones({1, 1, 8, 8}, torch::kFloat64);
    auto shifted = stn_pretrain_loss(person + 0.2, person, full, t, t);
    CHECK(shifted.appearance.item<double>() == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(stn_pretrain_loss(person, person, full, t, random_transform(4, 0.05), false)
              .regularization.item<double>() == 0.0);
    CHECK_THROWS_AS(appearance_loss(person, person.slice(3, 0, 4), full), InvalidArgument);
  }

  TEST_CASE("stn loss against direct formula") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
      auto warped = rnd({3, 8, 8}, 10 + seed), person = rnd({3, 8, 8}, 20 + seed);
      auto mask = unit({1, 8, 8}, 30 + seed) * (unit({1, 8, 8}, 40 + seed) > 0.4);
      auto prev = random_transform(50 + seed, 0.05), curr = random_transform(60 + seed, 0.05);
      auto got = stn_pretrain_loss(warped, person, mask, prev, curr);

      auto w = values(warped), p = values(person), m = values(mask);
      double sum = 0.0, count = 0.0;
      for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 64; ++i) {
          if (m[i] <= 0) continue;
          sum += std::abs(w[c * 64 + i] - p[c * 64 + i] * m[i]);
          count += 1;
        }
      }
      const auto pe = to_eigen(prev), ce = to_eigen(curr);
      const double rb = oracle::residual(oracle::homography_normal_equations(pe, ce), pe, ce);
      CHECK(got.appearance.item<double>() == doctest::Approx(sum / count).epsilon(1e-9));
      CHECK(std::abs(got.regularization.item<double>() - rb) < 1e-6);
      CHECK(std::abs(got.total.item<double>() - (sum / count + rb)) < 1e-6);
    }
  }

  TEST_CASE("adversarial closed forms") {
    auto zero = torch::zeros({1, 1, 8, 8}, torch::kFloat64);
    auto loss = adversarial_loss({zero, zero, zero, zero, zero, zero});
    const double l2 = std::log(2.0);
    CHECK(loss.generator.item<double>() == doctest::Approx(4 * l2).epsilon(1e-12));
    // Two (real, fake) pairs per discriminator, 2 log 2 each.
    CHECK(loss.person_disc.item<double>() == doctest::Approx(2 * 2 * l2).epsilon(1e-12));
    CHECK(loss.skin_disc.item<double>() == doctest::Approx(2 * 2 * l2).epsilon(1e-12));

    auto hi = torch::full({1, 1, 8, 8}, 1e6, torch::kFloat64), lo = -hi;
    auto perfect = adversarial_loss({lo, lo, lo, lo, hi, hi});
    CHECK(perfect.person_disc.item<double>() < 1e-9);
    CHECK(perfect.skin_disc.item<double>() < 1e-9);
    CHECK(std::isfinite(perfect.generator.item<double>()));
    CHECK(perfect.generator.item<double>() == doctest::Approx(4 * 30.0).epsilon(1e-9));

    auto gen_only = adversarial_loss({zero, zero, zero, zero, {}, {}});
    CHECK(!gen_only.person_disc.defined());
    CHECK(gen_only.generator.item<double>() == doctest::Approx(4 * l2));
  }

  TEST_CASE("adversarial against direct formula") {
    std::vector<torch::Tensor> s;
    for (uint64_t k = 0; k < 6; ++k) s.push_back(rnd({2, 1, 4, 4}, 70 + k) * 3);
    auto loss = adversarial_loss({s[0], s[1], s[2], s[3], s[4], s[5]});
    auto mean_sp = [](const torch::Tensor& t, double sign) {
      double acc = 0.0;
      auto v = values(t);
      for (double x : v) acc += softplus(sign * x);
      return acc / static_cast<double>(v.size());
    };
    const double gen = mean_sp(s[0], -1) + mean_sp(s[1], -1) + mean_sp(s[2], -1) + mean_sp(s[3], -1);
    const double dp = 2 * mean_sp(s[4], -1) + mean_sp(s[0], 1) + mean_sp(s[1], 1);
    const double ds = 2 * mean_sp(s[5], -1) + mean_sp(s[2], 1) + mean_sp(s[3], 1);
    CHECK(loss.generator.item<double>() == doctest::Approx(gen).epsilon(1e-12));
    CHECK(loss.person_disc.item<double>() == doctest::Approx(dp).epsilon(1e-12));
    CHECK(loss.skin_disc.item<double>() == doctest::Approx(ds).epsilon(1e-12));
  }

  TEST_CASE("cycle loss") {
    auto a = rnd({1, 3, 4, 4}, 80), b = rnd({1, 3, 4, 4}, 81);
    auto c = rnd({1, 3, 4, 4}, 82), d = rnd({1, 3, 4, 4}, 83);
    CHECK(cycle_loss(a, a, c, c).item<double>() == 0.0);
    CHECK(cycle_loss(a + 0.3, a, c, c).item<double>() == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(std::abs(cycle_loss(a, b, c, d).item<double>() -
                   (mean_abs_diff(a, b) + mean_abs_diff(c, d))) < 1e-7);
    CHECK(cycle_loss(a, b, c, d).item<double>() == cycle_loss(b, a, d, c).item<double>());
    CHECK_THROWS_AS(cycle_loss(a, b.slice(2, 0, 2), c, d), InvalidArgument);
  }

  TEST_CASE("content preserving loss") {
    auto i1 = rnd({1, 3, 4, 4}, 90), i2 = rnd({1, 3, 4, 4}, 91), back = rnd({1, 3, 4, 4}, 92);
    auto skin = unit({1, 1, 4, 4}, 93);
    CHECK(content_preserving_loss(i2, back, i1, skin, 1 - skin).item<double>() < 1e-15);
    auto zeros = torch::zeros({1, 1, 4, 4}, torch::kFloat64);
    CHECK(content_preserving_loss(i1, i1 + 0.1, i1, zeros, zeros).item<double>() ==
          doctest::Approx(0.1).epsilon(1e-12));

    auto clothes = unit({1, 1, 4, 4}, 94) * 0.8;
    auto got = content_preserving_loss(i2, back, i1, skin, clothes).item<double>();
    auto s = values(skin), c = values(clothes), x1 = values(i1), x2 = values(i2), xb = values(back);
    double acc = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      for (int i = 0; i < 16; ++i) {
        const double m = std::clamp(1.0 - s[i] - c[i], 0.0, 1.0);
        acc += std::abs(m * (x2[ch * 16 + i] - x1[ch * 16 + i])) +
               std::abs(m * (xb[ch * 16 + i] - x1[ch * 16 + i]));
      }
    }
    CHECK(std::abs(got - acc / 48.0) < 1e-7);
  }

  TEST_CASE("perceptual loss") {
    IdentityExtractor id;
    auto x = rnd({1, 3, 8, 8}, 100), y = rnd({1, 3, 8, 8}, 101);
    auto ones = torch::ones({1, 1, 8, 8}, torch::kFloat64);
    CHECK(perceptual_loss(id, x, x, ones, y, y, ones).item<double>() == 0.0);
    CHECK(perceptual_loss(id, x + 0.5, x, ones, y - 0.5, y, ones).item<double>() ==
          doctest::Approx(1.0).epsilon(1e-12));

    RandomConvExtractor conv(5, {4, 6}, 3);
    auto m1 = unit({1, 1, 8, 8}, 102), m2 = unit({1, 1, 8, 8}, 103);
    auto c2 = rnd({1, 3, 8, 8}, 104), c1 = rnd({1, 3, 8, 8}, 105);
    const double got = perceptual_loss(conv, c2, x, m1, c1, y, m2).item<double>();
    const auto fa = conv.features(c2), fb = conv.features(m1 * x);
    const auto fc = conv.features(c1), fd = conv.features(m2 * y);
    double expect = 0.0;
    for (size_t l = 0; l < fa.size(); ++l) {
      const double whc = static_cast<double>(fa[l].size(1) * fa[l].size(2) * fa[l].size(3));
      auto a = values(fa[l]), b = values(fb[l]), c = values(fc[l]), d = values(fd[l]);
      double s1 = 0.0, s2 = 0.0;
      for (size_t i = 0; i < a.size(); ++i) {
        s1 += std::abs(a[i] - b[i]);
        s2 += std::abs(c[i] - d[i]);
      }
      expect += (s1 + s2) / whc;
    }
    CHECK(fa.size() == 2);
    CHECK(std::abs(got - expect) < 1e-6);
  }

  TEST_CASE("mpn mask loss") {
    auto c = unit({2, 1, 4, 4}, 110), s = unit({2, 1, 4, 4}, 111);
    CHECK(mpn_mask_loss({c, s}, {c, s}).item<double>() == 0.0);
    auto ones = torch::ones({2, 1, 4, 4}, torch::kFloat64);
    CHECK(mpn_mask_loss({1 - ones, s}, {ones, s}).item<double>() == 1.0);
    auto c2 = unit({2, 1, 4, 4}, 112), s2 = unit({2, 1, 4, 4}, 113);
    CHECK(std::abs(mpn_mask_loss({c, s}, {c2, s2}).item<double>() -
                   (mean_abs_diff(c, c2) + mean_abs_diff(s, s2))) < 1e-7);
  }

  TEST_CASE("total loss") {
    LambdaConfig l;
    CHECK(l.lambda_cyc == 10.0);
    CHECK(total_loss(0.0, 0.0, 0.0, 0.0, l) == 0.0);
    CHECK(total_loss(1.0, 0.1, 0.1, 0.1, l) == doctest::Approx(4.0).epsilon(1e-15));
    LossReport r;
    r.adv = 0.7;
    r.cyc = 0.11;
    r.vgg = 0.23;
    r.pre = 0.05;
    r.mpn = 9.0;
    CHECK(total_loss(r, l) == 0.7 + 10.0 * 0.11 + 10.0 * 0.23 + 10.0 * 0.05);
    LambdaConfig doubled{20.0, 10.0, 10.0};
    CHECK(total_loss(r, doubled) - total_loss(r, l) == doctest::Approx(10.0 * r.cyc));
    LambdaConfig negative{-1.0, 10.0, 10.0};
    CHECK_THROWS_AS(negative.validate(), InvalidArgument);
  }

  TEST_CASE("loss gradients match finite differences") {
    RandomConvExtractor conv(5, {4, 6}, 3);
    for (uint64_t seed = 0; seed < 3; ++seed) {
      auto base = 200 + 10 * seed;
      auto far = [&](uint64_t k) { return rnd({1, 3, 8, 8}, base + k); };
      auto mask = unit({1, 1, 8, 8}, base + 9);
      auto prev = random_transform(base + 8, 0.05);

      CHECK(oracle::gradient_error(
                [&](const std::vector<torch::Tensor>& in) {
                  return stn_pretrain_loss(in[0], in[1], mask, prev, in[2]).total;
                },
                {far(0), far(1), random_transform(base + 7, 0.05)}) < 1e-3);
      CHECK(oracle::gradient_error(
                [&](const std::vector<torch::Tensor>& in) {
                  auto a = adversarial_loss({in[0], in[1], in[2], in[3], in[4], in[5]});
                  return a.generator + a.person_disc + a.skin_disc;
                },
                {far(0) * 3, far(1) * 3, far(2) * 3, far(3) * 3, far(4) * 3, far(5) * 3}) < 1e-3);
      CHECK(oracle::gradient_error(
                [](const std::vector<torch::Tensor>& in) {
                  return cycle_loss(in[0], in[1], in[2], in[3]);
                },
                {far(0), far(1), far(2), far(3)}) < 1e-3);
      CHECK(oracle::gradient_error(
                [](const std::vector<torch::Tensor>& in) {
                  return content_preserving_loss(in[0], in[1], in[2], in[3] * 0.4, in[4] * 0.4);
                },
                {far(0), far(1), far(2), mask, unit({1, 1, 8, 8}, base + 6)}) < 1e-3);
      CHECK(oracle::gradient_error(
                [&](const std::vector<torch::Tensor>& in) {
                  return perceptual_loss(conv, in[0], in[1], in[2], in[3], in[4], in[5]);
                },
                {far(0), far(1), mask, far(3), far(4), unit({1, 1, 8, 8}, base + 5)}) < 1e-3);
      CHECK(oracle::gradient_error(
                [](const std::vector<torch::Tensor>& in) {
                  return mpn_mask_loss({in[0], in[1]}, {in[2], in[3]});
                },
                {mask, mask * 0.5, unit({1, 1, 8, 8}, base + 4), unit({1, 1, 8, 8}, base + 3)}) <
            1e-3);
    }
  }
}
