#include "../support/doctest_torch.hpp"

#include <cmath>

#include "../support/tempdir.hpp"
#include "dcton/data.hpp"
#include "dcton/errors.hpp"
#include "dcton/image.hpp"
#include "dcton/metrics.hpp"

using namespace dcton;
using namespace dcton::metrics;
using testing::TempDir;

namespace {

torch::Tensor noise(int64_t h, int64_t w, uint64_t seed) {
  torch::manual_seed(seed);
  return torch::rand({3, h, w}) * 2 - 1;
}

Eigen::MatrixXd gaussian(int n, const Eigen::VectorXd& mean, uint64_t seed) {
  torch::manual_seed(seed);
  auto t = torch::randn({n, mean.size()}, torch::kFloat64).contiguous();
  Eigen::MatrixXd m(n, mean.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < mean.size(); ++j) m(i, j) = t[i][j].item<double>() + mean(j);
  }
  return m;
}

void write_set(const std::filesystem::path& dir, const std::vector<torch::Tensor>& imgs) {
  std::filesystem::create_directories(dir);
  for (size_t i = 0; i < imgs.size(); ++i) {
    write_png(dir / (std::to_string(100 + i) + ".png"), quantize8(imgs[i]));
  }
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("ssim fixtures") {
    auto x = noise(32, 24, 1);
    CHECK(std::abs(ssim(x, x) - 1.0) < 1e-9);
    auto y = noise(32, 24, 2);
    CHECK(std::abs(ssim(x, y) - ssim(y, x)) < 1e-10);

    // Constant gray images differ only in luminance.
    const double a = -0.6;
    auto c1 = torch::full({3, 16, 16}, a), c2 = torch::full({3, 16, 16}, a + 0.5);
    const double m1 = (a + 1) / 2, m2 = (a + 1.5) / 2, k1 = 0.01 * 0.01;
    const double expect = (2 * m1 * m2 + k1) / (m1 * m1 + m2 * m2 + k1);
    CHECK(ssim(c1, c2) == doctest::Approx(expect).epsilon(1e-6));

    CHECK_THROWS_AS(ssim(x, y.slice(2, 0, 20)), InvalidArgument);
    CHECK_THROWS_AS(ssim(torch::zeros({3, 8, 8}), torch::zeros({3, 8, 8})), InvalidArgument);
  }

  TEST_CASE("ssim of independent noise is near zero") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
      CHECK(std::abs(ssim(noise(64, 64, 10 + seed), noise(64, 64, 50 + seed))) < 0.1);
    }
  }

  TEST_CASE("gaussian stats") {
    Eigen::MatrixXd same = Eigen::MatrixXd::Ones(4, 3) * 2.5;
    auto s = gaussian_stats(same);
    CHECK(s.n == 4);
    CHECK((s.mean.array() - 2.5).abs().maxCoeff() == 0.0);
    CHECK(s.cov.cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd pm(2, 3);
    pm << 1, 0, 0, -1, 0, 0;
    auto e = gaussian_stats(pm);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
    expect(0, 0) = 2.0;
    CHECK((e.cov - expect).cwiseAbs().maxCoeff() < 1e-15);

    torch::manual_seed(3);
    auto t = torch::randn({100, 5}, torch::kFloat64);
    Eigen::MatrixXd r(100, 5);
    for (int i = 0; i < 100; ++i) {
      for (int j = 0; j < 5; ++j) r(i, j) = t[i][j].item<double>();
    }
    auto g = gaussian_stats(r);
    for (int j = 0; j < 5; ++j) {
      double mu = 0.0;
      for (int i = 0; i < 100; ++i) mu += r(i, j);
      mu /= 100;
      CHECK(std::abs(g.mean(j) - mu) < 1e-12);
      for (int k = 0; k < 5; ++k) {
        double mk = 0.0, c = 0.0;
        for (int i = 0; i < 100; ++i) mk += r(i, k);
        mk /= 100;
        for (int i = 0; i < 100; ++i) c += (r(i, j) - mu) * (r(i, k) - mk);
        CHECK(std::abs(g.cov(j, k) - c / 99) < 1e-8);
      }
    }
    Eigen::MatrixXd reversed = r.colwise().reverse();
    CHECK((gaussian_stats(reversed).cov - g.cov).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(gaussian_stats(Eigen::MatrixXd::Ones(1, 3)), InvalidArgument);
  }

  TEST_CASE("fid fixtures") {
    auto a = gaussian_stats(gaussian(50, Eigen::VectorXd::Zero(4), 4));
    CHECK(std::abs(fid(a, a)) < 1e-8);

    GaussianStats p{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3), 10};
    GaussianStats q{Eigen::Vector3d(1.0, -2.0, 0.5), Eigen::MatrixXd::Identity(3, 3), 10};
    CHECK(std::abs(fid(p, q) - 5.25) < 1e-6);
    CHECK(std::abs(fid(p, q) - fid(q, p)) < 1e-12);

    GaussianStats d1{Eigen::VectorXd::Zero(2), Eigen::Vector2d(1, 4).asDiagonal(), 10};
    GaussianStats d2{Eigen::VectorXd::Zero(2), Eigen::Vector2d(9, 16).asDiagonal(), 10};
    CHECK(std::abs(fid(d1, d2) - 8.0) < 1e-9);

    GaussianStats wrong{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), 10};
    CHECK_THROWS_AS(fid(p, wrong), InvalidArgument);
  }

  TEST_CASE("inception score fixtures") {
    Eigen::MatrixXd same(6, 3);
    for (int i = 0; i < 6; ++i) same.row(i) << 0.2, 0.5, 0.3;
    CHECK(std::abs(inception_score(same, 1).mean - 1.0) < 1e-9);

    const int k = 4;
    Eigen::MatrixXd one_hot = Eigen::MatrixXd::Zero(8, k);
    for (int i = 0; i < 8; ++i) one_hot(i, i % k) = 1.0;
    CHECK(std::abs(inception_score(one_hot, 1).mean - k) < 1e-9);
    auto split = inception_score(one_hot, 2);
    CHECK(std::abs(split.mean - k) < 1e-9);
    CHECK(split.stdev < 1e-12);

    Eigen::MatrixXd two(2, 2);
    two << 1, 0, 0, 1;
    CHECK(std::abs(inception_score(two, 1).mean - 2.0) < 1e-12);

    torch::manual_seed(5);
    auto logits = torch::randn({20, 5}, torch::kFloat64).softmax(1);
    Eigen::MatrixXd p(20, 5);
    for (int i = 0; i < 20; ++i) {
      for (int j = 0; j < 5; ++j) p(i, j) = logits[i][j].item<double>();
    }
    const double base = inception_score(p, 1).mean;
    CHECK(base >= 1.0 - 1e-9);
    Eigen::MatrixXd flipped = p.colwise().reverse();
    CHECK(std::abs(inception_score(flipped, 1).mean - base) < 1e-12);

    Eigen::MatrixXd bad = p;
    bad(0, 0) += 0.1;
    CHECK_THROWS_AS(inception_score(bad, 1), InvalidArgument);
    CHECK_THROWS_AS(inception_score(p, 0), InvalidArgument);
    CHECK_THROWS_AS(inception_score(p, 21), InvalidArgument);
  }

  TEST_CASE("backend") {
    auto b = make_backend("random-conv");
    CHECK(b.name().find("random-conv") != std::string::npos);
    CHECK_THROWS_AS(make_backend("inception-v3"), InvalidArgument);
    auto imgs = torch::stack({noise(32, 32, 1), noise(32, 32, 2)});
    auto e1 = b.embedder->embed(imgs), e2 = b.embedder->embed(imgs);
    CHECK(e1.rows() == 2);
    CHECK(e1 == e2);
    auto probs = b.classifier->probabilities(imgs);
    CHECK(std::abs(probs.row(0).sum() - 1.0) < 1e-9);
  }

  TEST_CASE("directory evaluation") {
    TempDir dir;
    const data::DatasetSpec spec{12, 64, 48, 9, 6};
    std::vector<torch::Tensor> ref;
    for (int i = 0; i < spec.count; ++i) ref.push_back(data::render_sample(spec, i).person);
    write_set(dir / "ref", ref);
    auto backend = make_backend("random-conv");

    auto self = evaluate_dirs(dir / "ref", dir / "ref", backend, 2);
    CHECK(self.n_images == 12);
    CHECK(std::abs(self.ssim_mean - 1.0) < 1e-9);
    CHECK(std::abs(self.fid) < 1e-8);
    CHECK(self.csv().rfind("backend,n_images,ssim_mean,ssim_stdev,fid,is_mean,is_stdev\n", 0) == 0);

    std::filesystem::create_directories(dir / "other");
    write_png(dir / "other" / "x1.png", quantize8(ref[0]));
    write_png(dir / "other" / "x2.png", quantize8(ref[1]));
    try {
      evaluate_dirs(dir / "other", dir / "ref", backend, 2);
      FAIL("expected InvalidArgument");
    } catch (const InvalidArgument& e) {
      const std::string msg = e.what();
      CHECK(msg.find("x1") != std::string::npos);
      CHECK(msg.find("x2") != std::string::npos);
      CHECK(msg.find("100") != std::string::npos);
      CHECK(msg.find("111") != std::string::npos);
    }
    CHECK_THROWS_AS(evaluate_dirs(dir / "missing", dir / "ref", backend), NotFound);
  }

  TEST_CASE("noise raises fid") {
    const data::DatasetSpec spec{24, 64, 48, 21, 6};
    std::vector<torch::Tensor> ref;
    for (int i = 0; i < spec.count; ++i) ref.push_back(data::render_sample(spec, i).person);
    auto backend = make_backend("random-conv");
    const auto clean = evaluate_images(ref, ref, backend, 2).fid;
    for (uint64_t seed = 0; seed < 5; ++seed) {
      torch::manual_seed(seed);
      std::vector<torch::Tensor> noisy;
      for (const auto& r : ref) noisy.push_back((r + torch::randn_like(r) * 0.1).clamp(-1, 1));
      CHECK(evaluate_images(noisy, ref, backend, 2).fid > clean);
    }
  }
}
