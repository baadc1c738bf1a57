#pragma once

// Reference computations written independently of the library code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

namespace oracle {

/// Textbook TPS with U(r) = r^2 log r, solved densely with LU.
/// Maps `dst` points onto `src` values and evaluates at `probe`.
inline Eigen::Vector2d tps_eval(const Eigen::MatrixXd& src, const Eigen::MatrixXd& dst,
                                const Eigen::Vector2d& probe) {
  const auto k = dst.rows();
  auto u = [](double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; };
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k + 3, k + 3);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(k + 3, 2);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) a(i, j) = u((dst.row(i) - dst.row(j)).norm());
    a(i, k) = a(k, i) = 1.0;
    a(i, k + 1) = a(k + 1, i) = dst(i, 0);
    a(i, k + 2) = a(k + 2, i) = dst(i, 1);
    b.row(i) = src.row(i);
  }
  const Eigen::MatrixXd coef = a.fullPivLu().solve(b);
  Eigen::Vector2d out = coef.row(k).transpose() + coef.row(k + 1).transpose() * probe(0) +
                        coef.row(k + 2).transpose() * probe(1);
  for (Eigen::Index i = 0; i < k; ++i) {
    out += coef.row(i).transpose() * u((probe.transpose() - dst.row(i)).norm());
  }
  return out;
}

/// H = curr prev^T (prev prev^T)^-1
inline Eigen::Matrix3d homography_normal_equations(const Eigen::MatrixXd& prev,
                                                   const Eigen::MatrixXd& curr) {
  const Eigen::Matrix3d gram = prev * prev.transpose();
  return (curr * prev.transpose()) * gram.inverse();
}

inline double residual(const Eigen::Matrix3d& h, const Eigen::MatrixXd& prev,
                       const Eigen::MatrixXd& curr) {
  return (h * prev - curr).squaredNorm();
}

/// Central finite differences of a scalar function against autograd.
/// Returns ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||, floor) over all inputs.
/// With `max_per_input` > 0 only an evenly strided subset of each input is probed.
using ScalarFn = std::function<torch::Tensor(const std::vector<torch::Tensor>&)>;

inline double gradient_error(const ScalarFn& f, std::vector<torch::Tensor> inputs,
                             double eps = 1e-6, double floor = 1e-8, int64_t max_per_input = 0) {
  for (auto& x : inputs) x = x.detach().to(torch::kFloat64).contiguous().clone().requires_grad_(true);
  auto y = f(inputs);
  auto grads = torch::autograd::grad({y}, inputs, {}, false, false, true);
  double num = 0.0, auto_norm = 0.0, fd_norm = 0.0;
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto g = grads[i].defined() ? grads[i] : torch::zeros_like(inputs[i]);
    auto flat = inputs[i].view(-1);
    auto ga = g.reshape(-1);
    const int64_t n = flat.numel();
    const int64_t stride = max_per_input > 0 ? std::max<int64_t>(1, n / max_per_input) : 1;
    for (int64_t j = 0; j < n; j += stride) {
      const double orig = flat[j].item<double>();
      flat[j] = orig + eps;
      const double up = f(inputs).item<double>();
      flat[j] = orig - eps;
      const double down = f(inputs).item<double>();
      flat[j] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double a = ga[j].item<double>();
      num += (a - fd) * (a - fd);
      auto_norm += a * a;
      fd_norm += fd * fd;
    }
  }
  const double denom = std::max({std::sqrt(auto_norm), std::sqrt(fd_norm), floor});
  return std::sqrt(num) / denom;
}

}  // namespace oracle
