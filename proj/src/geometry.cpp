#include "dcton/geometry.hpp"

#include <cmath>
#include <string>

#include "dcton/errors.hpp"

namespace dcton::geometry {

namespace {

// U(r) = r^2 log r^2, written so that the gradient stays finite at r = 0.
torch::Tensor tps_kernel(const torch::Tensor& sq_dist) {
  auto positive = sq_dist > 0;
  auto safe = torch::where(positive, sq_dist, torch::ones_like(sq_dist));
  return torch::where(positive, safe * torch::log(safe), torch::zeros_like(sq_dist));
}

torch::Tensor pairwise_sq_dist(const torch::Tensor& a, const torch::Tensor& b) {
  // a: [B,N,2], b: [B,K,2] -> [B,N,K]
  auto diff = a.unsqueeze(2) - b.unsqueeze(1);
  return (diff * diff).sum(-1);
}

void check_nondegenerate(const torch::Tensor& points, const char* which) {
  // points: [K,2]
  const Eigen::MatrixXd p = to_eigen(points.detach().to(torch::kFloat64).cpu());
  const auto k = p.rows();
  Eigen::MatrixXd affine(k, 3);
  affine.col(0).setOnes();
  affine.rightCols(2) = p;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(affine);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0 || s(2) / s(0) < 1e-9) {
    throw SingularSystem(std::string("TPS ") + which + " control points are collinear");
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      if ((p.row(i) - p.row(j)).squaredNorm() < 1e-20) {
        throw SingularSystem(std::string("TPS ") + which + " control points repeat");
      }
    }
  }
}

void check_grid(const ControlGrid& g, const char* which) {
  if (g.rows < 2 || g.cols < 2) {
    throw InvalidArgument(std::string(which) + " grid needs at least 2x2 points");
  }
  if (!g.points.defined() || g.points.dim() != 2 || g.points.size(0) != g.size() ||
      g.points.size(1) != 2) {
    throw InvalidArgument(std::string(which) + " grid points must be [rows*cols, 2]");
  }
}

}  // namespace

bool TransformMatrix::is_homogeneous(double tol) const {
  if (!m.defined() || m.dim() != 2 || m.size(0) != 3) return false;
  auto last = m.detach().select(0, 2).to(torch::kFloat64);
  return (last - 1.0).abs().max().item<double>() <= tol;
}

ControlGrid build_control_grid(int rows, int cols, torch::ScalarType dtype) {
  if (rows < 2 || cols < 2) {
    throw InvalidArgument("control grid needs rows >= 2 and cols >= 2, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
  }
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto ys = torch::linspace(-1.0, 1.0, rows, opts);
  auto xs = torch::linspace(-1.0, 1.0, cols, opts);
  auto mesh = torch::meshgrid({ys, xs}, "ij");
  auto points = torch::stack({mesh[1].reshape(-1), mesh[0].reshape(-1)}, 1);
  return {rows, cols, points.to(dtype)};
}

torch::Tensor pixel_lattice(int out_h, int out_w, torch::ScalarType dtype) {
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto ys = (torch::arange(out_h, opts) * 2.0 + 1.0) / out_h - 1.0;
  auto xs = (torch::arange(out_w, opts) * 2.0 + 1.0) / out_w - 1.0;
  auto mesh = torch::meshgrid({ys, xs}, "ij");
  return torch::stack({mesh[1], mesh[0]}, -1).to(dtype);
}

torch::Tensor tps_sampling_grid(const torch::Tensor& src, const torch::Tensor& dst,
                                int out_h, int out_w) {
  if (src.dim() != 2 || src.size(1) != 2) {
    throw InvalidArgument("tps: src must be [K,2]");
  }
  if (dst.dim() != 3 || dst.size(1) != src.size(0) || dst.size(2) != 2) {
    throw InvalidArgument("tps: dst must be [B,K,2] with K matching src");
  }
  const auto k = src.size(0);
  if (k < 4) throw InvalidArgument("tps: need at least 4 control points");
  if (out_h < 1 || out_w < 1) throw InvalidArgument("tps: empty output size");
  const auto batch = dst.size(0);
  for (int64_t b = 0; b < batch; ++b) check_nondegenerate(dst[b], "destination");

  const auto out_dtype = dst.scalar_type();
  auto centers = dst.to(torch::kFloat64);  // [B,K,2]
  auto values = src.to(torch::kFloat64).unsqueeze(0).expand({batch, k, 2});

  // [[U  P], [P^T 0]] [w; a] = [src; 0]
  auto kernel = tps_kernel(pairwise_sq_dist(centers, centers));  // [B,K,K]
  auto ones = torch::ones({batch, k, 1}, centers.options());
  auto p = torch::cat({ones, centers}, 2);  // [B,K,3]
  auto top = torch::cat({kernel, p}, 2);
  auto bottom = torch::cat({p.transpose(1, 2), torch::zeros({batch, 3, 3}, centers.options())}, 2);
  auto system = torch::cat({top, bottom}, 1);  // [B,K+3,K+3]
  auto rhs = torch::cat({values, torch::zeros({batch, 3, 2}, centers.options())}, 1);
  auto coeffs = torch::linalg_solve(system, rhs);  // [B,K+3,2]

  auto lattice = pixel_lattice(out_h, out_w, torch::kFloat64).reshape({1, -1, 2});
  lattice = lattice.expand({batch, lattice.size(1), 2});
  auto u = tps_kernel(pairwise_sq_dist(lattice, centers));  // [B,N,K]
  auto pl = torch::cat({torch::ones({batch, lattice.size(1), 1}, centers.options()), lattice}, 2);
  auto basis = torch::cat({u, pl}, 2);  // [B,N,K+3]
  auto mapped = torch::bmm(basis, coeffs);  // [B,N,2]
  return mapped.reshape({batch, out_h, out_w, 2}).to(out_dtype);
}

WarpField solve_tps(const ControlGrid& src, const ControlGrid& dst, int out_h, int out_w) {
  check_grid(src, "source");
  check_grid(dst, "destination");
  if (src.rows != dst.rows || src.cols != dst.cols) {
    throw InvalidArgument("tps: source and destination grids differ in shape");
  }
  check_nondegenerate(src.points, "source");
  auto grid = tps_sampling_grid(src.points, dst.points.unsqueeze(0), out_h, out_w);
  return {out_h, out_w, grid.squeeze(0)};
}

torch::Tensor apply_warp(const torch::Tensor& image, const torch::Tensor& grid, double padding) {
  const bool batched = image.dim() == 4;
  if (!batched && image.dim() != 3) {
    throw InvalidArgument("apply_warp: image must be [C,H,W] or [B,C,H,W]");
  }
  if (grid.dim() != image.dim() || grid.size(-1) != 2) {
    throw InvalidArgument("apply_warp: field must be [H,W,2] (or [B,H,W,2] for batches)");
  }
  auto img = batched ? image : image.unsqueeze(0);
  auto g = batched ? grid : grid.unsqueeze(0);
  if (g.size(0) != img.size(0)) {
    throw InvalidArgument("apply_warp: batch size of field and image differ");
  }
  g = g.to(img.scalar_type());
  namespace F = torch::nn::functional;
  auto opts = F::GridSampleFuncOptions()
                  .mode(torch::kBilinear)
                  .padding_mode(torch::kZeros)
                  .align_corners(false);
  auto out = padding == 0.0 ? F::grid_sample(img, g, opts)
                            : F::grid_sample(img - padding, g, opts) + padding;
  return batched ? out : out.squeeze(0);
}

torch::Tensor apply_warp(const torch::Tensor& image, const WarpField& field, double padding) {
  if (!field.grid.defined() || field.grid.size(-3) != field.height ||
      field.grid.size(-2) != field.width) {
    throw InvalidArgument("apply_warp: field grid does not match its declared size " +
                          std::to_string(field.height) + "x" + std::to_string(field.width));
  }
  return apply_warp(image, field.grid, padding);
}

torch::Tensor homogeneous_points(const torch::Tensor& points) {
  auto shape = points.sizes().vec();
  shape.back() = 1;
  auto ones = torch::ones(shape, points.options());
  return torch::cat({points, ones}, -1).transpose(-1, -2);
}

TransformMatrix to_transform_matrix(const ControlGrid& dst) {
  check_grid(dst, "destination");
  return {homogeneous_points(dst.points)};
}

ControlGrid grid_from_transform(const TransformMatrix& t, int rows, int cols) {
  if (t.m.dim() != 2 || t.m.size(0) != 3 || t.m.size(1) != rows * cols) {
    throw InvalidArgument("transform matrix does not hold a " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " grid");
  }
  return {rows, cols, t.m.slice(0, 0, 2).transpose(0, 1).contiguous()};
}

Eigen::Matrix3d solve_homography_lsq(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& curr) {
  if (prev.rows() != 3 || curr.rows() != 3 || prev.cols() != curr.cols()) {
    throw InvalidArgument("homography: expected two 3xK matrices of equal K");
  }
  if (prev.cols() < 4) throw InvalidArgument("homography: need K >= 4 points");
  // H = curr * pinv(prev), pinv via the thin SVD prev = U S V^T.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(prev, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0 || s(2) / s(0) < 1e-12) {
    throw SingularSystem("homography: previous transform matrix is rank deficient");
  }
  const Eigen::MatrixXd pinv =
      svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  return curr * pinv;
}

Homography estimate_homography(const TransformMatrix& prev, const TransformMatrix& curr) {
  Homography out{solve_homography_lsq(to_eigen(prev.m.detach()), to_eigen(curr.m.detach()))};
  if (std::abs(out.h(2, 2)) > 1e-8) out.h /= out.h(2, 2);
  return out;
}

torch::Tensor regularization_term(const TransformMatrix& prev, const TransformMatrix& curr) {
  const auto h = solve_homography_lsq(to_eigen(prev.m.detach()), to_eigen(curr.m.detach()));
  auto ht = from_eigen(h, curr.m.scalar_type());
  auto residual = torch::matmul(ht, prev.m.detach().to(curr.m.scalar_type())) - curr.m;
  return (residual * residual).sum();
}

torch::Tensor regularization_term(const torch::Tensor& prev, const torch::Tensor& curr) {
  if (curr.dim() != 3) throw InvalidArgument("regularization: curr must be [B,3,K]");
  std::vector<torch::Tensor> terms;
  terms.reserve(curr.size(0));
  for (int64_t b = 0; b < curr.size(0); ++b) {
    terms.push_back(regularization_term(TransformMatrix{prev}, TransformMatrix{curr[b]}));
  }
  return torch::stack(terms).mean();
}

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).cpu().contiguous();
  if (c.dim() != 2) throw InvalidArgument("to_eigen: expected a 2-D tensor");
  Eigen::MatrixXd m(c.size(0), c.size(1));
  auto acc = c.accessor<double, 2>();
  for (int64_t i = 0; i < c.size(0); ++i)
    for (int64_t j = 0; j < c.size(1); ++j) m(i, j) = acc[i][j];
  return m;
}

torch::Tensor from_eigen(const Eigen::MatrixXd& m, torch::ScalarType dtype) {
  auto t = torch::empty({m.rows(), m.cols()}, torch::kFloat64);
  auto acc = t.accessor<double, 2>();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) acc[i][j] = m(i, j);
  return t.to(dtype);
}

}  // namespace dcton::geometry
