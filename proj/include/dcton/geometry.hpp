#pragma once

#include <Eigen/Dense>
#include <torch/torch.h>

namespace dcton::geometry {

/// Lattice of TPS control points in normalized [-1,1] coordinates, row-major.
struct ControlGrid {
  int rows = 0;
  int cols = 0;
  torch::Tensor points;  // [rows*cols, 2], (x, y)

  int size() const { return rows * cols; }
};

/// Backward sampling grid: output pixel (i,j) reads the source at grid[i][j].
/// Coordinates are normalized to [-1,1] with pixel centers at (2j+1)/W - 1.
struct WarpField {
  int height = 0;
  int width = 0;
  torch::Tensor grid;  // [H,W,2] or [B,H,W,2]
};

/// Homogeneous stack of destination control points, columns (x_k, y_k, 1).
struct TransformMatrix {
  torch::Tensor m;  // [3,K]

  int size() const { return static_cast<int>(m.size(-1)); }
  bool is_homogeneous(double tol = 1e-12) const;
};

struct Homography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
};

ControlGrid build_control_grid(int rows, int cols,
                               torch::ScalarType dtype = torch::kFloat32);

/// Pixel-center coordinates of an out_h x out_w image, [H,W,2].
torch::Tensor pixel_lattice(int out_h, int out_w,
                            torch::ScalarType dtype = torch::kFloat32);

/// Fits the thin-plate spline f with f(dst_k) = src_k and samples it on the
/// output pixel lattice. Throws SingularSystem for collinear or repeated
/// control points.
WarpField solve_tps(const ControlGrid& src, const ControlGrid& dst, int out_h,
                    int out_w);

/// Batched, differentiable form of solve_tps. src: [K,2], dst: [B,K,2].
/// Returns [B,H,W,2] in the dtype of dst.
torch::Tensor tps_sampling_grid(const torch::Tensor& src, const torch::Tensor& dst,
                                int out_h, int out_w);

/// Bilinear backward warp. Samples outside the source read `padding`.
/// image: [C,H,W] or [B,C,H,W]; grid: [H',W',2] or [B,H',W',2].
torch::Tensor apply_warp(const torch::Tensor& image, const torch::Tensor& grid,
                         double padding = 0.0);
torch::Tensor apply_warp(const torch::Tensor& image, const WarpField& field,
                         double padding = 0.0);

TransformMatrix to_transform_matrix(const ControlGrid& dst);
/// [...,K,2] -> [...,3,K]
torch::Tensor homogeneous_points(const torch::Tensor& points);
ControlGrid grid_from_transform(const TransformMatrix& t, int rows, int cols);

/// Unnormalized least-squares solution of min_H ||H * prev - curr||_F.
Eigen::Matrix3d solve_homography_lsq(const Eigen::MatrixXd& prev,
                                     const Eigen::MatrixXd& curr);

/// Least-squares homography mapping prev onto curr, scaled so h(2,2) = 1.
Homography estimate_homography(const TransformMatrix& prev, const TransformMatrix& curr);

/// ||H * prev - curr||^2 for the least-squares H. H is solved in closed form
/// and enters the autograd graph as a constant, so gradients flow to curr only.
torch::Tensor regularization_term(const TransformMatrix& prev, const TransformMatrix& curr);

/// Batched: prev [3,K], curr [B,3,K]; mean of the per-sample terms.
torch::Tensor regularization_term(const torch::Tensor& prev, const torch::Tensor& curr);

Eigen::MatrixXd to_eigen(const torch::Tensor& t);
torch::Tensor from_eigen(const Eigen::MatrixXd& m,
                         torch::ScalarType dtype = torch::kFloat64);

}  // namespace dcton::geometry
