#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "dcton/cli.hpp"
#include "dcton/data.hpp"
#include "dcton/errors.hpp"
#include "dcton/geometry.hpp"
#include "dcton/metrics.hpp"

namespace py = pybind11;
using namespace dcton;

namespace {

// Tensors cross the boundary as copies.
py::array to_numpy(const torch::Tensor& t) {
  const auto c = t.detach().contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  switch (c.scalar_type()) {
    case torch::kFloat32: {
      py::array_t<float> out(shape);
      std::memcpy(out.mutable_data(), c.data_ptr<float>(), c.numel() * sizeof(float));
      return out;
    }
    case torch::kFloat64: {
      py::array_t<double> out(shape);
      std::memcpy(out.mutable_data(), c.data_ptr<double>(), c.numel() * sizeof(double));
      return out;
    }
    case torch::kInt64: {
      py::array_t<std::int64_t> out(shape);
      std::memcpy(out.mutable_data(), c.data_ptr<std::int64_t>(), c.numel() * sizeof(std::int64_t));
      return out;
    }
    default:
      return to_numpy(c.to(torch::kFloat64));
  }
}

torch::Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                         torch::ScalarType dtype = torch::kFloat64) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<double*>(a.data()), shape, torch::kFloat64).clone().to(dtype);
}

Eigen::MatrixXd to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array");
  Eigen::MatrixXd m(a.shape(0), a.shape(1));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = r(i, j);
  }
  return m;
}

py::dict sample_dict(const data::TryOnSample& s) {
  py::dict d;
  d["id"] = s.id;
  d["person"] = to_numpy(s.person);
  d["clothes_self"] = to_numpy(s.clothes_self);
  d["clothes_target"] = to_numpy(s.clothes_target);
  d["descriptor"] = to_numpy(s.descriptor);
  d["parse"] = to_numpy(s.parse);
  d["skin"] = to_numpy(s.skin);
  if (s.warp_points.defined()) d["warp_points"] = to_numpy(s.warp_points);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the dcton virtual try-on package.";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<SingularSystem>(m, "SingularSystem", PyExc_ArithmeticError);
  py::register_exception<NotFound>(m, "NotFound", PyExc_FileNotFoundError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def(
      "control_grid",
      [](int rows, int cols) {
        return to_numpy(geometry::build_control_grid(rows, cols, torch::kFloat64).points);
      },
      py::arg("rows") = 5, py::arg("cols") = 5, "Canonical control points, (rows*cols, 2).");

  m.def(
      "solve_tps",
      [](py::array_t<double> src, py::array_t<double> dst, int rows, int cols, int height,
         int width) {
        const geometry::ControlGrid s{rows, cols, from_numpy(src)};
        const geometry::ControlGrid d{rows, cols, from_numpy(dst)};
        return to_numpy(geometry::solve_tps(s, d, height, width).grid);
      },
      py::arg("src"), py::arg("dst"), py::arg("rows"), py::arg("cols"), py::arg("height"),
      py::arg("width"), "Backward sampling grid (H, W, 2) with f(dst_k) = src_k.");

  m.def(
      "apply_warp",
      [](py::array_t<double> image, py::array_t<double> grid, double padding) {
        return to_numpy(geometry::apply_warp(from_numpy(image), from_numpy(grid), padding));
      },
      py::arg("image"), py::arg("grid"), py::arg("padding") = 0.0);

  m.def(
      "estimate_homography",
      [](py::array_t<double> prev, py::array_t<double> curr) {
        const auto h = geometry::estimate_homography({from_numpy(prev)}, {from_numpy(curr)});
        return to_numpy(geometry::from_eigen(h.h));
      },
      py::arg("prev"), py::arg("curr"), "3x3 homography with h[2,2] = 1.");

  m.def(
      "regularization_term",
      [](py::array_t<double> prev, py::array_t<double> curr) {
        return geometry::regularization_term(geometry::TransformMatrix{from_numpy(prev)},
                                             geometry::TransformMatrix{from_numpy(curr)})
            .item<double>();
      },
      py::arg("prev"), py::arg("curr"));

  m.def(
      "render_sample",
      [](int index, int count, int height, int width, std::uint64_t seed, int styles) {
        data::DatasetSpec spec{count, height, width, seed, styles};
        return sample_dict(data::render_sample(spec, index));
      },
      py::arg("index"), py::arg("count") = 1, py::arg("height") = 64, py::arg("width") = 48,
      py::arg("seed") = 0, py::arg("styles") = 6);

  m.def(
      "generate_dataset",
      [](const std::filesystem::path& out, int count, int height, int width, std::uint64_t seed,
         int styles) {
        return data::generate_dataset({count, height, width, seed, styles}, out);
      },
      py::arg("out"), py::arg("count"), py::arg("height") = 64, py::arg("width") = 48,
      py::arg("seed") = 0, py::arg("styles") = 6);

  m.def(
      "ssim",
      [](py::array_t<double> a, py::array_t<double> b) {
        return metrics::ssim(from_numpy(a), from_numpy(b));
      },
      py::arg("a"), py::arg("b"), "SSIM of two (3, H, W) images in [-1, 1].");

  m.def(
      "fid",
      [](py::array_t<double> a, py::array_t<double> b) {
        return metrics::fid(metrics::gaussian_stats(to_matrix(a)),
                            metrics::gaussian_stats(to_matrix(b)));
      },
      py::arg("features_a"), py::arg("features_b"), "FID between two (n, d) feature sets.");

  m.def(
      "inception_score",
      [](py::array_t<double> probs, int splits) {
        const auto s = metrics::inception_score(to_matrix(probs), splits);
        return py::make_tuple(s.mean, s.stdev);
      },
      py::arg("probs"), py::arg("splits") = 10);

  m.def(
      "evaluate_dirs",
      [](const std::filesystem::path& pred, const std::filesystem::path& ref,
         const std::string& backend, int splits) {
        const auto r = metrics::evaluate_dirs(pred, ref, metrics::make_backend(backend), splits);
        py::dict d;
        d["backend"] = r.backend;
        d["n_images"] = r.n_images;
        d["ssim_mean"] = r.ssim_mean;
        d["ssim_stdev"] = r.ssim_stdev;
        d["fid"] = r.fid;
        d["is_mean"] = r.is_mean;
        d["is_stdev"] = r.is_stdev;
        return d;
      },
      py::arg("pred_dir"), py::arg("ref_dir"), py::arg("backend") = "random-conv",
      py::arg("splits") = 10);

  m.def(
      "run",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "dcton");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        py::gil_scoped_release release;
        return cli::dispatch(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs a dcton subcommand and returns its exit code.");
}
