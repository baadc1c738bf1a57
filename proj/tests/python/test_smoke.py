import numpy as np
import pytest

import dcton


def test_control_grid_corners():
    g = dcton.control_grid(5, 5)
    assert g.shape == (25, 2)
    assert np.allclose(g[0], [-1.0, -1.0])
    assert np.allclose(g[-1], [1.0, 1.0])


def test_identity_tps_is_pixel_lattice():
    g = dcton.control_grid()
    field = dcton.solve_tps(g, g, 5, 5, 8, 6)
    assert field.shape == (8, 6, 2)
    xs = (2 * np.arange(6) + 1) / 6 - 1
    ys = (2 * np.arange(8) + 1) / 8 - 1
    assert np.allclose(field[..., 0], np.broadcast_to(xs, (8, 6)), atol=1e-9)
    assert np.allclose(field[..., 1], np.broadcast_to(ys[:, None], (8, 6)), atol=1e-9)


def test_identity_warp():
    rng = np.random.default_rng(0)
    img = rng.uniform(-1, 1, (3, 8, 6))
    g = dcton.control_grid()
    out = dcton.apply_warp(img, dcton.solve_tps(g, g, 5, 5, 8, 6))
    assert np.abs(out - img).max() < 1e-9


def test_homography_recovery():
    g = dcton.control_grid()
    prev = np.vstack([g.T, np.ones(25)])
    h = np.array([[1.05, 0.02, 0.1], [-0.03, 0.97, -0.2], [0.0, 0.0, 1.0]])
    curr = h @ prev
    assert np.abs(dcton.estimate_homography(prev, curr) - h).max() < 1e-9
    assert dcton.regularization_term(prev, curr) < 1e-12


def test_collinear_points_raise():
    pts = np.stack([np.linspace(-1, 1, 4), np.zeros(4)], axis=1)
    with pytest.raises(ArithmeticError):
        dcton.solve_tps(pts, pts, 2, 2, 8, 8)


def test_render_sample():
    s = dcton.render_sample(0, count=2, seed=3)
    assert s["person"].shape == (3, 64, 48)
    assert s["descriptor"].shape == (7, 64, 48)
    assert s["person"].min() >= -1 and s["person"].max() <= 1
    again = dcton.render_sample(0, count=2, seed=3)
    assert np.array_equal(s["person"], again["person"])
    with pytest.raises(ValueError):
        dcton.render_sample(0, height=40)


def test_metrics():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, (3, 32, 32))
    assert abs(dcton.ssim(x, x) - 1.0) < 1e-9
    a = rng.normal(size=(50, 4))
    assert abs(dcton.fid(a, a)) < 1e-8
    mean, stdev = dcton.inception_score(np.eye(4), splits=1)
    assert abs(mean - 4.0) < 1e-9 and stdev == 0.0


def test_dataset_and_cli(tmp_path):
    ids = dcton.generate_dataset(tmp_path / "data", 3, seed=1)
    assert ids == ["000000", "000001", "000002"]
    person = tmp_path / "data" / "person"
    report = dcton.evaluate_dirs(person, person, splits=1)
    assert report["n_images"] == 3
    assert abs(report["ssim_mean"] - 1.0) < 1e-9
    assert dcton.run(["--help"]) == 0
    assert dcton.run(["no-such-command"]) == 2
    assert dcton.run(["eval", "--pred", str(tmp_path / "x"), "--ref", str(person)]) == 1
    with pytest.raises(FileNotFoundError):
        dcton.evaluate_dirs(tmp_path / "missing", person)
