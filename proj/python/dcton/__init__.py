"""Python bindings for the dcton virtual try-on core."""

from ._core import (
    FormatError,
    InvalidArgument,
    NotFound,
    SingularSystem,
    apply_warp,
    control_grid,
    estimate_homography,
    evaluate_dirs,
    fid,
    generate_dataset,
    inception_score,
    regularization_term,
    render_sample,
    run,
    solve_tps,
    ssim,
)

__all__ = [
    "FormatError",
    "InvalidArgument",
    "NotFound",
    "SingularSystem",
    "apply_warp",
    "control_grid",
    "estimate_homography",
    "evaluate_dirs",
    "fid",
    "generate_dataset",
    "inception_score",
    "regularization_term",
    "render_sample",
    "run",
    "solve_tps",
    "ssim",
]
