"""Relighting, optimal light schedules and trajectory metrics."""

from ._luxsched import (
    IoError,
    NumericalError,
    Sequence,
    ValidationError,
    ate_rmse,
    brute_force_ois,
    build_cost_tensors,
    clip_sensor,
    decompose_paired,
    evaluate_schedule,
    luminance_stats,
    matching_score,
    power,
    psnr,
    relight,
    solve_ois,
    ssim,
    trajectory_ratio,
    weighted_rmse,
)

__version__ = "0.1.0"
