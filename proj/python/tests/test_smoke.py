import math

import numpy as np
import pytest

import luxsched as ls


def random_decomposition(rng, h=12, w=16):
    ambient = rng.uniform(0.0, 0.5, (h, w, 3))
    light = rng.uniform(0.0, 1.0, (h, w))
    return ambient, light, [0.5, 0.3, 0.2]


def test_relight_and_decompose_round_trip():
    rng = np.random.default_rng(0)
    ambient, light, color = random_decomposition(rng)
    assert np.array_equal(ls.relight(ambient, light, color, 0.0), ambient)
    i1 = ls.relight(ambient, light, color, 0.25)
    i2 = ls.relight(ambient, light, color, 0.75)
    a, s, c = ls.decompose_paired(i1, 0.25, i2, 0.75)
    assert np.allclose(c, color, atol=1e-9)
    assert np.allclose(a, ambient, atol=1e-9)
    assert ls.psnr(ls.relight(a, s, c, 0.25), i1) > 60


def test_errors_map_to_python_exceptions():
    img = np.zeros((8, 8, 3))
    with pytest.raises(ValueError):
        ls.decompose_paired(img, 0.5, img, 0.5)
    with pytest.raises(ls.ValidationError):
        ls.psnr(img, np.zeros((8, 9, 3)))
    with pytest.raises(ArithmeticError):
        ls.solve_ois(np.array([[0.0, np.nan]]), np.zeros((0, 2, 2)))


def test_metrics():
    img = np.full((10, 10, 3), 0.3)
    assert math.isinf(ls.psnr(img, img))
    assert ls.psnr(img, img + 0.1) == pytest.approx(20.0)
    assert ls.ssim(img, img) == pytest.approx(1.0)
    st = ls.luminance_stats(np.ones((4, 4, 3)))
    assert st["saturated_fraction"] == 1.0
    assert np.all(ls.clip_sensor(np.full((2, 2, 3), 1.5)) == 1.0)
    assert ls.power(0.0) == 9.5455
    assert abs(ls.power(0.62) - 22.79) < 0.15


def test_dp_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        t, k = rng.integers(1, 7), rng.integers(1, 4)
        unary = rng.uniform(size=(t, k))
        pairwise = rng.uniform(size=(t - 1, k, k))
        dp = ls.solve_ois(unary, pairwise)
        bf = ls.brute_force_ois(unary, pairwise)
        assert dp["assignment"] == bf["assignment"]
        assert dp["total_energy"] == bf["total_energy"]
        assert ls.evaluate_schedule(unary, pairwise, dp["assignment"]) == dp["total_energy"]


def test_cost_tensors_from_frames():
    rng = np.random.default_rng(2)
    frames = rng.uniform(0.2, 0.8, (3, 2, 32, 32, 3))
    unary, pairwise = ls.build_cost_tensors(frames, lambda_d=0, lambda_p=1, lambda_m=0, lambda_s=0, grid=[0.0, 1.0])
    assert unary.shape == (3, 2) and pairwise.shape == (2, 2, 2)
    assert np.allclose(unary[:, 1], ls.power(1.0))
    assert np.all(pairwise == 0)
    m = ls.matching_score(frames[0, 0], frames[1, 1])
    assert 0.0 < m <= 1.0 and m == ls.matching_score(frames[1, 1], frames[0, 0])
    assert ls.matching_score(frames[0, 0], np.ones((32, 32, 3))) == 0.0


def test_trajectory_metrics():
    c = ls.trajectory_ratio(50, 100)
    assert c == 0.5
    assert ls.weighted_rmse(0.236, c) == pytest.approx(0.944, abs=1e-3)
    gt = np.random.default_rng(3).uniform(size=(10, 2))
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert ls.ate_rmse(gt, gt @ rot.T + [2.0, -1.0]) < 1e-12


def test_sequence():
    seq = ls.Sequence.harsh(1)
    assert seq.length == 60 and seq.poses.shape == (60, 3)
    frame = seq.render(0, 0.5)
    assert frame.shape == (96, 128, 3) and frame.min() >= 0.0 and frame.max() <= 1.0
    assert np.array_equal(frame, ls.Sequence.harsh(1).render(0, 0.5))
