import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posekit.errors import (
    DegenerateConfigurationError,
    InsufficientPointsError,
    NoConsensusError,
)
from posekit.geometry import Rotation
from posekit.umeyama import RansacConfig, solve_similarity, solve_similarity_robust


def random_similarity(rng, scale_range=(0.1, 10.0)):
    r = Rotation(rng.normal(size=4)).as_matrix()
    s = rng.uniform(*scale_range)
    t = rng.uniform(-2, 2, size=3)
    return s, r, t


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_exact_recovery(seed):
    rng = np.random.default_rng(seed)
    s, r, t = random_similarity(rng)
    src = rng.normal(size=(50, 3))
    dst = s * src @ r.T + t
    res = solve_similarity(src, dst)
    assert abs(res.scale_factor - s) < 1e-9 * s
    assert np.allclose(res.pose.rotation.as_matrix(), r, atol=1e-9)
    assert np.allclose(res.pose.translation, t, atol=1e-8)
    assert res.residual_rms < 1e-9


def test_minimal_three_points():
    src = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
    r = Rotation.from_axis_angle([0, 0, 1], 0.3).as_matrix()
    dst = 2.0 * src @ r.T + [1, 2, 3]
    res = solve_similarity(src, dst)
    assert abs(res.scale_factor - 2.0) < 1e-12


def test_size_norm_equals_scale():
    rng = np.random.default_rng(3)
    s, r, t = random_similarity(rng)
    src = rng.uniform(-0.5, 0.5, size=(100, 3))
    res = solve_similarity(src, s * src @ r.T + t)
    # per-axis size vector has norm s by construction
    assert np.isclose(np.linalg.norm(res.pose.scale), s, rtol=1e-9)


def test_reflection_is_corrected():
    rng = np.random.default_rng(5)
    src = rng.normal(size=(30, 3))
    dst = src * np.array([1.0, 1.0, -1.0])  # a pure reflection target
    res = solve_similarity(src, dst)
    assert np.isclose(np.linalg.det(res.pose.rotation.as_matrix()), 1.0)


def test_insufficient_and_mismatched():
    with pytest.raises(InsufficientPointsError):
        solve_similarity(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(InsufficientPointsError):
        solve_similarity(np.zeros((5, 3)), np.zeros((4, 3)))


def test_degenerate_configurations():
    with pytest.raises(DegenerateConfigurationError):
        solve_similarity(np.zeros((10, 3)), np.random.default_rng(0).normal(size=(10, 3)))
    line = np.outer(np.linspace(0, 1, 10), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateConfigurationError):
        solve_similarity(line, line * 2.0)


def test_noise_shrinks_with_n():
    rng = np.random.default_rng(11)
    s, r, t = random_similarity(rng, scale_range=(0.5, 2.0))
    errs = []
    for n in (30, 3000):
        src = rng.normal(size=(n, 3))
        dst = s * src @ r.T + t + rng.normal(0, 0.01, size=(n, 3))
        res = solve_similarity(src, dst)
        errs.append(np.abs(res.pose.rotation.as_matrix() - r).max())
    assert errs[1] < errs[0]


def test_ransac_rejects_outliers():
    rng = np.random.default_rng(21)
    s, r, t = random_similarity(rng, scale_range=(0.5, 2.0))
    src = rng.normal(size=(200, 3))
    dst = s * src @ r.T + t
    n_out = 60
    dst[:n_out] += rng.uniform(1.0, 3.0, size=(n_out, 3))
    res, inliers = solve_similarity_robust(src, dst)
    assert inliers.size >= 200 - n_out
    assert np.all(inliers >= n_out - 1)  # contaminated rows excluded
    assert np.allclose(res.pose.rotation.as_matrix(), r, atol=1e-6)
    assert abs(res.scale_factor - s) < 1e-6


def test_ransac_no_consensus():
    rng = np.random.default_rng(31)
    src = rng.normal(size=(40, 3))
    dst = rng.normal(size=(40, 3)) * 50.0
    with pytest.raises(NoConsensusError):
        solve_similarity_robust(src, dst, RansacConfig(iterations=32, inlier_threshold=1e-6))
