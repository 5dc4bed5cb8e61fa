"""Closed-form similarity-transform estimation from point correspondences.

Solves min over (s, R, T) of sum_i ||s R src_i + T - dst_i||^2 with the
SVD construction and reflection correction, plus a RANSAC wrapper for
contaminated correspondence sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, InsufficientPointsError, NoConsensusError
from .geometry import NocsMap, PointCloud, Pose, Rotation

__all__ = ["SimilarityResult", "RansacConfig", "solve_similarity", "solve_similarity_robust"]


@dataclass(frozen=True)
class SimilarityResult:
    pose: Pose
    scale_factor: float
    residual_rms: float


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 256
    sample_size: int = 4
    inlier_threshold: float = 0.01  # meters
    seed: int = 0


def _as_points(x) -> np.ndarray:
    if isinstance(x, NocsMap):
        return x.coords
    if isinstance(x, PointCloud):
        return x.points
    return np.asarray(x, dtype=np.float64).reshape(-1, 3)


def _per_axis_size(src: np.ndarray, s: float) -> np.ndarray:
    """Per-axis object size from the source tight box, diagonal-normalized."""
    extent = src.max(axis=0) - src.min(axis=0)
    diag = np.linalg.norm(extent)
    if diag < 1e-12:
        extent = np.ones(3)
        diag = np.sqrt(3.0)
    # planar sources have a zero-thickness axis; keep the size strictly
    # positive without disturbing the norm constraint below
    extent = np.maximum(extent, 1e-9 * diag)
    # scalar scale distributed so that ||size|| = s
    return s * extent / np.linalg.norm(extent)


def solve_similarity(src, dst) -> SimilarityResult:
    """Umeyama least-squares similarity transform src -> dst.

    Returns the pose (rotation, translation, per-axis size with
    ||size|| = s) and the RMS of the fit residuals.
    """
    src = _as_points(src)
    dst = _as_points(dst)
    if src.shape != dst.shape:
        raise InsufficientPointsError("src and dst must be index-aligned, same length")
    n = src.shape[0]
    if n < 3:
        raise InsufficientPointsError(f"need >= 3 correspondences, got {n}")

    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    src_c = src - mu_src
    dst_c = dst - mu_dst
    var_src = float((src_c**2).sum() / n)
    if var_src < 1e-18:
        raise DegenerateConfigurationError("source points are (near-)coincident")

    cov = dst_c.T @ src_c / n
    u, d, vt = np.linalg.svd(cov)
    if d[1] < 1e-12 * max(d[0], 1e-300):
        raise DegenerateConfigurationError("correspondences are (near-)collinear")
    sign = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    diag = np.array([1.0, 1.0, 1.0 if sign >= 0 else -1.0])
    rot = u @ np.diag(diag) @ vt
    s = float((d * diag).sum() / var_src)
    t = mu_dst - s * rot @ mu_src

    resid = s * src @ rot.T + t - dst
    rms = float(np.sqrt((resid**2).sum(axis=1).mean()))
    pose = Pose(Rotation.from_matrix(rot), t, _per_axis_size(src, s))
    return SimilarityResult(pose=pose, scale_factor=s, residual_rms=rms)


def solve_similarity_robust(src, dst, ransac: RansacConfig = RansacConfig()):
    """RANSAC-wrapped Umeyama; returns (SimilarityResult, inlier index array)."""
    src = _as_points(src)
    dst = _as_points(dst)
    n = src.shape[0]
    if n < ransac.sample_size:
        raise InsufficientPointsError(
            f"need >= {ransac.sample_size} correspondences, got {n}"
        )
    rng = np.random.default_rng(ransac.seed)

    best_inliers: np.ndarray | None = None
    for _ in range(ransac.iterations):
        idx = rng.choice(n, size=ransac.sample_size, replace=False)
        try:
            model = solve_similarity(src[idx], dst[idx])
        except (DegenerateConfigurationError, InsufficientPointsError):
            continue
        s = model.scale_factor
        r = model.pose.rotation.as_matrix()
        resid = np.linalg.norm(s * src @ r.T + model.pose.translation - dst, axis=1)
        inliers = np.nonzero(resid <= ransac.inlier_threshold)[0]
        if best_inliers is None or inliers.size > best_inliers.size:
            best_inliers = inliers

    if best_inliers is None or best_inliers.size < ransac.sample_size:
        raise NoConsensusError("no model with enough inliers")
    refit = solve_similarity(src[best_inliers], dst[best_inliers])
    return refit, best_inliers
