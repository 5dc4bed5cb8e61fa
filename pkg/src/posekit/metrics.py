"""Evaluation metrics: oriented 3D-box IOU (exact polytope intersection)
and n-degree / m-cm pose accuracy aggregated into threshold tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import InvalidInputError
from .geometry import Pose, Rotation
from .losses import SymmetrySpec

__all__ = [
    "Box3D",
    "EvalRecord",
    "EvalThresholds",
    "iou3d",
    "iou3d_monte_carlo",
    "pose_error",
    "rotation_error_deg",
    "evaluate",
]

EVAL_SYMMETRY_STEPS = 360  # finer than the loss-side default, for metric precision


@dataclass(frozen=True)
class Box3D:
    """Oriented box: center (m), rotation, full side lengths (m)."""

    center: np.ndarray
    rotation: Rotation
    extents: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        e = np.asarray(self.extents, dtype=np.float64).reshape(3)
        if np.any(e <= 0):
            raise InvalidInputError("box extents must be > 0")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "extents", e)

    @classmethod
    def from_pose(cls, pose: Pose) -> "Box3D":
        return cls(pose.translation, pose.rotation, pose.scale)

    def corners(self) -> np.ndarray:
        """(8, 3) world-frame corners."""
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=np.float64,
        )
        local = 0.5 * signs * self.extents
        return local @ self.rotation.as_matrix().T + self.center

    def edges(self) -> np.ndarray:
        """(12, 2) corner index pairs (corner order from `corners`)."""
        idx = []
        for a in range(8):
            for b in range(a + 1, 8):
                if bin(a ^ b).count("1") == 1:
                    idx.append((a, b))
        return np.array(idx)

    def volume(self) -> float:
        return float(np.prod(self.extents))

    def contains(self, points: np.ndarray, atol: float = 1e-9) -> np.ndarray:
        local = (np.asarray(points).reshape(-1, 3) - self.center) @ self.rotation.as_matrix()
        return np.all(np.abs(local) <= 0.5 * self.extents + atol, axis=1)


def _clip_segments_to_box(p0: np.ndarray, p1: np.ndarray, box: Box3D) -> np.ndarray:
    """Clip segments to an oriented box; returns surviving endpoints."""
    r = box.rotation.as_matrix()
    a = (p0 - box.center) @ r
    b = (p1 - box.center) @ r
    half = 0.5 * box.extents
    d = b - a
    t0 = np.zeros(a.shape[0])
    t1 = np.ones(a.shape[0])
    alive = np.ones(a.shape[0], dtype=bool)
    for axis in range(3):
        for sign in (1.0, -1.0):
            # half-space: sign * x_axis <= half
            f = sign * a[:, axis] - half[axis]
            g = sign * d[:, axis]
            par = np.abs(g) < 1e-15
            alive &= ~(par & (f > 1e-12))
            with np.errstate(divide="ignore", invalid="ignore"):
                t_hit = -f / g
            entering = g < 0
            t0 = np.where(alive & ~par & entering, np.maximum(t0, t_hit), t0)
            t1 = np.where(alive & ~par & ~entering, np.minimum(t1, t_hit), t1)
    alive &= t0 <= t1 + 1e-12
    if not np.any(alive):
        return np.empty((0, 3))
    t0a, t1a = t0[alive], t1[alive]
    pa, da = p0[alive], (p1 - p0)[alive]
    pts = np.concatenate([pa + t0a[:, None] * da, pa + t1a[:, None] * da])
    return pts


def intersection_volume(a: Box3D, b: Box3D) -> float:
    """Exact intersection volume of two oriented boxes.

    The intersection polytope's vertices all lie on clipped box edges;
    collect them from both directions and take the hull volume.
    """
    pts = []
    for box, other in ((a, b), (b, a)):
        corners = box.corners()
        e = box.edges()
        pts.append(_clip_segments_to_box(corners[e[:, 0]], corners[e[:, 1]], other))
    pts = np.concatenate(pts)
    if pts.shape[0] < 4:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)
    except QhullError:  # degenerate (flat) intersection
        return 0.0


def iou3d(a: Box3D, b: Box3D) -> float:
    inter = intersection_volume(a, b)
    union = a.volume() + b.volume() - inter
    return inter / union if union > 0 else 0.0


def iou3d_monte_carlo(a: Box3D, b: Box3D, samples: int = 1_000_000, seed: int = 0) -> float:
    """Sampling oracle: uniform points in the union's bounding box."""
    corners = np.concatenate([a.corners(), b.corners()])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(samples, 3))
    in_a = a.contains(pts, atol=0.0)
    in_b = b.contains(pts, atol=0.0)
    bbox_vol = float(np.prod(hi - lo))
    inter = (in_a & in_b).mean() * bbox_vol
    union = a.volume() + b.volume() - inter
    return inter / union if union > 0 else 0.0


def rotation_error_deg(r_pred: Rotation, r_gt: Rotation, sym: SymmetrySpec = SymmetrySpec.none()) -> float:
    """Geodesic rotation error in degrees, symmetry-minimized."""
    rp = r_pred.as_matrix()
    rg = r_gt.as_matrix()
    best = np.inf
    for a in sym.equivalent_rotations(EVAL_SYMMETRY_STEPS if sym.axis is not None else None):
        rel = rp @ (rg @ a).T
        cos = np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)
        best = min(best, float(np.degrees(np.arccos(cos))))
    return best


def pose_error(pred: Pose, gt: Pose, sym: SymmetrySpec = SymmetrySpec.none()) -> dict:
    return {
        "rotation_deg": rotation_error_deg(pred.rotation, gt.rotation, sym),
        "translation_cm": float(np.linalg.norm(pred.translation - gt.translation) * 100.0),
    }


@dataclass(frozen=True)
class EvalRecord:
    category: str
    pred: Pose
    gt: Pose
    symmetry: SymmetrySpec = SymmetrySpec.none()


@dataclass(frozen=True)
class EvalThresholds:
    iou: tuple = (0.25, 0.5, 0.75)
    deg_cm: tuple = ((5, 2), (5, 5), (10, 2), (10, 5))


def _symmetry_min_iou(rec: EvalRecord) -> float:
    """Box IOU, maximized over symmetry-equivalent ground-truth orientations."""
    pred_box = Box3D.from_pose(rec.pred)
    if rec.symmetry.axis is None:
        return iou3d(pred_box, Box3D.from_pose(rec.gt))
    rg = rec.gt.rotation.as_matrix()
    best = 0.0
    # coarse sweep suffices: the box is near-invariant along its symmetry axis
    for a in rec.symmetry.equivalent_rotations(EVAL_SYMMETRY_STEPS // 10):
        gt_box = Box3D(rec.gt.translation, Rotation.from_matrix(rg @ a), rec.gt.scale)
        best = max(best, iou3d(pred_box, gt_box))
    return best


def evaluate(records: list, thresholds: EvalThresholds = EvalThresholds()) -> dict:
    """Per-category accuracy table plus category mean.

    Returns {category: {metric: fraction}} with an extra "mean" row
    averaged over the categories present.
    """
    if not records:
        raise InvalidInputError("no records to evaluate")
    by_cat: dict[str, list] = {}
    for rec in records:
        by_cat.setdefault(rec.category, []).append(rec)

    table: dict[str, dict[str, float]] = {}
    for cat in sorted(by_cat):
        recs = by_cat[cat]
        ious = np.array([_symmetry_min_iou(r) for r in recs])
        errs = [pose_error(r.pred, r.gt, r.symmetry) for r in recs]
        rot = np.array([e["rotation_deg"] for e in errs])
        trans = np.array([e["translation_cm"] for e in errs])
        row = {}
        for k in thresholds.iou:
            row[f"IoU@{k:g}"] = float((ious >= k).mean())
        for n, m in thresholds.deg_cm:
            row[f"{n}deg{m}cm"] = float(((rot <= n) & (trans <= m)).mean())
        table[cat] = row

    metrics = list(next(iter(table.values())).keys())
    table["mean"] = {
        met: float(np.mean([table[c][met] for c in table if c != "mean"])) for met in metrics
    }
    return table
