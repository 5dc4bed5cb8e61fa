"""Training objectives: disentangled pose loss, NOCS smooth-L1, Chamfer,
silhouette soft-IOU, deformation regularizer, and the supervised /
semi-supervised totals with indicator gating.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError
from .geometry import Intrinsics, NocsMap, Pose, project_translation, quat_to_matrix, quat_from_axis_angle
from .softrender import SoftMask

__all__ = [
    "LossWeights",
    "SymmetrySpec",
    "SampleDomain",
    "CategoryConfig",
    "rotation_pm_loss",
    "translation_scale_loss",
    "nocs_loss",
    "chamfer",
    "chamfer_mean",
    "silhouette_loss",
    "silhouette_loss_grad",
    "deformation_reg",
    "total_loss",
    "load_category_config",
]


@dataclass(frozen=True)
class LossWeights:
    """Balance parameters of the total objectives; defaults follow the
    published training configuration (0.2, 2.0, 5.0, 0.2, reg 0.01)."""

    lambda1: float = 0.2
    lambda2: float = 2.0
    lambda3: float = 5.0
    lambda4: float = 0.2
    lambda_reg: float = 0.01
    beta: float = 0.1  # smooth-L1 transition, NOCS units

    def __post_init__(self):
        vals = (self.lambda1, self.lambda2, self.lambda3, self.lambda4, self.lambda_reg, self.beta)
        if any(v < 0 for v in vals):
            raise InvalidInputError("loss weights must be >= 0")


@dataclass(frozen=True)
class SymmetrySpec:
    """Object rotational symmetry: none, or continuous about an axis
    handled by discretizing into `count` rotations."""

    axis: np.ndarray | None = None  # canonical-frame unit axis, None = no symmetry
    count: int = 64

    def __post_init__(self):
        if self.axis is not None:
            a = np.asarray(self.axis, dtype=np.float64).reshape(3)
            n = np.linalg.norm(a)
            if n < 1e-12:
                raise InvalidInputError("symmetry axis has zero norm")
            object.__setattr__(self, "axis", a / n)
            if self.count < 2:
                raise InvalidInputError("symmetry discretization needs count >= 2")

    @classmethod
    def none(cls) -> "SymmetrySpec":
        return cls(axis=None)

    def equivalent_rotations(self, count: int | None = None) -> np.ndarray:
        """(D, 3, 3) canonical-frame symmetry rotations (D=1 if none)."""
        if self.axis is None:
            return np.eye(3)[None]
        d = count if count is not None else self.count
        angles = 2.0 * np.pi * np.arange(d) / d
        return np.stack([quat_to_matrix(quat_from_axis_angle(self.axis, a)) for a in angles])


class SampleDomain(enum.Enum):
    SYNTHETIC = "synthetic"
    REAL = "real"


def rotation_pm_loss(r_pred, r_gt, model_points: np.ndarray, sym: SymmetrySpec) -> float:
    """Point-matching rotation loss, minimized over symmetry-equivalent
    ground-truth rotations (which compose with r_gt in the canonical frame).
    """
    pts = np.asarray(model_points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise InvalidInputError("model point set is empty")
    rp = r_pred.as_matrix() if hasattr(r_pred, "as_matrix") else np.asarray(r_pred)
    rg = r_gt.as_matrix() if hasattr(r_gt, "as_matrix") else np.asarray(r_gt)
    pred = pts @ rp.T
    best = np.inf
    for a in sym.equivalent_rotations():
        gt = pts @ (rg @ a).T
        best = min(best, float(np.linalg.norm(pred - gt, axis=1).mean()))
    return best


def translation_scale_loss(
    pred: dict,
    gt: dict,
    intrinsics: Intrinsics | None = None,
) -> dict:
    """L1 terms on the decoupled translation and per-axis size.

    `pred`/`gt` carry keys o_x, o_y, t_z, S; alternatively `gt` may carry
    a camera-frame translation T (with intrinsics) from which the
    decoupled ground truth is recovered.
    """

    def decoupled(d):
        if "T" in d:
            if intrinsics is None:
                raise InvalidInputError("intrinsics required to decouple T")
            o_x, o_y, t_z = project_translation(np.asarray(d["T"]), intrinsics)
        else:
            o_x, o_y, t_z = float(d["o_x"]), float(d["o_y"]), float(d["t_z"])
        if t_z <= 0:
            raise InvalidInputError("depth must be > 0")
        return o_x, o_y, t_z, np.asarray(d["S"], dtype=np.float64).reshape(3)

    ox, oy, tz, s = decoupled(pred)
    oxg, oyg, tzg, sg = decoupled(gt)
    return {
        "L_center": abs(ox - oxg) + abs(oy - oyg),
        "L_z": abs(tz - tzg),
        "L_S": float(np.abs(s - sg).sum()),
    }


def _smooth_l1(delta: np.ndarray, beta: float) -> np.ndarray:
    a = np.abs(delta)
    return np.where(a < beta, 0.5 * delta**2 / beta, a - 0.5 * beta)


def nocs_loss(pred, gt, beta: float = 0.1) -> float:
    """Smooth-L1 over all points and coordinate channels (summed)."""
    p = pred.coords if isinstance(pred, NocsMap) else np.asarray(pred, dtype=np.float64)
    g = gt.coords if isinstance(gt, NocsMap) else np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise InvalidInputError("NOCS maps are not index-aligned")
    if beta <= 0:
        raise InvalidInputError("beta must be > 0")
    return float(_smooth_l1(p - g, beta).sum())


def chamfer(x: np.ndarray, y: np.ndarray) -> float:
    """Bidirectional summed squared nearest-neighbor distance."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 3)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise InvalidInputError("chamfer needs non-empty point sets")
    d_xy, _ = cKDTree(y).query(x)
    d_yx, _ = cKDTree(x).query(y)
    return float((d_xy**2).sum() + (d_yx**2).sum())


def chamfer_mean(x: np.ndarray, y: np.ndarray) -> float:
    """Mean-normalized Chamfer (each directional sum divided by its set size)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 3)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 3)
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise InvalidInputError("chamfer needs non-empty point sets")
    d_xy, _ = cKDTree(y).query(x)
    d_yx, _ = cKDTree(x).query(y)
    return float((d_xy**2).mean() + (d_yx**2).mean())


def silhouette_loss(rendered, target) -> tuple[float, bool]:
    """Negative soft-IOU: 1 - sum(min)/sum(max).

    Returns (loss, degenerate_flag); the flag is set when both masks are
    all-zero, in which case the loss is defined as 0.
    """
    r = rendered.values if isinstance(rendered, SoftMask) else np.asarray(rendered, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if t.dtype == bool:
        t = t.astype(np.float64)
    if r.shape != t.shape:
        raise InvalidInputError("mask resolutions differ")
    union = np.maximum(r, t).sum()
    if union <= 0:
        return 0.0, True
    inter = np.minimum(r, t).sum()
    return float(1.0 - inter / union), False


def silhouette_loss_grad(rendered, target) -> tuple[float, np.ndarray]:
    """Loss and d(loss)/d(rendered) for a binary target mask."""
    r = rendered.values if isinstance(rendered, SoftMask) else np.asarray(rendered, dtype=np.float64)
    t = np.asarray(target).astype(np.float64)
    if r.shape != t.shape:
        raise InvalidInputError("mask resolutions differ")
    inter = (r * t).sum()
    union = (r + t - r * t).sum()
    if union <= 0:
        return 0.0, np.zeros_like(r)
    loss = float(1.0 - inter / union)
    grad = -(t * union - inter * (1.0 - t)) / union**2
    return loss, grad


def deformation_reg(deltas: np.ndarray) -> float:
    """Mean per-vertex deformation magnitude."""
    d = np.asarray(deltas, dtype=np.float64).reshape(-1, 3)
    if d.shape[0] < 1:
        raise InvalidInputError("deformation must have at least one vertex")
    return float(np.linalg.norm(d, axis=1).mean())


def total_loss(
    components: dict,
    weights: LossWeights = LossWeights(),
    domain: SampleDomain = SampleDomain.SYNTHETIC,
) -> tuple[float, dict]:
    """Weighted total with indicator gating of the supervised terms.

    `components` keys: pose, nocs, recon, mask, and optionally reg.
    Real-domain samples contribute only the mask (and regularizer) terms.
    """
    for k in ("pose", "nocs", "recon", "mask"):
        if k not in components:
            raise InvalidInputError(f"missing loss component '{k}'")
        if not np.isfinite(components[k]):
            raise InvalidInputError(f"loss component '{k}' is not finite")
    supervised = 1.0 if domain is SampleDomain.SYNTHETIC else 0.0
    breakdown = {
        "pose": supervised * weights.lambda1 * components["pose"],
        "nocs": supervised * weights.lambda2 * components["nocs"],
        "recon": supervised * weights.lambda3 * components["recon"],
        "mask": weights.lambda4 * components["mask"],
    }
    if "reg" in components:
        breakdown["reg"] = weights.lambda_reg * components["reg"]
    return float(sum(breakdown.values())), breakdown


@dataclass(frozen=True)
class CategoryConfig:
    weights: LossWeights = LossWeights()
    symmetries: dict = field(default_factory=dict)  # category -> SymmetrySpec

    def symmetry(self, category: str) -> SymmetrySpec:
        return self.symmetries.get(category, SymmetrySpec.none())


# default per-category symmetry: canonical up axis is +y
_DEFAULT_SYMMETRIC = ("bottle", "bowl", "can")


def default_category_config() -> CategoryConfig:
    syms = {c: SymmetrySpec(axis=np.array([0.0, 1.0, 0.0]), count=64) for c in _DEFAULT_SYMMETRIC}
    return CategoryConfig(weights=LossWeights(), symmetries=syms)


def load_category_config(path) -> CategoryConfig:
    """Parse the key-value category config.

    Format (one `key = value` per line, # comments):
        lambda1 = 0.2
        beta = 0.1
        symmetry.bottle = axis 0 1 0 64
        symmetry.mug = none
    """
    text = Path(path).read_text()
    weights = {}
    syms = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda_reg", "beta"):
            weights[key] = float(value)
        elif key.startswith("symmetry."):
            cat = key.split(".", 1)[1]
            parts = value.split()
            if parts[0] == "none":
                syms[cat] = SymmetrySpec.none()
            elif parts[0] == "axis":
                if len(parts) != 5:
                    raise InvalidInputError(f"{path}:{lineno}: axis needs 3 components + count")
                syms[cat] = SymmetrySpec(
                    axis=np.array([float(p) for p in parts[1:4]]), count=int(parts[4])
                )
            else:
                raise InvalidInputError(f"{path}:{lineno}: unknown symmetry kind '{parts[0]}'")
        else:
            raise InvalidInputError(f"{path}:{lineno}: unknown key '{key}'")
    return CategoryConfig(weights=LossWeights(**weights), symmetries=syms)
