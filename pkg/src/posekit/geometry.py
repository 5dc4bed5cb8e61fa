"""Core 3D types, pinhole camera model, and depth back-projection.

Conventions: camera looks down +z, image u is the column axis and v the
row axis, depth images are 16-bit millimeters, world units are meters.
Quaternions are scalar-first (w, x, y, z) and kept unit-norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyForegroundError, InvalidInputError

__all__ = [
    "Rotation",
    "Pose",
    "Intrinsics",
    "PointCloud",
    "NocsMap",
    "quat_to_matrix",
    "quat_multiply",
    "quat_from_axis_angle",
    "backproject",
    "project_points",
    "decouple_translation",
    "project_translation",
    "transform_points",
]


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion, scalar-first (w, x, y, z)."""

    quaternion: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.quaternion, dtype=np.float64).reshape(4)
        if not np.all(np.isfinite(q)):
            raise InvalidInputError("quaternion has non-finite entries")
        norm = float(np.linalg.norm(q))
        if norm < 1e-12:
            raise InvalidInputError("quaternion has (near-)zero norm")
        object.__setattr__(self, "quaternion", q / norm)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_axis_angle(cls, axis, angle_rad: float) -> "Rotation":
        return cls(quat_from_axis_angle(axis, angle_rad))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Rotation":
        return cls(matrix_to_quat(m))

    def as_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.quaternion)

    def compose(self, other: "Rotation") -> "Rotation":
        """self ∘ other: apply `other` first, then `self`."""
        return Rotation(quat_multiply(self.quaternion, other.quaternion))

    def inverse(self) -> "Rotation":
        w, x, y, z = self.quaternion
        return Rotation(np.array([w, -x, -y, -z]))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.as_matrix().T


@dataclass(frozen=True)
class Pose:
    """Object pose: rotation, translation (m) and per-axis size (m).

    The similarity transform this pose induces uses the scalar scale
    s = ||scale||_2, matching the convention that canonical-space meshes
    have unit tight-box diagonal.
    """

    rotation: Rotation
    translation: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        s = np.asarray(self.scale, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(s))):
            raise InvalidInputError("pose has non-finite entries")
        if np.any(s <= 0):
            raise InvalidInputError("scale components must be > 0")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", s)

    @classmethod
    def identity(cls) -> "Pose":
        # unit-diagonal cube: per-axis size 1/sqrt(3) gives |scale| = 1
        return cls(Rotation.identity(), np.zeros(3), np.full(3, 1.0 / np.sqrt(3.0)))

    @property
    def scale_factor(self) -> float:
        """Scalar similarity scale s = ||scale||_2."""
        return float(np.linalg.norm(self.scale))


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be > 0")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise InvalidInputError("principal point outside image")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class PointCloud:
    """N x 3 points in meters, camera frame; optional per-point colors in [0,1].

    `pixels` optionally records the (u, v) source pixel of each point so
    index-aligned per-pixel maps (e.g. NOCS) can be gathered later.
    """

    points: np.ndarray
    colors: np.ndarray | None = None
    pixels: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if p.shape[0] < 1:
            raise InvalidInputError("point cloud must contain at least one point")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("point cloud has non-finite entries")
        object.__setattr__(self, "points", p)
        if self.colors is not None:
            c = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
            if c.shape[0] != p.shape[0]:
                raise InvalidInputError("colors not aligned with points")
            if not np.all(np.isfinite(c)) or c.min() < 0 or c.max() > 1:
                raise InvalidInputError("colors must be finite and in [0,1]")
            object.__setattr__(self, "colors", c)
        if self.pixels is not None:
            object.__setattr__(
                self, "pixels", np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
            )

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class NocsMap:
    """Per-point canonical-space coordinates, index-aligned with a PointCloud.

    Coordinates are clamped into the canonical bound [-1, 1] on load.
    """

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(c)):
            raise InvalidInputError("NOCS coordinates have non-finite entries")
        object.__setattr__(self, "coords", np.clip(c, -1.0, 1.0))

    def __len__(self) -> int:
        return self.coords.shape[0]


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix of a scalar-first quaternion (normalized internally)."""
    q = np.asarray(q, dtype=np.float64).reshape(4)
    if not np.all(np.isfinite(q)):
        raise InvalidInputError("quaternion has non-finite entries")
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Scalar-first quaternion of a rotation matrix (Shepperd's method)."""
    m = np.asarray(m, dtype=np.float64).reshape(3, 3)
    tr = np.trace(m)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(m[i, i] - m[j, j] - m[k, k] + 1.0) * 2
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return q / np.linalg.norm(q)


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = np.asarray(a, dtype=np.float64)
    bw, bx, by, bz = np.asarray(b, dtype=np.float64)
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64).reshape(3)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise InvalidInputError("axis has zero norm")
    axis = axis / n
    half = 0.5 * angle_rad
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def backproject(
    depth_mm: np.ndarray,
    intrinsics: Intrinsics,
    mask: np.ndarray,
    sample_count: int = 1024,
    seed: int = 0,
    colors_img: np.ndarray | None = None,
) -> PointCloud:
    """Back-project masked depth pixels into a camera-frame point cloud.

    Parameters
    ----------
    depth_mm : (H, W) uint16 depth in millimeters; zeros are invalid.
    mask : (H, W) boolean (or {0,255}) foreground mask.
    sample_count : if more valid pixels exist, sample this many uniformly
        without replacement with a generator seeded by `seed`.
    colors_img : optional (H, W, 3) image in [0,1] or uint8 to attach
        per-point colors.
    """
    depth_mm = np.asarray(depth_mm)
    mask = np.asarray(mask).astype(bool)
    if depth_mm.shape != mask.shape:
        raise InvalidInputError("depth and mask resolutions differ")
    if depth_mm.shape != (intrinsics.height, intrinsics.width):
        raise InvalidInputError("depth resolution does not match intrinsics")
    if sample_count < 1:
        raise InvalidInputError("sample_count must be >= 1")

    valid = mask & (depth_mm > 0)
    vv, uu = np.nonzero(valid)
    if vv.size == 0:
        raise EmptyForegroundError("no masked pixels with valid depth")

    if vv.size > sample_count:
        rng = np.random.default_rng(seed)
        idx = rng.choice(vv.size, size=sample_count, replace=False)
        idx.sort()
        vv, uu = vv[idx], uu[idx]

    z = depth_mm[vv, uu].astype(np.float64) / 1000.0
    x = (uu - intrinsics.cx) * z / intrinsics.fx
    y = (vv - intrinsics.cy) * z / intrinsics.fy
    pts = np.stack([x, y, z], axis=1)

    colors = None
    if colors_img is not None:
        colors_img = np.asarray(colors_img)
        c = colors_img[vv, uu].astype(np.float64)
        if colors_img.dtype == np.uint8:
            c = c / 255.0
        colors = np.clip(c, 0.0, 1.0)
    return PointCloud(pts, colors=colors, pixels=np.stack([uu, vv], axis=1))


def project_points(points: np.ndarray, intrinsics: Intrinsics) -> np.ndarray:
    """Pinhole projection of camera-frame points to (u, v) pixel coords."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = p[:, 2]
    u = intrinsics.fx * p[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * p[:, 1] / z + intrinsics.cy
    return np.stack([u, v], axis=1)


def decouple_translation(o_x: float, o_y: float, t_z: float, intrinsics: Intrinsics) -> np.ndarray:
    """Translation from image-plane centroid projection and depth.

    T = K^-1 * t_z * (o_x, o_y, 1)^T
    """
    if t_z <= 0:
        raise InvalidInputError("t_z must be > 0")
    return np.array(
        [
            (o_x - intrinsics.cx) * t_z / intrinsics.fx,
            (o_y - intrinsics.cy) * t_z / intrinsics.fy,
            t_z,
        ]
    )


def project_translation(translation, intrinsics: Intrinsics) -> tuple[float, float, float]:
    """Inverse of decouple_translation: recover (o_x, o_y, t_z)."""
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    if t[2] <= 0:
        raise InvalidInputError("translation must have positive depth")
    o_x = intrinsics.fx * t[0] / t[2] + intrinsics.cx
    o_y = intrinsics.fy * t[1] / t[2] + intrinsics.cy
    return float(o_x), float(o_y), float(t[2])


def transform_points(pose: Pose, points: np.ndarray, apply_scale: bool = True) -> np.ndarray:
    """Map canonical-frame points to camera frame: x -> s R x + T."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    s = pose.scale_factor if apply_scale else 1.0
    return s * (p @ pose.rotation.as_matrix().T) + pose.translation
