"""Frame-to-frame registration for keyframe pose propagation.

Trimmed point-to-point ICP with a combined geometry+color correspondence
metric replaces the certifiable global registration stage: inter-frame
baselines in handheld video are small, so each registration is warm
started from the previous frame's result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import RegistrationFailedError
from .geometry import PointCloud, Pose, Rotation

__all__ = ["RigidTransform", "IcpConfig", "IcpResult", "PropagationResult", "icp_colored", "propagate_clouds", "propagate"]


@dataclass(frozen=True)
class RigidTransform:
    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3)
        )

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(Rotation.identity(), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points).reshape(-1, 3) @ self.rotation.as_matrix().T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other (apply `other` first)."""
        r = self.rotation.compose(other.rotation)
        t = self.rotation.apply(other.translation[None])[0] + self.translation
        return RigidTransform(r, t)

    def inverse(self) -> "RigidTransform":
        rinv = self.rotation.inverse()
        return RigidTransform(rinv, -rinv.apply(self.translation[None])[0])

    def apply_to_pose(self, pose: Pose) -> Pose:
        return Pose(
            self.rotation.compose(pose.rotation),
            self.rotation.apply(pose.translation[None])[0] + self.translation,
            pose.scale,
        )


@dataclass(frozen=True)
class IcpConfig:
    max_iters: int = 50
    correspondence_radius: float = 0.05  # meters, in the combined metric
    trim_fraction: float = 0.2
    color_weight: float = 0.1
    min_correspondences: int = 10
    rms_tol: float = 1e-6


@dataclass
class IcpResult:
    transform: RigidTransform
    rms: float
    iterations: int
    # (rms before re-solve, rms after re-solve) on each iteration's trimmed set
    rms_history: list = field(default_factory=list)


def _solve_rigid(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rigid transform (Kabsch, reflection-corrected)."""
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    cov = (dst - mu_d).T @ (src - mu_s) / src.shape[0]
    u, _, vt = np.linalg.svd(cov)
    d = np.array([1.0, 1.0, np.sign(np.linalg.det(u) * np.linalg.det(vt)) or 1.0])
    r = u @ np.diag(d) @ vt
    return RigidTransform(Rotation.from_matrix(r), mu_d - r @ mu_s)


def _augment(points: np.ndarray, colors: np.ndarray | None, w: float) -> np.ndarray:
    if colors is None or w <= 0:
        return points
    return np.concatenate([points, np.sqrt(w) * colors], axis=1)


def icp_colored(
    src: PointCloud,
    dst: PointCloud,
    init: RigidTransform = RigidTransform.identity(),
    cfg: IcpConfig = IcpConfig(),
) -> IcpResult:
    """Register src onto dst: find T with T(src) ~= dst.

    Correspondences are nearest neighbors under
    d^2 = ||dx||^2 + w ||dcolor||^2 within the correspondence radius; the
    worst trim_fraction by residual is dropped before each re-solve.
    """
    if len(src) < 50 or len(dst) < 50:
        raise RegistrationFailedError("clouds must have >= 50 points")
    use_color = src.colors is not None and dst.colors is not None and cfg.color_weight > 0
    dst_aug = _augment(dst.points, dst.colors if use_color else None, cfg.color_weight)
    tree = cKDTree(dst_aug)

    transform = init
    prev_rms = np.inf
    history = []
    it = 0
    rms = np.inf
    for it in range(1, cfg.max_iters + 1):
        moved = transform.apply(src.points)
        src_aug = _augment(moved, src.colors if use_color else None, cfg.color_weight)
        dist, idx = tree.query(src_aug, distance_upper_bound=cfg.correspondence_radius)
        valid = np.isfinite(dist)
        if valid.sum() < cfg.min_correspondences:
            raise RegistrationFailedError(
                f"only {int(valid.sum())} correspondences at iteration {it}"
            )
        sidx = np.nonzero(valid)[0]
        didx = idx[valid]
        resid = dist[valid]
        keep = max(int(np.ceil((1.0 - cfg.trim_fraction) * sidx.size)), cfg.min_correspondences)
        order = np.argsort(resid)[:keep]
        s_pts = src.points[sidx[order]]
        d_pts = dst.points[didx[order]]

        rms_before = float(
            np.sqrt(((transform.apply(s_pts) - d_pts) ** 2).sum(axis=1).mean())
        )
        transform = _solve_rigid(s_pts, d_pts)
        rms = float(np.sqrt(((transform.apply(s_pts) - d_pts) ** 2).sum(axis=1).mean()))
        history.append((rms_before, rms))
        if abs(prev_rms - rms) < cfg.rms_tol:
            break
        prev_rms = rms
    return IcpResult(transform=transform, rms=rms, iterations=it, rms_history=history)


@dataclass
class PropagationResult:
    poses: dict  # frame -> Pose
    drift_rms: dict  # frame -> registration RMS (0 for keyframes)
    unpropagated: list


def propagate_clouds(
    clouds: dict,
    keyframe_poses: dict,
    cfg: IcpConfig = IcpConfig(),
) -> PropagationResult:
    """Propagate keyframe poses to every frame via keyframe-to-frame ICP.

    Each non-keyframe registers its governing keyframe's cloud onto its
    own, warm started from the neighboring frame's transform. Frames
    whose registration fails are reported as unpropagated.
    """
    if not keyframe_poses:
        raise RegistrationFailedError("at least one keyframe is required")
    frames = sorted(clouds)
    keyframes = sorted(keyframe_poses)
    poses = dict(keyframe_poses)
    drift = {k: 0.0 for k in keyframes}
    unpropagated = []

    def governing(f):
        prev = [k for k in keyframes if k <= f]
        return prev[-1] if prev else keyframes[0]

    # group frames by governing keyframe, walk outward from each keyframe
    spans: dict[int, list] = {k: [] for k in keyframes}
    for f in frames:
        if f not in keyframe_poses:
            spans[governing(f)].append(f)

    for k in keyframes:
        forward = sorted(f for f in spans[k] if f > k)
        backward = sorted((f for f in spans[k] if f < k), reverse=True)
        for direction in (forward, backward):
            warm = RigidTransform.identity()
            for f in direction:
                try:
                    res = icp_colored(clouds[k], clouds[f], init=warm, cfg=cfg)
                except RegistrationFailedError:
                    unpropagated.append(f)
                    continue
                warm = res.transform
                poses[f] = res.transform.apply_to_pose(keyframe_poses[k])
                drift[f] = res.rms
    return PropagationResult(poses=poses, drift_rms=drift, unpropagated=sorted(unpropagated))


def propagate(
    video,
    keyframe_poses: dict,
    keyframe_stride: int = 50,
    cfg: IcpConfig = IcpConfig(),
    sample_count: int = 4096,
    seed: int = 0,
) -> PropagationResult:
    """Propagate keyframe annotations across a VideoRecord.

    Object-masked clouds are back-projected per frame (annotations are
    object poses, so only object geometry participates).
    """
    from .dataio import frame_cloud  # local import: dataio is a higher layer

    clouds = {
        f: frame_cloud(video, f, sample_count=sample_count, seed=seed) for f in video.frame_indices()
    }
    return propagate_clouds(clouds, keyframe_poses, cfg=cfg)
