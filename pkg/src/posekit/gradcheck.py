"""Finite-difference verification of the rasterizer's analytic gradients.

The oracle only ever calls the forward render; central differences with
renormalized quaternion perturbations are compared entry-wise against the
backward pass. The reported worst-case score is

    max |analytic - fd| / max(|fd|, abs_floor / rel_tol)

so a score below rel_tol means every entry satisfies
|analytic - fd| <= max(rel_tol * |fd|, abs_floor).

Finite differences only verify a derivative where the function is
locally well conditioned at the chosen step size, so pose sampling
rejects configurations whose projected geometry is nearly degenerate
(any projected edge shorter than MIN_PROJECTED_EDGE pixels). The test
meshes use well-shaped (equilateral) triangles for the same reason:
sliver triangles make the edge parametrization hypersensitive to vertex
motion without being wrong.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Intrinsics, Pose, Rotation
from .shape import Mesh
from .softrender import RenderConfig, render_silhouette, render_with_gradients

__all__ = ["GradCheckReport", "random_mesh", "random_pose", "run_gradcheck"]

REL_TOL = 1e-3
ABS_FLOOR = 1e-6
MIN_PROJECTED_EDGE = 2.0  # pixels


@dataclass
class GradCheckReport:
    worst_score: float
    per_pose: list
    passed: bool


def random_mesh(n_faces: int = 20, seed: int = 0, side: float = 0.5) -> Mesh:
    """Soup of randomly placed and oriented equilateral triangles."""
    rng = np.random.default_rng(seed)
    base = side * np.array(
        [
            [0.0, 1.0 / np.sqrt(3.0), 0.0],
            [-0.5, -0.5 / np.sqrt(3.0), 0.0],
            [0.5, -0.5 / np.sqrt(3.0), 0.0],
        ]
    )
    verts = []
    for _ in range(n_faces):
        center = rng.uniform(-0.3, 0.3, size=3)
        m = rng.normal(size=(3, 3))
        q, _ = np.linalg.qr(m)
        if np.linalg.det(q) < 0:
            q[:, 0] *= -1.0
        verts.append(center + base @ q.T)
    v = np.concatenate(verts)
    faces = np.arange(v.shape[0]).reshape(-1, 3)
    return Mesh(v, faces)


def random_pose(rng: np.random.Generator) -> Pose:
    q = rng.normal(size=4)
    t = np.array([rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(1.8, 2.8)])
    s = rng.uniform(0.3, 0.6, size=3)
    return Pose(Rotation(q), t, s)


def _min_projected_edge(mesh: Mesh, pose: Pose, intr: Intrinsics) -> float:
    r = pose.rotation.as_matrix()
    v_cam = pose.scale_factor * mesh.vertices @ r.T + pose.translation
    z = v_cam[:, 2]
    if np.any(z <= 0):
        return 0.0
    p = np.stack(
        [intr.fx * v_cam[:, 0] / z + intr.cx, intr.fy * v_cam[:, 1] / z + intr.cy], axis=1
    )
    tri = p[mesh.faces]
    return float(np.linalg.norm(tri - tri[:, [1, 2, 0]], axis=2).min())


def _objective(mesh, pose, intr, cfg, upstream) -> float:
    return float((render_silhouette(mesh, pose, intr, cfg).values * upstream).sum())


def _fd_pair(f_plus: float, f_minus: float, h: float) -> float:
    return (f_plus - f_minus) / (2.0 * h)


def check_pose(
    mesh: Mesh,
    pose: Pose,
    intr: Intrinsics,
    cfg: RenderConfig,
    upstream: np.ndarray,
    h: float = 1e-4,
) -> float:
    """Worst-case score for one pose (see module docstring)."""
    grads = render_with_gradients(mesh, pose, intr, cfg, upstream)
    analytic = np.concatenate(
        [
            grads.d_vertices.reshape(-1),
            grads.d_quaternion,
            grads.d_translation,
            grads.d_scale,
        ]
    )

    fd = []
    base_v = mesh.vertices
    for i in range(base_v.shape[0]):
        for a in range(3):
            vp = base_v.copy()
            vp[i, a] += h
            vm = base_v.copy()
            vm[i, a] -= h
            fd.append(
                _fd_pair(
                    _objective(Mesh(vp, mesh.faces), pose, intr, cfg, upstream),
                    _objective(Mesh(vm, mesh.faces), pose, intr, cfg, upstream),
                    h,
                )
            )
    q = pose.rotation.quaternion
    for a in range(4):
        qp = q.copy()
        qp[a] += h
        qm = q.copy()
        qm[a] -= h
        fd.append(
            _fd_pair(
                _objective(mesh, Pose(Rotation(qp), pose.translation, pose.scale), intr, cfg, upstream),
                _objective(mesh, Pose(Rotation(qm), pose.translation, pose.scale), intr, cfg, upstream),
                h,
            )
        )
    for a in range(3):
        tp = pose.translation.copy()
        tp[a] += h
        tm = pose.translation.copy()
        tm[a] -= h
        fd.append(
            _fd_pair(
                _objective(mesh, Pose(pose.rotation, tp, pose.scale), intr, cfg, upstream),
                _objective(mesh, Pose(pose.rotation, tm, pose.scale), intr, cfg, upstream),
                h,
            )
        )
    for a in range(3):
        sp = pose.scale.copy()
        sp[a] += h
        sm = pose.scale.copy()
        sm[a] -= h
        fd.append(
            _fd_pair(
                _objective(mesh, Pose(pose.rotation, pose.translation, sp), intr, cfg, upstream),
                _objective(mesh, Pose(pose.rotation, pose.translation, sm), intr, cfg, upstream),
                h,
            )
        )
    fd = np.array(fd)
    return float(np.max(np.abs(analytic - fd) / np.maximum(np.abs(fd), ABS_FLOOR / REL_TOL)))


def run_gradcheck(
    n_poses: int = 10,
    n_faces: int = 20,
    image_size: tuple = (64, 64),
    sigma: float = 4.0,
    seed: int = 0,
    max_draws: int = 500,
) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    mesh = random_mesh(n_faces, seed=seed)
    intr = Intrinsics(
        fx=48.0, fy=48.0, cx=image_size[1] / 2, cy=image_size[0] / 2,
        width=image_size[1], height=image_size[0],
    )
    cfg = RenderConfig(sigma=sigma, image_size=image_size)
    scores = []
    draws = 0
    while len(scores) < n_poses and draws < max_draws:
        draws += 1
        pose = random_pose(rng)
        upstream = rng.uniform(0.1, 1.0, size=image_size)
        if _min_projected_edge(mesh, pose, intr) < MIN_PROJECTED_EDGE:
            continue
        scores.append(check_pose(mesh, pose, intr, cfg, upstream))
    worst = max(scores)
    return GradCheckReport(worst_score=worst, per_pose=scores, passed=worst < REL_TOL)
