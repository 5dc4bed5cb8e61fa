"""Analysis-by-synthesis pose (and shape) fitting.

Minimizes a silhouette discrepancy through the differentiable
rasterizer with Adam-style momentum descent. Binary targets use the
negative soft-IOU loss; real-valued reference silhouettes (for example
an anti-aliased render) use a normalized least-squares loss whose
minimum is exactly zero when the rendered mask reproduces the
reference. The pose is optimized in
the decoupled parameterization (quaternion, image-plane center (o_x, o_y),
log depth, log per-axis size) so depth and size stay positive and the
translation chain matches the decoupled-translation model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError, NoOverlapError
from .geometry import Intrinsics, Pose, Rotation, decouple_translation, project_translation
from .losses import deformation_reg, silhouette_loss_grad
from .shape import Deformation, Mesh
from .softrender import RenderConfig, render_silhouette, render_with_gradients
from .umeyama import SimilarityResult  # noqa: F401  (re-exported entry path)

__all__ = ["FitConfig", "FitResult", "fit_pose", "fit_pose_and_shape"]

ALL_GROUPS = ("rotation", "center", "depth", "scale")


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 500
    lr_rotation: float = 0.01
    lr_center: float = 0.05
    lr_depth: float = 0.01
    lr_scale: float = 0.01
    lr_shape: float = 0.005
    sigma0: float = 1.0
    sigma_anneal: float = 0.5
    anneal_every: int = 50
    sigma_min: float = 0.0
    convergence_tol: float = 1e-6
    lambda_reg: float = 0.01
    optimize: tuple = ALL_GROUPS
    near: float = 0.01
    far: float = 100.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_backtracks: int = 5

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if self.sigma0 <= 0 or not 0 < self.sigma_anneal <= 1 or self.anneal_every < 1:
            raise InvalidInputError("invalid sigma schedule")
        if self.sigma_min < 0 or self.sigma_min > self.sigma0:
            raise InvalidInputError("sigma_min must be in [0, sigma0]")
        if self.convergence_tol < 0 or self.max_backtracks < 0:
            raise InvalidInputError("invalid optimizer settings")
        unknown = set(self.optimize) - set(ALL_GROUPS)
        if unknown:
            raise InvalidInputError(f"unknown parameter groups: {sorted(unknown)}")


@dataclass
class FitResult:
    final: Pose
    loss_trajectory: list
    converged: bool
    diverged: bool
    iterations: int
    delta: Deformation | None = None
    final_mask: np.ndarray | None = field(default=None, repr=False)


def _params_from_pose(pose: Pose, intrinsics: Intrinsics) -> np.ndarray:
    o_x, o_y, t_z = project_translation(pose.translation, intrinsics)
    return np.concatenate(
        [pose.rotation.quaternion, [o_x, o_y, np.log(t_z)], np.log(pose.scale)]
    )


def _pose_from_params(p: np.ndarray, intrinsics: Intrinsics) -> Pose:
    q = p[:4] / np.linalg.norm(p[:4])
    t = decouple_translation(p[4], p[5], float(np.exp(p[6])), intrinsics)
    return Pose(Rotation(q), t, np.exp(p[7:10]))


def _lr_vector(cfg: FitConfig, n_shape: int) -> np.ndarray:
    lr = np.zeros(10 + 3 * n_shape)
    if "rotation" in cfg.optimize:
        lr[:4] = cfg.lr_rotation
    if "center" in cfg.optimize:
        lr[4:6] = cfg.lr_center
    if "depth" in cfg.optimize:
        lr[6] = cfg.lr_depth
    if "scale" in cfg.optimize:
        lr[7:10] = cfg.lr_scale
    if n_shape:
        lr[10:] = cfg.lr_shape
    return lr


def _sigma_at(cfg: FitConfig, step: int) -> float:
    return max(cfg.sigma0 * cfg.sigma_anneal ** (step // cfg.anneal_every), cfg.sigma_min)


def _fit(
    target: np.ndarray,
    mesh: Mesh,
    intrinsics: Intrinsics,
    init: Pose,
    cfg: FitConfig,
    with_shape: bool,
) -> FitResult:
    target = np.asarray(target)
    if target.shape != (intrinsics.height, intrinsics.width):
        raise InvalidInputError(
            f"target resolution {target.shape} does not match intrinsics "
            f"({intrinsics.height}, {intrinsics.width})"
        )
    binary = target.dtype == bool or np.isin(target, (0, 1)).all()
    target = target.astype(np.float64)
    if not np.all(np.isfinite(target)) or target.min() < 0 or target.max() > 1:
        raise InvalidInputError("target silhouette values must be finite and in [0, 1]")
    if not target.any():
        raise InvalidInputError("target silhouette is empty")
    h, w = target.shape
    target_mass = float((target**2).sum())

    def mask_loss_grad(m):
        if binary:
            return silhouette_loss_grad(m, target)
        r = m.values
        diff = r - target
        return float((diff**2).sum() / target_mass), 2.0 * diff / target_mass
    n_v = mesh.vertices.shape[0]
    n_shape = n_v if with_shape else 0

    params = np.concatenate([_params_from_pose(init, intrinsics), np.zeros(3 * n_shape)])
    lr = _lr_vector(cfg, n_shape)

    def render_cfg(sigma):
        return RenderConfig(sigma=sigma, image_size=(h, w), near=cfg.near, far=cfg.far)

    def posed_mesh(p):
        if with_shape:
            return Mesh(mesh.vertices + p[10:].reshape(-1, 3), mesh.faces)
        return mesh

    def eval_loss(p, sigma):
        m = render_silhouette(posed_mesh(p), _pose_from_params(p, intrinsics), intrinsics, render_cfg(sigma))
        loss, _ = mask_loss_grad(m)
        if with_shape:
            loss += cfg.lambda_reg * deformation_reg(p[10:].reshape(-1, 3))
        return loss, m

    def eval_grad(p, sigma):
        pose = _pose_from_params(p, intrinsics)
        rcfg = render_cfg(sigma)
        m = render_silhouette(posed_mesh(p), pose, intrinsics, rcfg)
        loss, upstream = mask_loss_grad(m)
        grads = render_with_gradients(posed_mesh(p), pose, intrinsics, rcfg, upstream)
        g = np.zeros_like(p)
        g[:4] = grads.d_quaternion
        # T = t_z * dir(o_x, o_y): chain through the decoupled parameterization
        t = pose.translation
        g[4] = grads.d_translation[0] * t[2] / intrinsics.fx
        g[5] = grads.d_translation[1] * t[2] / intrinsics.fy
        g[6] = float(grads.d_translation @ t)
        g[7:10] = grads.d_scale * pose.scale
        if with_shape:
            deltas = p[10:].reshape(-1, 3)
            g_shape = grads.d_vertices.copy()
            norms = np.linalg.norm(deltas, axis=1)
            nz = norms > 1e-12
            g_shape[nz] += cfg.lambda_reg * deltas[nz] / (norms[nz, None] * deltas.shape[0])
            loss += cfg.lambda_reg * deformation_reg(deltas)
            g[10:] = g_shape.reshape(-1)
        return loss, g, m

    sigma = _sigma_at(cfg, 0)
    loss_prev, mask_prev = eval_loss(params, sigma)
    if float(np.minimum(mask_prev.values, target).sum()) <= 1e-6:
        raise NoOverlapError("initial silhouette does not overlap the target")
    initial_loss = loss_prev
    trajectory = [loss_prev]

    m_state = np.zeros_like(params)
    v_state = np.zeros_like(params)
    converged = False
    diverged = False
    flat_steps = 0
    rising_steps = 0
    it = 0
    final_mask = mask_prev

    for it in range(1, cfg.max_iters + 1):
        new_sigma = _sigma_at(cfg, it - 1)
        if new_sigma != sigma:
            sigma = new_sigma
            loss_prev, _ = eval_loss(params, sigma)  # rebase under the new sharpness
        loss_here, g, mask_here = eval_grad(params, sigma)
        final_mask = mask_here
        loss_prev = loss_here

        m_state = cfg.beta1 * m_state + (1 - cfg.beta1) * g
        v_state = cfg.beta2 * v_state + (1 - cfg.beta2) * g**2
        m_hat = m_state / (1 - cfg.beta1**it)
        v_hat = v_state / (1 - cfg.beta2**it)
        delta = lr * m_hat / (np.sqrt(v_hat) + cfg.eps)

        # backtracking guard: halve a loss-increasing step up to max_backtracks
        accepted = None
        scale = 1.0
        for k in range(cfg.max_backtracks + 1):
            cand = params - scale * delta
            cand[:4] /= np.linalg.norm(cand[:4])
            loss_cand, _ = eval_loss(cand, sigma)
            if loss_cand <= loss_here or k == cfg.max_backtracks:
                accepted = (cand, loss_cand)
                break
            scale *= 0.5
        params, loss_new = accepted

        trajectory.append(loss_new)
        if loss_new > 2.0 * initial_loss:
            rising_steps += 1
        else:
            rising_steps = 0
        if rising_steps >= 20:
            diverged = True
            break
        if abs(loss_here - loss_new) < cfg.convergence_tol:
            flat_steps += 1
        else:
            flat_steps = 0
        loss_prev = loss_new
        if flat_steps >= 10:
            converged = True
            break

    final_pose = _pose_from_params(params, intrinsics)
    result = FitResult(
        final=final_pose,
        loss_trajectory=trajectory,
        converged=converged,
        diverged=diverged,
        iterations=it if cfg.max_iters > 0 else 0,
        final_mask=final_mask.values if final_mask is not None else None,
    )
    if with_shape:
        result.delta = Deformation(params[10:].reshape(-1, 3))
    return result


def fit_pose(
    target: np.ndarray,
    mesh: Mesh,
    intrinsics: Intrinsics,
    init: Pose,
    cfg: FitConfig = FitConfig(),
) -> FitResult:
    """Recover a pose whose rendered silhouette matches `target`."""
    return _fit(target, mesh, intrinsics, init, cfg, with_shape=False)


def fit_pose_and_shape(
    target: np.ndarray,
    prior: Mesh,
    intrinsics: Intrinsics,
    init: Pose,
    cfg: FitConfig = FitConfig(),
) -> FitResult:
    """Jointly recover pose and a regularized per-vertex deformation."""
    return _fit(target, prior, intrinsics, init, cfg, with_shape=True)
