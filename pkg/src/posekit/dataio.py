"""Dataset layout, annotation schema, and synthetic scene generation.

Video layout on disk:

    <root>/<video_id>/
        meta.json           {"id", "category", "frame_count", "schema_version"}
        intrinsics.json     {"fx", "fy", "cx", "cy", "width", "height"}
        rgb/000000.png      8-bit 3-channel
        depth/000000.png    16-bit millimeters
        mask/000000.png     8-bit {0, 255}
        annotations.json    per-frame pose records (see pose_to_json)

Synthetic frames are ray-cast from the posed mesh; the RGB channel encodes
the ground-truth NOCS coordinate of each foreground pixel, which gives
colored-ICP tests a pose-invariant appearance signal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError
from .geometry import Intrinsics, PointCloud, Pose, Rotation, backproject
from .shape import Mesh

__all__ = [
    "SCHEMA_VERSION",
    "VideoRecord",
    "SceneSpec",
    "SynthResult",
    "pose_to_json",
    "pose_from_json",
    "synth_generate",
    "write_video",
    "load_video",
    "frame_cloud",
]

SCHEMA_VERSION = 1


def pose_to_json(pose: Pose, is_keyframe: bool = False) -> dict:
    return {
        "quaternion": [float(x) for x in pose.rotation.quaternion],
        "translation_m": [float(x) for x in pose.translation],
        "size_m": [float(x) for x in pose.scale],
        "is_keyframe": bool(is_keyframe),
    }


def pose_from_json(obj: dict) -> Pose:
    try:
        return Pose(
            Rotation(np.array(obj["quaternion"], dtype=np.float64)),
            np.array(obj["translation_m"], dtype=np.float64),
            np.array(obj["size_m"], dtype=np.float64),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed pose record: {exc}") from exc


def intrinsics_to_json(k: Intrinsics) -> dict:
    return {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy, "width": k.width, "height": k.height}


def intrinsics_from_json(obj: dict) -> Intrinsics:
    try:
        return Intrinsics(
            fx=float(obj["fx"]),
            fy=float(obj["fy"]),
            cx=float(obj["cx"]),
            cy=float(obj["cy"]),
            width=int(obj["width"]),
            height=int(obj["height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"unparseable intrinsics: {exc}") from exc


@dataclass
class VideoRecord:
    """Disk-backed RGBD video with pose annotations."""

    root: Path
    video_id: str
    category: str
    intrinsics: Intrinsics
    frame_count: int
    annotations: dict = field(default_factory=dict)  # frame -> {"pose": Pose, "is_keyframe": bool}

    def frame_indices(self):
        return range(self.frame_count)

    def _img_path(self, kind: str, n: int) -> Path:
        return self.root / kind / f"{n:06d}.png"

    def rgb(self, n: int) -> np.ndarray:
        return np.asarray(Image.open(self._img_path("rgb", n)).convert("RGB"))

    def depth_mm(self, n: int) -> np.ndarray:
        img = Image.open(self._img_path("depth", n))
        arr = np.asarray(img)
        if arr.dtype != np.uint16 and arr.dtype != np.int32:
            raise InvalidInputError(f"depth frame {n} is not 16-bit")
        return arr.astype(np.uint16)

    def mask(self, n: int) -> np.ndarray:
        return np.asarray(Image.open(self._img_path("mask", n)).convert("L")) > 127

    def keyframes(self) -> dict:
        return {
            f: rec["pose"] for f, rec in self.annotations.items() if rec.get("is_keyframe")
        }

    def poses(self) -> dict:
        return {f: rec["pose"] for f, rec in self.annotations.items()}


@dataclass(frozen=True)
class SceneSpec:
    mesh: Mesh
    trajectory: list  # per-frame Pose
    intrinsics: Intrinsics
    category: str = "synthetic"
    depth_noise_mm: float = 0.0
    outlier_fraction: float = 0.0

    def __post_init__(self):
        if len(self.trajectory) < 1:
            raise InvalidInputError("trajectory must have at least one pose")
        if self.depth_noise_mm < 0 or not 0 <= self.outlier_fraction < 1:
            raise InvalidInputError("invalid noise parameters")


@dataclass
class SynthResult:
    spec: SceneSpec
    rgb: list  # per frame, H x W x 3 uint8
    depth_mm: list  # per frame, H x W uint16 (noisy)
    mask: list  # per frame, H x W bool
    nocs: list  # per frame, H x W x 3 float (ground truth, noise-free geometry)
    gt_poses: list  # per frame Pose


def _raycast(mesh: Mesh, pose: Pose, intr: Intrinsics) -> np.ndarray:
    """Per-pixel depth (meters) of the nearest ray-triangle hit; 0 = miss."""
    h, w = intr.height, intr.width
    uu, vv = np.meshgrid(np.arange(w), np.arange(h))
    dirs = np.stack(
        [(uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy, np.ones_like(uu, dtype=np.float64)],
        axis=-1,
    ).reshape(-1, 3)

    r = pose.rotation.as_matrix()
    verts = pose.scale_factor * mesh.vertices @ r.T + pose.translation
    v0 = verts[mesh.faces[:, 0]]
    e1 = verts[mesh.faces[:, 1]] - v0
    e2 = verts[mesh.faces[:, 2]] - v0

    best = np.full(dirs.shape[0], np.inf)
    # Moeller-Trumbore, vectorized pixels x faces in face chunks
    chunk = max(1, int(4e6 / dirs.shape[0]))
    for f0 in range(0, v0.shape[0], chunk):
        v0c, e1c, e2c = v0[f0 : f0 + chunk], e1[f0 : f0 + chunk], e2[f0 : f0 + chunk]
        hvec = np.cross(dirs[:, None, :], e2c[None, :, :])
        a = np.einsum("fk,pfk->pf", e1c, hvec)
        s = -v0c[None, :, :]  # ray origin at camera center
        q = np.cross(s, e1c[None, :, :])
        # parallel rays produce inf/nan here; the hit mask discards them
        with np.errstate(divide="ignore", invalid="ignore"):
            finv = 1.0 / a
            u = np.einsum("pfk,pfk->pf", s, hvec) * finv
            v = np.einsum("pk,pfk->pf", dirs, q) * finv
            t = np.einsum("fk,pfk->pf", e2c, q) * finv
            hit = (np.abs(a) > 1e-12) & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-6)
        t = np.where(hit, t, np.inf)
        best = np.minimum(best, t.min(axis=1))
    depth = np.where(np.isfinite(best), best, 0.0)
    return depth.reshape(h, w)


def synth_generate(spec: SceneSpec, seed: int = 0) -> SynthResult:
    """Render a synthetic RGBD video with ground-truth annotations.

    Depth noise and outliers are seeded; ground-truth NOCS maps come from
    the noise-free geometry so downstream solvers see realistic depth
    perturbations against exact canonical correspondences.
    """
    rng = np.random.default_rng(seed)
    intr = spec.intrinsics
    rgb_frames, depth_frames, mask_frames, nocs_frames = [], [], [], []
    for i, pose in enumerate(spec.trajectory):
        z = _raycast(spec.mesh, pose, intr)
        mask = z > 0
        if not mask.any():
            raise InvalidInputError(f"frame {i} renders empty (mesh outside the view)")

        # ground-truth NOCS from noise-free hit points
        h, w = z.shape
        uu, vv = np.meshgrid(np.arange(w), np.arange(h))
        pts = np.stack(
            [(uu - intr.cx) / intr.fx * z, (vv - intr.cy) / intr.fy * z, z], axis=-1
        )
        r = pose.rotation.as_matrix()
        nocs = np.zeros_like(pts)
        fg = pts[mask]
        nocs[mask] = (fg - pose.translation) @ r / pose.scale_factor

        z_noisy = z.copy()
        if spec.depth_noise_mm > 0:
            z_noisy[mask] += rng.normal(0.0, spec.depth_noise_mm / 1000.0, size=int(mask.sum()))
        if spec.outlier_fraction > 0:
            fg_idx = np.nonzero(mask.reshape(-1))[0]
            n_out = int(round(spec.outlier_fraction * fg_idx.size))
            if n_out:
                pick = rng.choice(fg_idx.size, size=n_out, replace=False)
                flat = z_noisy.reshape(-1)
                flat[fg_idx[pick]] = rng.uniform(0.3, 3.0, size=n_out)
        depth_mm = np.zeros(z.shape, dtype=np.uint16)
        depth_mm[mask] = np.clip(np.round(z_noisy[mask] * 1000.0), 1, 65535).astype(np.uint16)

        rgb = np.full((h, w, 3), 40, dtype=np.uint8)
        rgb[mask] = np.clip((nocs[mask] + 0.5) * 255.0, 0, 255).astype(np.uint8)

        rgb_frames.append(rgb)
        depth_frames.append(depth_mm)
        mask_frames.append(mask)
        nocs_frames.append(nocs)
    return SynthResult(
        spec=spec,
        rgb=rgb_frames,
        depth_mm=depth_frames,
        mask=mask_frames,
        nocs=nocs_frames,
        gt_poses=list(spec.trajectory),
    )


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def write_annotations(root: Path, annotations: dict) -> None:
    frames = {
        str(f): pose_to_json(rec["pose"], rec.get("is_keyframe", False))
        for f, rec in sorted(annotations.items())
    }
    payload = {"schema_version": SCHEMA_VERSION, "frames": frames}
    _atomic_write_text(Path(root) / "annotations.json", json.dumps(payload, indent=1))


def write_video(
    synth: SynthResult,
    root,
    video_id: str = "synth-000",
    keyframe_stride: int = 50,
) -> Path:
    """Write a synthetic video in the documented layout; ground-truth poses
    become the annotation set with keyframes every `keyframe_stride` frames."""
    root = Path(root) / video_id
    for sub in ("rgb", "depth", "mask"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i in range(len(synth.rgb)):
        Image.fromarray(synth.rgb[i]).save(root / "rgb" / f"{i:06d}.png")
        Image.fromarray(synth.depth_mm[i].astype(np.uint16)).save(root / "depth" / f"{i:06d}.png")
        Image.fromarray((synth.mask[i] * 255).astype(np.uint8)).save(root / "mask" / f"{i:06d}.png")
    intr = synth.spec.intrinsics
    _atomic_write_text(root / "intrinsics.json", json.dumps(intrinsics_to_json(intr), indent=1))
    _atomic_write_text(
        root / "meta.json",
        json.dumps(
            {
                "id": video_id,
                "category": synth.spec.category,
                "frame_count": len(synth.rgb),
                "schema_version": SCHEMA_VERSION,
            },
            indent=1,
        ),
    )
    annotations = {
        i: {"pose": p, "is_keyframe": i % keyframe_stride == 0}
        for i, p in enumerate(synth.gt_poses)
    }
    write_annotations(root, annotations)
    return root


def load_video(path) -> VideoRecord:
    """Load and validate a video directory."""
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise InvalidInputError(f"{root}: missing meta.json")
    meta = json.loads(meta_path.read_text())
    intr = intrinsics_from_json(json.loads((root / "intrinsics.json").read_text()))
    frame_count = int(meta["frame_count"])

    for i in range(frame_count):
        for kind in ("rgb", "depth", "mask"):
            p = root / kind / f"{i:06d}.png"
            if not p.exists():
                raise InvalidInputError(f"{root}: missing {kind} frame {i:06d}")

    record = VideoRecord(
        root=root,
        video_id=str(meta.get("id", root.name)),
        category=str(meta.get("category", "unknown")),
        intrinsics=intr,
        frame_count=frame_count,
    )

    # validate formats on the first frame, resolutions on all
    d0 = np.asarray(Image.open(root / "depth" / "000000.png"))
    if d0.dtype not in (np.uint16, np.int32):
        raise InvalidInputError(f"{root}: depth must be 16-bit PNG, got {d0.dtype}")
    for i in range(frame_count):
        for kind in ("rgb", "depth", "mask"):
            with Image.open(root / kind / f"{i:06d}.png") as img:
                if img.size != (intr.width, intr.height):
                    raise InvalidInputError(
                        f"{root}: {kind} frame {i:06d} resolution {img.size} "
                        f"does not match intrinsics ({intr.width}, {intr.height})"
                    )

    ann_path = root / "annotations.json"
    if ann_path.exists():
        payload = json.loads(ann_path.read_text())
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise InvalidInputError(f"{root}: unsupported annotation schema version")
        for key, rec in payload.get("frames", {}).items():
            record.annotations[int(key)] = {
                "pose": pose_from_json(rec),
                "is_keyframe": bool(rec.get("is_keyframe", False)),
            }
    return record


def frame_cloud(video: VideoRecord, n: int, sample_count: int = 4096, seed: int = 0) -> PointCloud:
    """Object-masked colored point cloud of one frame."""
    return backproject(
        video.depth_mm(n),
        video.intrinsics,
        video.mask(n),
        sample_count=sample_count,
        seed=seed,
        colors_img=video.rgb(n),
    )
