"""HTTP annotation service.

A thin adapter over the library: every numerical response is the result
of the corresponding library call, never recomputed service-side. State
changes are persisted atomically to each video's annotations.json;
writes and propagation jobs are serialized per video while reads stay
concurrent and always see a complete annotation set.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles

from .dataio import load_video, pose_from_json, pose_to_json, write_annotations
from .errors import InvalidInputError, RegistrationFailedError
from .geometry import Intrinsics, Pose, project_points
from .metrics import Box3D
from .registration import IcpConfig, propagate_clouds

__all__ = ["create_app", "overlay_corners"]

QUAT_NORM_TOL = 1e-6


def overlay_corners(pose: Pose, intrinsics: Intrinsics) -> dict:
    """Projected 3D-box overlay: 8 pixel corners, 12 edge index pairs,
    and a per-corner behind-camera flag (flagged corners still project,
    through possibly negative depth, so callers can decide to clip)."""
    box = Box3D.from_pose(pose)
    corners = box.corners()
    behind = corners[:, 2] <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        px = project_points(corners, intrinsics)
    px = np.where(np.isfinite(px), px, 0.0)
    return {
        "corners": [[float(u), float(v)] for u, v in px],
        "edges": [[int(a), int(b)] for a, b in box.edges()],
        "behind_camera": [bool(b) for b in behind],
    }


class _VideoState:
    def __init__(self, root: Path):
        self.record = load_video(root)
        self.lock = threading.Lock()  # serializes writes and propagation
        self.job_id: str | None = None  # active propagation job, if any


class _Job:
    def __init__(self, video_id: str):
        self.id = uuid.uuid4().hex
        self.video_id = video_id
        self.status = "queued"
        self.progress = 0.0
        self.error: str | None = None
        self.unpropagated: list = []


def _validated_pose(payload) -> Pose:
    if not isinstance(payload, dict):
        raise InvalidInputError("pose payload must be a JSON object")
    q = np.asarray(payload.get("quaternion", []), dtype=np.float64)
    if q.shape != (4,):
        raise InvalidInputError("quaternion must have 4 components (w, x, y, z)")
    if abs(float(np.linalg.norm(q)) - 1.0) > QUAT_NORM_TOL:
        raise InvalidInputError(
            "quaternion is not unit-norm; normalize it (divide by its length) before submitting"
        )
    pose = pose_from_json(payload)
    if pose.translation[2] <= 0:
        raise InvalidInputError("translation depth t_z must be > 0")
    return pose


def create_app(root: Path, frontend_dir: Path | None = None) -> FastAPI:
    root = Path(root)
    if not root.is_dir():
        raise InvalidInputError(f"{root}: not a directory")
    app = FastAPI(title="posekit annotation service")
    videos: dict[str, _VideoState] = {}
    jobs: dict[str, _Job] = {}
    registry_lock = threading.Lock()

    def video_state(video_id: str) -> _VideoState:
        with registry_lock:
            if video_id not in videos:
                vdir = root / video_id
                if not (vdir / "meta.json").exists():
                    raise HTTPException(404, f"unknown video '{video_id}'")
                try:
                    videos[video_id] = _VideoState(vdir)
                except InvalidInputError as exc:
                    raise HTTPException(404, str(exc)) from exc
            return videos[video_id]

    def check_frame(state: _VideoState, n: int) -> None:
        if not 0 <= n < state.record.frame_count:
            raise HTTPException(404, f"frame {n} out of range")

    def persist(state: _VideoState, annotations: dict) -> None:
        # swap in a complete new dict so concurrent readers never see a
        # partially updated annotation set
        write_annotations(state.record.root, annotations)
        state.record.annotations = annotations

    @app.get("/api/videos")
    def list_videos():
        out = []
        for meta in sorted(root.glob("*/meta.json")):
            state = video_state(meta.parent.name)
            rec = state.record
            out.append(
                {
                    "id": rec.video_id,
                    "category": rec.category,
                    "frame_count": rec.frame_count,
                    "keyframe_count": len(rec.keyframes()),
                }
            )
        return out

    @app.get("/api/videos/{video_id}/frames/{n}/{kind}")
    def frame_image(video_id: str, n: int, kind: str):
        if kind == "overlay":
            return frame_overlay(video_id, n)
        if kind not in ("rgb", "depth", "mask"):
            raise HTTPException(404, f"unknown frame channel '{kind}'")
        state = video_state(video_id)
        check_frame(state, n)
        return FileResponse(state.record.root / kind / f"{n:06d}.png", media_type="image/png")

    def frame_overlay(video_id: str, n: int):
        state = video_state(video_id)
        check_frame(state, n)
        rec = state.record.annotations.get(n)
        if rec is None:
            raise HTTPException(404, f"frame {n} has no pose annotation")
        out = overlay_corners(rec["pose"], state.record.intrinsics)
        out["frame"] = n
        out["is_keyframe"] = bool(rec.get("is_keyframe", False))
        return out

    @app.get("/api/videos/{video_id}/keyframes")
    def get_keyframes(video_id: str):
        state = video_state(video_id)
        return {
            str(f): pose_to_json(p, is_keyframe=True)
            for f, p in sorted(state.record.keyframes().items())
        }

    @app.put("/api/videos/{video_id}/keyframes/{n}")
    async def put_keyframe(video_id: str, n: int, request: Request):
        state = video_state(video_id)
        check_frame(state, n)
        try:
            pose = _validated_pose(await request.json())
        except InvalidInputError as exc:
            raise HTTPException(422, str(exc)) from exc
        with state.lock:
            if state.job_id is not None and jobs[state.job_id].status in ("queued", "running"):
                raise HTTPException(409, "propagation is running for this video")
            annotations = dict(state.record.annotations)
            annotations[n] = {"pose": pose, "is_keyframe": True}
            persist(state, annotations)
        return pose_to_json(pose, is_keyframe=True)

    @app.get("/api/videos/{video_id}/poses")
    def get_poses(video_id: str):
        state = video_state(video_id)
        return {
            str(f): pose_to_json(rec["pose"], rec.get("is_keyframe", False))
            for f, rec in sorted(state.record.annotations.items())
        }

    def run_propagation(state: _VideoState, job: _Job) -> None:
        from .dataio import frame_cloud

        job.status = "running"
        try:
            with state.lock:
                rec = state.record
                keyframes = rec.keyframes()
                clouds = {}
                n = rec.frame_count
                for f in rec.frame_indices():
                    clouds[f] = frame_cloud(rec, f, seed=f)
                    job.progress = 0.5 * (f + 1) / n
                result = propagate_clouds(clouds, keyframes, cfg=IcpConfig())
                job.progress = 0.95
                annotations = {
                    f: {"pose": p, "is_keyframe": f in keyframes}
                    for f, p in result.poses.items()
                }
                persist(state, annotations)
            job.unpropagated = result.unpropagated
            job.progress = 1.0
            job.status = "done"
        except (InvalidInputError, RegistrationFailedError, OSError) as exc:
            job.error = str(exc)
            job.status = "failed"

    @app.post("/api/videos/{video_id}/propagate")
    def post_propagate(video_id: str):
        state = video_state(video_id)
        with state.lock:
            if state.job_id is not None and jobs[state.job_id].status in ("queued", "running"):
                raise HTTPException(409, "propagation already running for this video")
            if not state.record.keyframes():
                raise HTTPException(422, "video has no keyframe annotations")
            job = _Job(video_id)
            jobs[job.id] = job
            state.job_id = job.id
        threading.Thread(target=run_propagation, args=(state, job), daemon=True).start()
        return {"job_id": job.id}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job '{job_id}'")
        return {
            "job_id": job.id,
            "video_id": job.video_id,
            "status": job.status,
            "progress": job.progress,
            "error": job.error,
            "unpropagated": job.unpropagated,
        }

    if frontend_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend_dir = candidate if candidate.is_dir() else None
    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")
    return app
