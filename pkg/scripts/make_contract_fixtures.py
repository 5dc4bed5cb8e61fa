"""Record annotation-service responses into frontend contract fixtures.

Builds a small synthetic video, drives the real service through the
keyframe -> propagate -> overlay round trip with the FastAPI test
client, and freezes every JSON body (plus an invalid-keyframe 422) into
frontend/tests/fixtures/contract.json. The vitest contract suite
replays these recordings through the typed client and asserts the
numbers survive untouched.
"""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from posekit.annoserve import create_app
from posekit.dataio import SceneSpec, synth_generate, write_video
from posekit.geometry import Intrinsics, Pose, Rotation
from posekit.shape import load_prior


def build_dataset(root: Path) -> None:
    mesh = load_prior("cube", expected_vertices=None)
    intrinsics = Intrinsics(fx=160.0, fy=160.0, cx=48.0, cy=36.0, width=96, height=72)
    trajectory = [
        Pose(
            Rotation.from_axis_angle([0.2, 1.0, 0.1], np.radians(1.5 * i)),
            np.array([0.001 * i, 0.0, 0.8]),
            np.full(3, 0.2 / np.sqrt(3)),
        )
        for i in range(4)
    ]
    spec = SceneSpec(mesh=mesh, trajectory=trajectory, intrinsics=intrinsics, category="cube")
    write_video(synth_generate(spec, seed=7), root, video_id="vid0", keyframe_stride=100)


def record(root: Path, out_path: Path) -> None:
    from posekit.dataio import load_video, pose_to_json, write_annotations

    # strip to a single keyframe so propagation has real work to do
    video = load_video(root / "vid0")
    keyframe_pose_obj = video.keyframes()[0]
    write_annotations(video.root, {0: {"pose": keyframe_pose_obj, "is_keyframe": True}})

    client = TestClient(create_app(root))
    fixtures: dict = {"responses": {}}

    def get(path: str) -> dict | list:
        resp = client.get(path)
        assert resp.status_code == 200, (path, resp.status_code)
        body = resp.json()
        fixtures["responses"][f"GET {path}"] = {"status": 200, "body": body}
        return body

    get("/api/videos")
    keyframe_pose = pose_to_json(keyframe_pose_obj, is_keyframe=True)
    resp = client.put("/api/videos/vid0/keyframes/0", json=keyframe_pose)
    assert resp.status_code == 200, resp.text
    fixtures["responses"]["PUT /api/videos/vid0/keyframes/0"] = {
        "status": 200,
        "body": resp.json(),
        "request_body": keyframe_pose,
    }

    bad_pose = dict(keyframe_pose, quaternion=[1.0, 1.0, 0.0, 0.0])
    resp = client.put("/api/videos/vid0/keyframes/1", json=bad_pose)
    assert resp.status_code == 422, resp.text
    fixtures["responses"]["PUT /api/videos/vid0/keyframes/1 (invalid)"] = {
        "status": 422,
        "body": resp.json(),
        "request_body": bad_pose,
    }

    get("/api/videos/vid0/keyframes")

    resp = client.post("/api/videos/vid0/propagate")
    assert resp.status_code == 200, resp.text
    job_id = resp.json()["job_id"]
    fixtures["responses"]["POST /api/videos/vid0/propagate"] = {
        "status": 200,
        "body": resp.json(),
    }

    deadline = time.monotonic() + 60.0
    polls = []
    while True:
        body = client.get(f"/api/jobs/{job_id}").json()
        polls.append(body)
        if body["status"] in ("done", "failed"):
            break
        assert time.monotonic() < deadline, "propagation timed out"
        time.sleep(0.1)
    assert body["status"] == "done", body
    fixtures["job_polls"] = polls
    fixtures["job_id"] = job_id

    get("/api/videos/vid0/poses")
    for frame in range(4):
        get(f"/api/videos/vid0/frames/{frame}/overlay")

    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(fixtures, indent=2) + "\n")
    print(f"wrote {out_path} ({len(fixtures['responses'])} responses, {len(polls)} polls)")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--out",
        type=Path,
        default=Path(__file__).resolve().parents[1]
        / "frontend"
        / "tests"
        / "fixtures"
        / "contract.json",
    )
    parser.add_argument("--dataset", type=Path, default=None, help="reuse an existing dataset root")
    args = parser.parse_args()
    if args.dataset is not None:
        root = args.dataset
    else:
        import tempfile

        tmp = tempfile.mkdtemp(prefix="contract_fixtures_")
        root = Path(tmp)
        build_dataset(root)
    record(root, args.out)


if __name__ == "__main__":
    main()
