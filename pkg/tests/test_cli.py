import json

import numpy as np
import pytest
from PIL import Image

from posekit.cli import main
from posekit.dataio import intrinsics_to_json, load_video, pose_to_json
from posekit.geometry import Intrinsics, Pose, Rotation
from posekit.shape import load_prior, save_mesh
from posekit.softrender import RenderConfig, hard_mask, render_silhouette

from conftest import random_rotation


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_points(path, pts):
    np.savetxt(path, pts)


def test_solve_umeyama_exact(tmp_path, capsys, rng):
    src = rng.uniform(-0.5, 0.5, size=(40, 3))
    r = random_rotation(rng).as_matrix()
    dst = 1.7 * src @ r.T + np.array([0.1, -0.2, 0.9])
    write_points(tmp_path / "src.txt", src)
    write_points(tmp_path / "dst.txt", dst)
    code, out, _ = run(
        capsys, "solve-umeyama", "--src", str(tmp_path / "src.txt"), "--dst", str(tmp_path / "dst.txt")
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["scale_factor"] == pytest.approx(1.7, abs=1e-9)
    assert payload["residual_rms"] < 1e-9


def test_solve_umeyama_ransac_reports_inliers(tmp_path, capsys, rng):
    src = rng.uniform(-0.5, 0.5, size=(60, 3))
    dst = 1.2 * src + np.array([0.0, 0.0, 1.0])
    dst[:6] += 1.0  # outliers
    write_points(tmp_path / "src.txt", src)
    write_points(tmp_path / "dst.txt", dst)
    code, out, _ = run(
        capsys, "solve-umeyama", "--src", str(tmp_path / "src.txt"),
        "--dst", str(tmp_path / "dst.txt"), "--ransac",
    )
    assert code == 0
    assert json.loads(out)["inliers"] == 54


def test_validation_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2\n3 4\n")
    code, _, err = run(capsys, "solve-umeyama", "--src", str(bad), "--dst", str(bad))
    assert code == 2
    assert "error:" in err


def test_missing_file_exits_1(tmp_path, capsys):
    code, _, err = run(
        capsys, "solve-umeyama", "--src", str(tmp_path / "none.txt"), "--dst", str(tmp_path / "none.txt")
    )
    assert code == 1
    assert "error:" in err


def test_fit_command(tmp_path, capsys, rng):
    mesh = load_prior("cube", expected_vertices=None)
    save_mesh(mesh, tmp_path / "mesh.obj")
    intr = Intrinsics(fx=64.0, fy=64.0, cx=32.0, cy=32.0, width=64, height=64)
    (tmp_path / "intr.json").write_text(json.dumps(intrinsics_to_json(intr)))
    gt = Pose(random_rotation(rng), np.array([0.0, 0.0, 2.0]), np.full(3, 0.25))
    mask = hard_mask(render_silhouette(mesh, gt, intr, RenderConfig(sigma=0.1)))
    Image.fromarray((mask * 255).astype(np.uint8)).save(tmp_path / "target.png")
    (tmp_path / "init.json").write_text(json.dumps(pose_to_json(gt)))
    code, out, _ = run(
        capsys, "fit", "--target", str(tmp_path / "target.png"), "--mesh", str(tmp_path / "mesh.obj"),
        "--intrinsics", str(tmp_path / "intr.json"), "--init", str(tmp_path / "init.json"),
        "--max-iters", "30",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["silhouette_iou"] > 0.9
    assert payload["iterations"] <= 30


def test_eval_command(tmp_path, capsys, rng):
    records = []
    for _ in range(4):
        gt = pose_to_json(Pose(random_rotation(rng), np.array([0.0, 0.0, 1.5]), np.full(3, 0.2)))
        records.append({"category": "can", "pred": gt, "gt": gt})
    (tmp_path / "records.json").write_text(json.dumps(records))
    code, out, _ = run(capsys, "eval", "--records", str(tmp_path / "records.json"))
    assert code == 0
    assert "can" in out and "mean" in out
    assert "1.000" in out and "IoU@0.5" in out


def test_synth_then_propagate(tmp_path, capsys):
    code, out, _ = run(
        capsys, "synth", "--out", str(tmp_path), "--id", "v0", "--frames", "4",
        "--keyframe-stride", "100",
    )
    assert code == 0
    assert "wrote 4 frames" in out
    video = load_video(tmp_path / "v0")
    assert video.frame_count == 4
    assert sorted(video.keyframes()) == [0]

    # drop the non-keyframe annotations, then recover them by propagation
    kf = video.keyframes()
    from posekit.dataio import write_annotations

    write_annotations(video.root, {0: {"pose": kf[0], "is_keyframe": True}})
    code, out, _ = run(capsys, "propagate", "--video", str(tmp_path / "v0"))
    assert code == 0
    assert "propagated 3 frames" in out
    after = load_video(tmp_path / "v0")
    assert sorted(after.poses()) == [0, 1, 2, 3]


def test_propagate_without_keyframes_exits_2(tmp_path, capsys):
    run(capsys, "synth", "--out", str(tmp_path), "--id", "v1", "--frames", "2",
        "--keyframe-stride", "100")
    from posekit.dataio import write_annotations

    write_annotations(tmp_path / "v1", {})
    code, _, err = run(capsys, "propagate", "--video", str(tmp_path / "v1"))
    assert code == 2
    assert "no keyframe" in err


def test_gradcheck_command(capsys):
    code, out, _ = run(capsys, "gradcheck", "--poses", "1")
    assert code == 0
    assert "pass" in out
