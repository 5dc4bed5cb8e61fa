"""Command-line umbrella for the toolkit.

Exit codes: 0 on success, 2 on validation errors (bad arguments or
inputs violating documented preconditions), 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, PosekitError


def _load_points(path: str) -> np.ndarray:
    pts = np.loadtxt(path, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidInputError(f"{path}: expected N x 3 whitespace-separated points")
    return pts


def _load_intrinsics(path: str):
    from .dataio import intrinsics_from_json

    return intrinsics_from_json(json.loads(Path(path).read_text()))


def _load_pose(path: str):
    from .dataio import pose_from_json

    return pose_from_json(json.loads(Path(path).read_text()))


def _category_config(args):
    from .losses import default_category_config, load_category_config

    if args.config:
        return load_category_config(args.config)
    return default_category_config()


def cmd_solve_umeyama(args) -> int:
    from .dataio import pose_to_json
    from .umeyama import RansacConfig, solve_similarity, solve_similarity_robust

    src = _load_points(args.src)
    dst = _load_points(args.dst)
    if args.ransac:
        result, inliers = solve_similarity_robust(
            src, dst, RansacConfig(inlier_threshold=args.inlier_threshold, seed=args.seed)
        )
    else:
        result, inliers = solve_similarity(src, dst), None
    out = {
        "pose": pose_to_json(result.pose),
        "scale_factor": result.scale_factor,
        "residual_rms": result.residual_rms,
    }
    if inliers is not None:
        out["inliers"] = int(inliers.size)
    print(json.dumps(out, indent=1))
    return 0


def cmd_fit(args) -> int:
    from PIL import Image

    from .dataio import pose_to_json
    from .fit import FitConfig, fit_pose, fit_pose_and_shape
    from .shape import load_mesh

    target = np.asarray(Image.open(args.target).convert("L")) > 127
    mesh = load_mesh(args.mesh)
    intr = _load_intrinsics(args.intrinsics)
    init = _load_pose(args.init)
    cfg = FitConfig(max_iters=args.max_iters)
    runner = fit_pose_and_shape if args.shape else fit_pose
    result = runner(target, mesh, intr, init, cfg)
    final_iou = None
    if result.final_mask is not None:
        hard = result.final_mask >= 0.5
        union = (hard | target).sum()
        final_iou = float((hard & target).sum() / union) if union else 1.0
    print(
        json.dumps(
            {
                "pose": pose_to_json(result.final),
                "loss": result.loss_trajectory[-1],
                "silhouette_iou": final_iou,
                "iterations": result.iterations,
                "converged": result.converged,
                "diverged": result.diverged,
            },
            indent=1,
        )
    )
    return 0


def cmd_eval(args) -> int:
    from .dataio import pose_from_json
    from .metrics import EvalRecord, evaluate

    payload = json.loads(Path(args.records).read_text())
    if not isinstance(payload, list):
        raise InvalidInputError(f"{args.records}: expected a JSON list of records")
    cfg = _category_config(args)
    records = [
        EvalRecord(
            category=rec["category"],
            pred=pose_from_json(rec["pred"]),
            gt=pose_from_json(rec["gt"]),
            symmetry=cfg.symmetry(rec["category"]),
        )
        for rec in payload
    ]
    table = evaluate(records)
    metrics = list(next(iter(table.values())).keys())
    width = max(len(c) for c in table) + 2
    print("".join([" " * width] + [f"{m:>10}" for m in metrics]))
    for cat, row in table.items():
        print("".join([f"{cat:<{width}}"] + [f"{row[m]:>10.3f}" for m in metrics]))
    return 0


def cmd_propagate(args) -> int:
    from .dataio import load_video, write_annotations
    from .registration import IcpConfig, propagate

    video = load_video(args.video)
    keyframes = video.keyframes()
    if not keyframes:
        raise InvalidInputError(f"{args.video}: no keyframe annotations to propagate")
    cfg = IcpConfig(trim_fraction=args.trim_fraction, color_weight=args.color_weight)
    result = propagate(video, keyframes, cfg=cfg, seed=args.seed)
    annotations = {
        f: {"pose": p, "is_keyframe": f in keyframes} for f, p in result.poses.items()
    }
    write_annotations(video.root, annotations)
    print(
        f"propagated {len(result.poses) - len(keyframes)} frames from "
        f"{len(keyframes)} keyframes; {len(result.unpropagated)} unpropagated"
    )
    for f in result.unpropagated:
        print(f"  frame {f:06d}: registration failed")
    return 0


def cmd_synth(args) -> int:
    from .dataio import SceneSpec, synth_generate, write_video
    from .geometry import Intrinsics, Pose, Rotation
    from .shape import load_prior

    mesh = load_prior(args.prior, expected_vertices=None)
    intr = Intrinsics(
        fx=args.focal, fy=args.focal, cx=args.width / 2, cy=args.height / 2,
        width=args.width, height=args.height,
    )
    rng = np.random.default_rng(args.seed)
    base = Rotation(rng.normal(size=4))
    traj = []
    for i in range(args.frames):
        spin = Rotation.from_axis_angle([0.3, 1.0, 0.2], np.radians(args.deg_per_frame * i))
        t = np.array([0.0, 0.0, args.depth]) + np.array([args.mm_per_frame / 1000.0, 0.0, 0.0]) * i
        traj.append(Pose(spin.compose(base), t, np.full(3, args.size / np.sqrt(3.0))))
    spec = SceneSpec(
        mesh=mesh,
        trajectory=traj,
        intrinsics=intr,
        category=args.prior,
        depth_noise_mm=args.depth_noise_mm,
        outlier_fraction=args.outlier_fraction,
    )
    root = write_video(synth_generate(spec, seed=args.seed), args.out, video_id=args.id,
                       keyframe_stride=args.keyframe_stride)
    print(f"wrote {args.frames} frames to {root}")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_gradcheck

    report = run_gradcheck(
        n_poses=args.poses, n_faces=args.faces, sigma=args.sigma, seed=args.seed
    )
    for i, score in enumerate(report.per_pose):
        print(f"pose {i}: max relative error {score:.3e}")
    print(f"worst: {report.worst_score:.3e} ({'pass' if report.passed else 'FAIL'})")
    return 0 if report.passed else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .annoserve import create_app

    app = create_app(Path(args.root))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posekit", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="global RNG seed")
    parser.add_argument("--config", default=None, help="category config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-umeyama", help="similarity transform from correspondences")
    p.add_argument("--src", required=True, help="N x 3 canonical-space points (text)")
    p.add_argument("--dst", required=True, help="N x 3 observed points (text)")
    p.add_argument("--ransac", action="store_true", help="robust estimation")
    p.add_argument("--inlier-threshold", type=float, default=0.01)
    p.set_defaults(func=cmd_solve_umeyama)

    p = sub.add_parser("fit", help="render-and-compare pose fitting")
    p.add_argument("--target", required=True, help="binary target mask PNG")
    p.add_argument("--mesh", required=True, help="canonical mesh OBJ")
    p.add_argument("--intrinsics", required=True, help="intrinsics JSON")
    p.add_argument("--init", required=True, help="initial pose JSON")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--shape", action="store_true", help="also fit a deformation field")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="IOU / degree-cm accuracy table")
    p.add_argument("--records", required=True, help="JSON list of {category, pred, gt}")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("propagate", help="propagate keyframe poses across a video")
    p.add_argument("--video", required=True, help="video directory")
    p.add_argument("--trim-fraction", type=float, default=0.2)
    p.add_argument("--color-weight", type=float, default=0.1)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("synth", help="generate a synthetic RGBD video")
    p.add_argument("--out", required=True, help="dataset root directory")
    p.add_argument("--id", default="synth-000", help="video id")
    p.add_argument("--prior", default="blob", help="bundled prior name")
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--focal", type=float, default=280.0)
    p.add_argument("--depth", type=float, default=0.9, help="object depth (m)")
    p.add_argument("--size", type=float, default=0.25, help="object diagonal (m)")
    p.add_argument("--deg-per-frame", type=float, default=1.0)
    p.add_argument("--mm-per-frame", type=float, default=2.0)
    p.add_argument("--depth-noise-mm", type=float, default=0.0)
    p.add_argument("--outlier-fraction", type=float, default=0.0)
    p.add_argument("--keyframe-stride", type=int, default=50)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--poses", type=int, default=10)
    p.add_argument("--faces", type=int, default=20)
    p.add_argument("--sigma", type=float, default=4.0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("serve", help="annotation HTTP service")
    p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PosekitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
