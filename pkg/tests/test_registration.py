import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posekit.errors import RegistrationFailedError
from posekit.geometry import PointCloud, Pose, Rotation
from posekit.registration import (
    IcpConfig,
    RigidTransform,
    icp_colored,
    propagate_clouds,
)

from conftest import random_rotation


def small_transform(rng, angle_deg=3.0, shift=0.01):
    axis = rng.normal(size=3)
    return RigidTransform(
        Rotation.from_axis_angle(axis, np.radians(angle_deg)),
        rng.normal(size=3) * shift,
    )


def structured_cloud(rng, n=600):
    # a noisy box surface: structured enough for unambiguous registration
    pts = rng.uniform(-0.1, 0.1, size=(n, 3))
    axis = rng.integers(0, 3, size=n)
    side = rng.choice([-0.1, 0.1], size=n)
    pts[np.arange(n), axis] = side
    colors = np.clip(pts / 0.2 + 0.5, 0.0, 1.0)
    return PointCloud(pts + [0, 0, 1.0], colors=colors)


def transform_error(t: RigidTransform, ref: RigidTransform):
    rel = t.compose(ref.inverse())
    cos = np.clip((np.trace(rel.rotation.as_matrix()) - 1.0) / 2.0, -1.0, 1.0)
    return np.degrees(np.arccos(cos)), np.linalg.norm(rel.translation)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rigid_transform_algebra(seed):
    rng = np.random.default_rng(seed)
    a = RigidTransform(random_rotation(rng), rng.normal(size=3))
    b = RigidTransform(random_rotation(rng), rng.normal(size=3))
    pts = rng.normal(size=(10, 3))
    assert np.allclose(a.compose(b).apply(pts), a.apply(b.apply(pts)))
    assert np.allclose(a.inverse().apply(a.apply(pts)), pts)
    assert np.allclose(RigidTransform.identity().apply(pts), pts)


def test_apply_to_pose_preserves_scale(rng):
    t = RigidTransform(random_rotation(rng), rng.normal(size=3))
    pose = Pose(random_rotation(rng), np.array([0.0, 0.0, 1.0]), np.array([0.1, 0.2, 0.3]))
    moved = t.apply_to_pose(pose)
    assert np.array_equal(moved.scale, pose.scale)
    # the pose origin moves exactly like a point
    assert np.allclose(moved.translation, t.apply(pose.translation[None])[0])


def test_icp_recovers_small_transform(rng):
    src = structured_cloud(rng)
    t_true = small_transform(rng)
    dst = PointCloud(t_true.apply(src.points), colors=src.colors)
    res = icp_colored(src, dst)
    rot_err, trans_err = transform_error(res.transform, t_true)
    assert rot_err < 0.1 and trans_err < 1e-3
    assert res.rms < 1e-6


def test_icp_trimming_rejects_outliers(rng):
    src = structured_cloud(rng)
    t_true = small_transform(rng)
    moved = t_true.apply(src.points)
    # corrupt 20% of destination points
    n_out = int(0.2 * len(src))
    idx = rng.choice(len(src), size=n_out, replace=False)
    moved[idx] += rng.uniform(0.02, 0.04, size=(n_out, 3))
    dst = PointCloud(moved, colors=src.colors)
    res = icp_colored(src, dst, cfg=IcpConfig(trim_fraction=0.3))
    rot_err, trans_err = transform_error(res.transform, t_true)
    assert rot_err < 0.5 and trans_err < 2e-3


def test_icp_requires_enough_points(rng):
    tiny = PointCloud(rng.normal(size=(10, 3)))
    big = PointCloud(rng.normal(size=(100, 3)))
    with pytest.raises(RegistrationFailedError):
        icp_colored(tiny, big)


def test_icp_fails_without_correspondences(rng):
    a = structured_cloud(rng)
    b = PointCloud(a.points + 10.0, colors=a.colors)
    with pytest.raises(RegistrationFailedError):
        icp_colored(a, b)


def test_propagate_clouds_tracks_motion(rng):
    base = structured_cloud(rng)
    pose0 = Pose(Rotation.identity(), np.array([0.0, 0.0, 1.0]), np.full(3, 0.2))
    clouds = {}
    steps = {}
    step = RigidTransform(
        Rotation.from_axis_angle([0, 1, 0], np.radians(1.0)), np.array([0.002, 0, 0])
    )
    t = RigidTransform.identity()
    for f in range(8):
        clouds[f] = PointCloud(t.apply(base.points), colors=base.colors)
        steps[f] = t
        t = step.compose(t)
    result = propagate_clouds(clouds, {0: pose0})
    assert result.unpropagated == []
    for f in range(1, 8):
        expect = steps[f].apply_to_pose(pose0)
        got = result.poses[f]
        rot_err, _ = transform_error(
            RigidTransform(got.rotation, got.translation),
            RigidTransform(expect.rotation, expect.translation),
        )
        assert rot_err < 0.1
        assert np.linalg.norm(got.translation - expect.translation) < 1e-3
    assert result.drift_rms[0] == 0.0
    assert all(result.drift_rms[f] < 1e-3 for f in range(1, 8))


def test_propagate_clouds_reports_failures(rng):
    base = structured_cloud(rng)
    pose0 = Pose(Rotation.identity(), np.array([0.0, 0.0, 1.0]), np.full(3, 0.2))
    clouds = {0: base, 1: base, 2: PointCloud(base.points + 10.0, colors=base.colors)}
    result = propagate_clouds(clouds, {0: pose0})
    assert result.unpropagated == [2]
    assert 1 in result.poses and 2 not in result.poses


def test_propagate_requires_keyframe(rng):
    with pytest.raises(RegistrationFailedError):
        propagate_clouds({0: structured_cloud(rng)}, {})
