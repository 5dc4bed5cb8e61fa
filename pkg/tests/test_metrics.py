import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posekit.errors import InvalidInputError
from posekit.geometry import Pose, Rotation
from posekit.losses import SymmetrySpec
from posekit.metrics import (
    Box3D,
    EvalRecord,
    evaluate,
    iou3d,
    iou3d_monte_carlo,
    pose_error,
    rotation_error_deg,
)

from conftest import random_rotation


def unit_box(center=(0.0, 0.0, 0.0), rotation=None):
    return Box3D(np.array(center), rotation or Rotation.identity(), np.ones(3))


def random_box(rng, spread=0.5):
    return Box3D(
        rng.uniform(-spread, spread, size=3),
        random_rotation(rng),
        rng.uniform(0.3, 1.5, size=3),
    )


def test_box_validation():
    with pytest.raises(InvalidInputError):
        Box3D(np.zeros(3), Rotation.identity(), np.array([1.0, 0.0, 1.0]))


def test_box_corners_and_edges():
    b = unit_box()
    c = b.corners()
    assert c.shape == (8, 3)
    assert np.allclose(np.abs(c), 0.5)
    e = b.edges()
    assert e.shape == (12, 2)
    # every edge has unit length on a unit box
    lengths = np.linalg.norm(c[e[:, 0]] - c[e[:, 1]], axis=1)
    assert np.allclose(lengths, 1.0)


def test_box_volume_and_contains():
    b = Box3D(np.zeros(3), Rotation.identity(), np.array([1.0, 2.0, 3.0]))
    assert b.volume() == pytest.approx(6.0)
    assert b.contains([[0.0, 0.9, 0.0]])[0]
    assert not b.contains([[0.0, 1.1, 0.0]])[0]


def test_iou_identical_is_one():
    a = unit_box()
    assert iou3d(a, a) == pytest.approx(1.0, abs=1e-9)


def test_iou_disjoint_is_zero():
    assert iou3d(unit_box(), unit_box(center=(5.0, 0.0, 0.0))) == 0.0


def test_iou_half_shift_hand_case():
    # unit cubes offset by half a side: intersection 1/2, union 3/2
    a = unit_box()
    b = unit_box(center=(0.5, 0.0, 0.0))
    assert abs(iou3d(a, b) - 1.0 / 3.0) < 1e-9


def test_iou_rotated_cube():
    # a cube rotated 45 deg about its own axis against itself: the
    # intersection is a regular octagonal prism, area 2 (sqrt(2) - 1) * h
    a = unit_box()
    b = unit_box(rotation=Rotation.from_axis_angle([0, 0, 1], np.pi / 4))
    inter = 2.0 * (np.sqrt(2.0) - 1.0)
    assert iou3d(a, b) == pytest.approx(inter / (2.0 - inter), abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_iou_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    a, b = random_box(rng), random_box(rng)
    ab = iou3d(a, b)
    assert 0.0 <= ab <= 1.0 + 1e-12
    assert ab == pytest.approx(iou3d(b, a), abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_iou_matches_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    a, b = random_box(rng), random_box(rng)
    exact = iou3d(a, b)
    mc = iou3d_monte_carlo(a, b, samples=100_000, seed=seed)
    assert abs(exact - mc) < 2e-2


def test_rotation_error_basic():
    r = Rotation.identity()
    assert rotation_error_deg(r, r) == pytest.approx(0.0, abs=1e-9)
    r10 = Rotation.from_axis_angle([1, 0, 0], np.radians(10.0))
    assert rotation_error_deg(r10, r) == pytest.approx(10.0, abs=1e-6)


def test_rotation_error_symmetry_collapses_axis_spin(rng):
    sym = SymmetrySpec(axis=np.array([0.0, 1.0, 0.0]), count=64)
    r_gt = random_rotation(rng)
    spun = Rotation.from_matrix(
        r_gt.as_matrix() @ Rotation.from_axis_angle([0, 1, 0], 1.234).as_matrix()
    )
    # without symmetry the spin is a large error; with it, below the
    # 360-step sweep resolution (0.5 deg half-step)
    assert rotation_error_deg(spun, r_gt) > 60.0
    assert rotation_error_deg(spun, r_gt, sym) < 0.51


def test_pose_error_translation_cm():
    p = Pose(Rotation.identity(), np.array([0.0, 0.0, 1.0]), np.ones(3) * 0.1)
    q = Pose(Rotation.identity(), np.array([0.03, 0.0, 1.0]), np.ones(3) * 0.1)
    assert pose_error(q, p)["translation_cm"] == pytest.approx(3.0)


def make_records(rot_deg=0.0, trans_cm=0.0, n=5, seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for _ in range(n):
        gt = Pose(random_rotation(rng), rng.uniform(-0.2, 0.2, 3) + [0, 0, 1.5], rng.uniform(0.1, 0.3, 3))
        axis = rng.normal(size=3)
        dr = Rotation.from_axis_angle(axis, np.radians(rot_deg))
        dt = rng.normal(size=3)
        dt = dt / np.linalg.norm(dt) * trans_cm / 100.0
        pred = Pose(dr.compose(gt.rotation), gt.translation + dt, gt.scale)
        records.append(EvalRecord(category="bottle", pred=pred, gt=gt))
    return records


def test_evaluate_perfect_predictions():
    table = evaluate(make_records())
    for metric, value in table["bottle"].items():
        assert value == 1.0, metric
    assert table["mean"] == table["bottle"]


def test_evaluate_brackets_rotation_thresholds():
    table = evaluate(make_records(rot_deg=7.0))["bottle"]
    assert table["5deg5cm"] == 0.0
    assert table["10deg5cm"] == 1.0


def test_evaluate_brackets_translation_thresholds():
    table = evaluate(make_records(trans_cm=3.0))["bottle"]
    assert table["5deg2cm"] == 0.0
    assert table["5deg5cm"] == 1.0


def test_evaluate_empty_raises():
    with pytest.raises(InvalidInputError):
        evaluate([])
