import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posekit.errors import InvalidInputError
from posekit.geometry import Intrinsics, Rotation
from posekit.losses import (
    LossWeights,
    SampleDomain,
    SymmetrySpec,
    chamfer,
    chamfer_mean,
    deformation_reg,
    default_category_config,
    load_category_config,
    nocs_loss,
    rotation_pm_loss,
    silhouette_loss,
    silhouette_loss_grad,
    total_loss,
    translation_scale_loss,
)


@pytest.fixture
def model_points(rng):
    return rng.uniform(-0.5, 0.5, size=(64, 3))


def test_all_losses_zero_at_ground_truth(rng, model_points):
    r = Rotation(rng.normal(size=4))
    assert rotation_pm_loss(r, r, model_points, SymmetrySpec.none()) == 0.0
    ts = translation_scale_loss(
        {"o_x": 10.0, "o_y": 20.0, "t_z": 1.5, "S": [0.1, 0.2, 0.3]},
        {"o_x": 10.0, "o_y": 20.0, "t_z": 1.5, "S": [0.1, 0.2, 0.3]},
    )
    assert all(v == 0.0 for v in ts.values())
    pts = rng.normal(size=(32, 3))
    assert nocs_loss(pts, pts) == 0.0
    assert chamfer(pts, pts) == 0.0
    mask = rng.uniform(size=(16, 16))
    loss, _ = silhouette_loss(mask, mask)
    assert loss == 0.0
    assert deformation_reg(np.zeros((10, 3))) == 0.0


def test_smooth_l1_branch_values():
    # canonical branch points of the Huber-style transition at beta = 1:
    # quadratic side 0.5 * 0.5^2 = 0.125, linear side 2 - 0.5 = 1.5
    assert nocs_loss([[0.5, 0, 0]], [[0, 0, 0]], beta=1.0) == 0.125
    assert nocs_loss([[2.0, 0, 0]], [[0, 0, 0]], beta=1.0) == 1.5
    # default beta = 0.1 scales the transition accordingly
    assert nocs_loss([[0.05, 0, 0]], [[0, 0, 0]], beta=0.1) == pytest.approx(0.0125)
    assert nocs_loss([[0.2, 0, 0]], [[0, 0, 0]], beta=0.1) == pytest.approx(0.15)


def test_indicator_gating_exact(rng):
    # real-domain totals must be bit-identical for any supervised values
    weights = LossWeights()
    base = {"pose": 0.0, "nocs": 0.0, "recon": 0.0, "mask": 0.37}
    wild = {"pose": 1e6, "nocs": -42.0, "recon": 3.14, "mask": 0.37}
    t0, b0 = total_loss(base, weights, SampleDomain.REAL)
    t1, b1 = total_loss(wild, weights, SampleDomain.REAL)
    assert t0 == t1
    assert b0 == b1
    # synthetic-domain totals do include them
    t2, _ = total_loss(wild, weights, SampleDomain.SYNTHETIC)
    assert t2 != t1


def test_total_loss_weighting():
    weights = LossWeights(lambda1=0.2, lambda2=2.0, lambda3=5.0, lambda4=0.2, lambda_reg=0.01)
    total, breakdown = total_loss(
        {"pose": 1.0, "nocs": 1.0, "recon": 1.0, "mask": 1.0, "reg": 1.0},
        weights,
        SampleDomain.SYNTHETIC,
    )
    assert total == pytest.approx(0.2 + 2.0 + 5.0 + 0.2 + 0.01)
    assert breakdown["recon"] == 5.0


def test_total_loss_validation():
    with pytest.raises(InvalidInputError):
        total_loss({"pose": 1.0, "nocs": 1.0, "recon": 1.0})
    with pytest.raises(InvalidInputError):
        total_loss({"pose": np.inf, "nocs": 0.0, "recon": 0.0, "mask": 0.0})


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2 * np.pi, allow_nan=False))
def test_symmetry_invariance_within_discretization(seed, angle):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.5, 0.5, size=(128, 3))
    sym = SymmetrySpec(axis=np.array([0.0, 1.0, 0.0]), count=64)
    r_gt = Rotation(rng.normal(size=4))
    spun = Rotation.from_matrix(
        r_gt.as_matrix() @ Rotation.from_axis_angle([0, 1, 0], angle).as_matrix()
    )
    loss = rotation_pm_loss(spun, r_gt, pts, sym)
    # worst-case residual: half a discretization step of arc on the
    # largest off-axis radius
    r_perp = np.linalg.norm(pts[:, [0, 2]], axis=1).max()
    bound = 2.0 * np.sin(np.pi / 64) * r_perp
    assert loss <= bound + 1e-12


def test_asymmetric_loss_sees_axis_spin(rng, model_points):
    r_gt = Rotation(rng.normal(size=4))
    spun = Rotation.from_matrix(
        r_gt.as_matrix() @ Rotation.from_axis_angle([0, 1, 0], 0.8).as_matrix()
    )
    assert rotation_pm_loss(spun, r_gt, model_points, SymmetrySpec.none()) > 0.05


def test_translation_scale_loss_decouples_T(rng):
    k = Intrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)
    out = translation_scale_loss(
        {"o_x": 320.0, "o_y": 240.0, "t_z": 2.0, "S": [0.1, 0.1, 0.1]},
        {"T": [0.0, 0.0, 2.0], "S": [0.1, 0.1, 0.1]},
        intrinsics=k,
    )
    assert out["L_center"] == 0.0 and out["L_z"] == 0.0 and out["L_S"] == 0.0
    with pytest.raises(InvalidInputError):
        translation_scale_loss(
            {"o_x": 0.0, "o_y": 0.0, "t_z": 1.0, "S": [0.1] * 3},
            {"T": [0.0, 0.0, 2.0], "S": [0.1] * 3},
        )


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chamfer_symmetric_and_positive(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(20, 3))
    y = rng.normal(size=(35, 3))
    assert chamfer(x, y) == chamfer(y, x)
    assert chamfer(x, y) > 0.0
    assert chamfer_mean(x, y) == pytest.approx(
        ((np.linalg.norm(x[:, None] - y[None], axis=2).min(axis=1) ** 2).mean()
         + (np.linalg.norm(y[:, None] - x[None], axis=2).min(axis=1) ** 2).mean())
    )


def test_chamfer_subset_direction():
    # a subset has zero one-directional distance; chamfer still sees the rest
    y = np.random.default_rng(0).normal(size=(30, 3))
    x = y[:10]
    assert chamfer(x, y) > 0.0


def test_silhouette_loss_bounds_and_degenerate(rng):
    r = rng.uniform(size=(8, 8))
    t = rng.uniform(size=(8, 8)) > 0.5
    loss, degenerate = silhouette_loss(r, t)
    assert 0.0 <= loss <= 1.0 and not degenerate
    loss0, degenerate0 = silhouette_loss(np.zeros((4, 4)), np.zeros((4, 4)))
    assert loss0 == 0.0 and degenerate0
    with pytest.raises(InvalidInputError):
        silhouette_loss(np.zeros((4, 4)), np.zeros((5, 5)))


def test_silhouette_loss_grad_matches_fd(rng):
    r = rng.uniform(0.05, 0.95, size=(6, 6))
    t = rng.uniform(size=(6, 6)) > 0.5
    loss, grad = silhouette_loss_grad(r, t)
    h = 1e-7
    for idx in [(0, 0), (2, 3), (5, 5)]:
        rp = r.copy()
        rp[idx] += h
        rm = r.copy()
        rm[idx] -= h
        fd = (silhouette_loss_grad(rp, t)[0] - silhouette_loss_grad(rm, t)[0]) / (2 * h)
        assert grad[idx] == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_deformation_reg_scales_linearly(rng):
    d = rng.normal(size=(50, 3))
    assert deformation_reg(2.0 * d) == pytest.approx(2.0 * deformation_reg(d))


def test_default_category_config():
    cfg = default_category_config()
    for cat in ("bottle", "bowl", "can"):
        assert cfg.symmetry(cat).axis is not None
        assert cfg.symmetry(cat).count == 64
    assert cfg.symmetry("mug").axis is None
    assert cfg.weights.lambda3 == 5.0


def test_load_category_config(tmp_path):
    p = tmp_path / "cats.cfg"
    p.write_text(
        "# comment\nlambda1 = 0.5\nbeta = 0.2\n"
        "symmetry.bottle = axis 0 1 0 32\nsymmetry.mug = none\n"
    )
    cfg = load_category_config(p)
    assert cfg.weights.lambda1 == 0.5
    assert cfg.weights.beta == 0.2
    assert cfg.symmetry("bottle").count == 32
    assert cfg.symmetry("mug").axis is None

    p.write_text("nonsense = 1\n")
    with pytest.raises(InvalidInputError):
        load_category_config(p)


def test_bundled_config_matches_defaults():
    from posekit.shape import assets_dir

    cfg = load_category_config(assets_dir() / "categories.cfg")
    default = default_category_config()
    assert cfg.weights == default.weights
    for cat in ("bottle", "bowl", "can", "camera", "laptop", "mug"):
        assert (cfg.symmetry(cat).axis is None) == (default.symmetry(cat).axis is None)
