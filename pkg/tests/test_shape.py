import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from posekit.errors import InvalidInputError
from posekit.shape import (
    Deformation,
    Mesh,
    apply_deformation,
    load_mesh,
    load_prior,
    save_mesh,
)

CATEGORIES = ("bottle", "bowl", "camera", "can", "laptop", "mug")


def test_mesh_validation():
    with pytest.raises(InvalidInputError):
        Mesh(np.zeros((2, 3)), np.zeros((0, 3)))
    with pytest.raises(InvalidInputError):
        Mesh(np.zeros((4, 3)), np.array([[0, 1, 7]]))
    with pytest.raises(InvalidInputError):
        Mesh(np.array([[0, 0, np.nan], [0, 0, 1], [1, 0, 0]]), np.array([[0, 1, 2]]))


def test_diagonal_and_areas(square_mesh):
    assert np.isclose(square_mesh.diagonal, np.sqrt(2.0))
    assert np.allclose(square_mesh.face_areas(), 0.5)


def test_obj_round_trip(tmp_path, rng):
    mesh = Mesh(rng.normal(size=(20, 3)), rng.integers(0, 20, size=(30, 3)))
    mesh = Mesh(mesh.vertices, mesh.faces[mesh.face_areas() > 1e-12])
    save_mesh(mesh, tmp_path / "m.obj")
    back = load_mesh(tmp_path / "m.obj")
    assert np.allclose(back.vertices, mesh.vertices, atol=1e-7)
    assert np.array_equal(back.faces, mesh.faces)


def test_load_mesh_quad_triangulation(tmp_path):
    (tmp_path / "quad.obj").write_text(
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"
    )
    mesh = load_mesh(tmp_path / "quad.obj")
    assert mesh.faces.shape == (2, 3)


def test_load_mesh_drops_degenerate_and_reports_errors(tmp_path):
    (tmp_path / "deg.obj").write_text(
        "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 3\nf 1 2 4\n"
    )
    mesh = load_mesh(tmp_path / "deg.obj")
    assert mesh.faces.shape == (1, 3)  # collinear face dropped

    (tmp_path / "bad.obj").write_text("v 0 0\n")
    with pytest.raises(InvalidInputError):
        load_mesh(tmp_path / "bad.obj")


@pytest.mark.parametrize("category", CATEGORIES)
def test_bundled_priors_load(category):
    mesh = load_prior(category)
    assert abs(mesh.vertices.shape[0] - 1024) <= 16
    assert mesh.diagonal <= 1.0 + 1e-3
    assert mesh.faces.min() >= 0


def test_prior_vertex_budget_enforced(tmp_path):
    save_mesh(Mesh(np.eye(3) * 0.5, np.array([[0, 1, 2]])), tmp_path / "tiny.obj")
    with pytest.raises(InvalidInputError):
        load_prior("tiny", path=tmp_path / "tiny.obj")
    assert load_prior("tiny", path=tmp_path / "tiny.obj", expected_vertices=None)


def test_prior_canonical_bound(tmp_path):
    save_mesh(Mesh(np.eye(3) * 2.0, np.array([[0, 1, 2]])), tmp_path / "big.obj")
    with pytest.raises(InvalidInputError):
        load_prior("big", path=tmp_path / "big.obj", expected_vertices=None)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_deformation_preserves_connectivity(seed):
    rng = np.random.default_rng(seed)
    mesh = Mesh(rng.normal(size=(10, 3)), rng.integers(0, 10, size=(6, 3)))
    delta = Deformation(rng.normal(scale=0.01, size=(10, 3)))
    out = apply_deformation(mesh, delta)
    assert np.array_equal(out.faces, mesh.faces)
    assert np.allclose(out.vertices - mesh.vertices, delta.deltas)


def test_deformation_alignment_checked(square_mesh):
    with pytest.raises(InvalidInputError):
        apply_deformation(square_mesh, Deformation(np.zeros((3, 3))))
