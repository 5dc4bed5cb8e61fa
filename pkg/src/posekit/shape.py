"""Canonical-frame mesh handling: priors, OBJ-style I/O, deformation."""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

__all__ = ["Mesh", "Deformation", "apply_deformation", "load_mesh", "load_prior", "save_mesh"]


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh in the canonical (NOCS) frame."""

    vertices: np.ndarray  # N_v x 3
    faces: np.ndarray  # F x 3 vertex indices

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if v.shape[0] < 3:
            raise InvalidInputError("mesh needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("mesh has non-finite vertices")
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise InvalidInputError("face index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def diagonal(self) -> float:
        """Tight-box diagonal length."""
        extent = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(extent))

    def face_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(frozen=True)
class Deformation:
    """Per-vertex offsets, index-aligned with a prior mesh."""

    deltas: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(d)):
            raise InvalidInputError("deformation has non-finite entries")
        object.__setattr__(self, "deltas", d)


def apply_deformation(prior: Mesh, delta: Deformation) -> Mesh:
    """Vertex-wise addition; connectivity unchanged."""
    if delta.deltas.shape[0] != prior.vertices.shape[0]:
        raise InvalidInputError(
            f"deformation has {delta.deltas.shape[0]} vertices, prior has "
            f"{prior.vertices.shape[0]}"
        )
    return Mesh(prior.vertices + delta.deltas, prior.faces)


def _drop_degenerate_faces(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    if faces.size == 0:
        return faces
    a, b, c = (vertices[faces[:, i]] for i in range(3))
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    return faces[areas > 1e-12]


def load_mesh(path) -> Mesh:
    """Parse a Wavefront-style ASCII mesh (v/f records only).

    Polygonal faces are fan-triangulated; degenerate faces are dropped.
    """
    path = Path(path)
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise InvalidInputError(f"{path}:{lineno}: malformed vertex record")
            try:
                xyz = [float(p) for p in parts[1:4]]
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
            if not all(np.isfinite(xyz)):
                raise InvalidInputError(f"{path}:{lineno}: non-finite vertex")
            vertices.append(xyz)
        elif parts[0] == "f":
            try:
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from exc
            if len(idx) < 3:
                raise InvalidInputError(f"{path}:{lineno}: face with < 3 vertices")
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
    if len(vertices) < 3:
        raise InvalidInputError(f"{path}: mesh has fewer than 3 vertices")
    v = np.array(vertices, dtype=np.float64)
    f = _drop_degenerate_faces(v, np.array(faces, dtype=np.int64).reshape(-1, 3))
    return Mesh(v, f)


def save_mesh(mesh: Mesh, path) -> None:
    lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


def assets_dir() -> Path:
    return Path(importlib.resources.files("posekit") / "assets")


def load_prior(
    category: str,
    path=None,
    expected_vertices: int | None = 1024,
    vertex_tolerance: int = 16,
) -> Mesh:
    """Load a categorical shape prior and validate its canonical framing.

    Priors are decimated offline; the loader checks the vertex budget
    (pass expected_vertices=None to relax, e.g. for tiny test assets) and
    that the tight-box diagonal does not exceed the canonical bound.
    """
    if path is None:
        path = assets_dir() / "priors" / f"{category}.obj"
    mesh = load_mesh(path)
    n = mesh.vertices.shape[0]
    if expected_vertices is not None and abs(n - expected_vertices) > vertex_tolerance:
        raise InvalidInputError(
            f"prior '{category}' has {n} vertices, expected ~{expected_vertices}"
        )
    if mesh.diagonal > 1.0 + 1e-3:
        raise InvalidInputError(
            f"prior '{category}' exceeds canonical bound: diagonal {mesh.diagonal:.4f}"
        )
    return mesh
