"""Generate the bundled categorical shape priors.

Writes OBJ meshes into src/posekit/assets/priors/. The category priors
are surfaces of revolution (or superellipsoid boxes) with ~1022
vertices, matching the decimated-prior budget the loader validates; the
cube and blob are small test shapes used by the fitting experiments.
All priors are scaled to a unit tight-box diagonal.

Run from the repository root:

    python3 scripts/make_priors.py
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from posekit.shape import Mesh, save_mesh

OUT = Path(__file__).resolve().parents[1] / "src" / "posekit" / "assets" / "priors"


def normalize(mesh: Mesh) -> Mesh:
    v = mesh.vertices - (mesh.vertices.max(axis=0) + mesh.vertices.min(axis=0)) / 2.0
    return Mesh(v / mesh.diagonal, mesh.faces)


def cube() -> Mesh:
    s = 0.5
    corners = np.array([[x, y, z] for x in (-s, s) for y in (-s, s) for z in (-s, s)])
    faces: list[list[int]] = []

    def quad(a, b, c, d):
        faces.extend([[a, b, c], [a, c, d]])

    quad(0, 1, 3, 2)
    quad(4, 6, 7, 5)
    quad(0, 4, 5, 1)
    quad(2, 3, 7, 6)
    quad(0, 2, 6, 4)
    quad(1, 5, 7, 3)
    return Mesh(corners, np.array(faces))


def blob(n_faces: int = 200, seed: int = 7) -> Mesh:
    """Convex blob whose hull has exactly n_faces triangles."""
    # a triangulated hull of v extreme points has 2v - 4 faces, so keep
    # exactly n_faces/2 + 2 of the extreme points and hull again
    n_keep = n_faces // 2 + 2
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(4 * n_keep, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    # strong low-order radial modulation plus anisotropic stretch: the
    # silhouette of a near-sphere barely constrains rotation, and this
    # mesh exists to exercise rotation recovery
    radii = (
        1.0
        + 0.45 * np.sin(3.0 * p[:, 0]) * np.cos(2.0 * p[:, 2])
        + 0.3 * p[:, 1]
        + 0.2 * np.sin(4.0 * p[:, 1] + 1.0)
    )
    p *= radii[:, None]
    p *= np.array([1.0, 0.55, 0.35])
    extreme = p[np.unique(ConvexHull(p).vertices)]
    keep = extreme[rng.choice(extreme.shape[0], size=n_keep, replace=False)]
    hull = ConvexHull(keep)
    assert hull.simplices.shape[0] == n_faces
    return Mesh(keep, hull.simplices)


def revolve(profile, rings: int = 31, segments: int = 34) -> Mesh:
    """Surface of revolution about +y. profile(h) -> radius, h in [0, 1].

    (rings - 1) * segments + 2 vertices: 1022 for the defaults.
    """
    verts = [[0.0, 0.0, 0.0]]
    for i in range(1, rings):
        h = i / rings
        r = profile(h)
        for j in range(segments):
            a = 2.0 * np.pi * j / segments
            verts.append([r * np.cos(a), h, r * np.sin(a)])
    verts.append([0.0, 1.0, 0.0])
    v = np.array(verts)

    faces = []
    top = len(verts) - 1

    def ring(i):  # first vertex index of ring i (1-based rings)
        return 1 + (i - 1) * segments

    for j in range(segments):
        faces.append([0, ring(1) + j, ring(1) + (j + 1) % segments])
    for i in range(1, rings - 1):
        for j in range(segments):
            a = ring(i) + j
            b = ring(i) + (j + 1) % segments
            c = ring(i + 1) + j
            d = ring(i + 1) + (j + 1) % segments
            faces.append([a, c, b])
            faces.append([b, c, d])
    for j in range(segments):
        faces.append([top, ring(rings - 1) + (j + 1) % segments, ring(rings - 1) + j])
    return Mesh(v, np.array(faces))


def superbox(nx: int = 14, rounding: float = 4.0) -> Mesh:
    """Superellipsoid box: convex hull of a rounded-cube point shell."""
    u = np.linspace(-1.0, 1.0, nx)
    g = np.stack(np.meshgrid(u, u, u, indexing="ij"), axis=-1).reshape(-1, 3)
    shell = g[np.abs(g).max(axis=1) > 0.99 - 1e-9]
    n = np.linalg.norm(shell, ord=rounding, axis=1, keepdims=True)
    p = shell / n
    hull = ConvexHull(p)
    return Mesh(p, hull.simplices)


PROFILES = {
    "bottle": lambda h: 0.30 if h < 0.62 else max(0.10, 0.30 - 0.55 * (h - 0.62)),
    "bowl": lambda h: 0.18 + 0.50 * np.sqrt(h),
    "can": lambda h: 0.35,
    "mug": lambda h: 0.38,
}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    save_mesh(normalize(cube()), OUT / "cube.obj")
    save_mesh(normalize(blob()), OUT / "blob.obj")
    for name, profile in PROFILES.items():
        save_mesh(normalize(revolve(profile)), OUT / f"{name}.obj")
    for name in ("camera", "laptop"):
        save_mesh(normalize(superbox()), OUT / f"{name}.obj")
    for f in sorted(OUT.glob("*.obj")):
        m = Mesh.__new__(Mesh)
        from posekit.shape import load_mesh

        m = load_mesh(f)
        print(f"{f.name}: {m.vertices.shape[0]} vertices, {m.faces.shape[0]} faces, "
              f"diagonal {m.diagonal:.4f}")


if __name__ == "__main__":
    main()
