import numpy as np
import pytest

from posekit.geometry import Intrinsics, Pose, Rotation
from posekit.shape import Mesh


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def intr64():
    return Intrinsics(fx=64.0, fy=64.0, cx=32.0, cy=32.0, width=64, height=64)


@pytest.fixture
def square_mesh():
    # unit square in the z=0 plane, two triangles
    v = np.array(
        [[-0.5, -0.5, 0.0], [0.5, -0.5, 0.0], [0.5, 0.5, 0.0], [-0.5, 0.5, 0.0]]
    )
    f = np.array([[0, 1, 2], [0, 2, 3]])
    return Mesh(v, f)


@pytest.fixture
def front_pose():
    return Pose(Rotation.identity(), np.array([0.0, 0.0, 2.0]), np.ones(3))


def random_rotation(rng):
    return Rotation(rng.normal(size=4))
