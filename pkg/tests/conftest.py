import numpy as np
import pytest

from normalprior.mesh import build_mesh


@pytest.fixture
def tetra():
    """Regular-ish tetrahedron with outward CCW faces."""
    positions = np.array(
        [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]
    )
    faces = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
    return build_mesh(positions, faces)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
