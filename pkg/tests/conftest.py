import numpy as np
import pytest

from cvtremesh import shapes


@pytest.fixture
def square_mesh():
    return shapes.unit_square()


@pytest.fixture
def cube_mesh():
    return shapes.cube()


@pytest.fixture
def grid_mesh():
    return shapes.flat_grid(3, 3)


@pytest.fixture(scope="session")
def ico2_mesh():
    return shapes.icosphere(2)


@pytest.fixture(scope="session")
def ico3_mesh():
    return shapes.icosphere(3)


@pytest.fixture(scope="session")
def rounded_cube_mesh():
    return shapes.rounded_cube(10, 0.2)


def assert_point_sets_close(a, b, tol):
    """Set equality of two 3D point clouds up to pairing within ``tol``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    assert len(a) == len(b), f"point counts differ: {len(a)} vs {len(b)}"
    if len(a) == 0:
        return
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    assert d.min(axis=1).max() <= tol, f"unmatched point (gap {d.min(axis=1).max():.3e})"
    assert d.min(axis=0).max() <= tol, f"unmatched point (gap {d.min(axis=0).max():.3e})"


def dedup_points(pts, tol):
    """Collapse near-coincident points; order-stable."""
    out = []
    for p in np.asarray(pts, dtype=np.float64):
        if not any(np.linalg.norm(p - q) <= tol for q in out):
            out.append(p)
    return np.array(out) if out else np.empty((0, 3))
