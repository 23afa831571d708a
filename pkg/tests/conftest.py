import numpy as np
import pytest

from polylab.geometry import HPolytope, VertexSet


@pytest.fixture
def cube3() -> HPolytope:
    A = np.vstack([np.eye(3), -np.eye(3)])
    b = np.concatenate([-np.ones(3), np.zeros(3)])   # [0, 1]^3
    return HPolytope(A, b)


@pytest.fixture
def simplex(request):
    """Standard simplex {x >= 0, sum x <= 1} in the requested dimension."""
    d = getattr(request, "param", 3)
    A = np.vstack([-np.eye(d), np.ones((1, d))])
    b = np.concatenate([np.zeros(d), [-1.0]])
    return HPolytope(A, b)


def random_bounded_polytope(d: int, n_halfspaces: int, seed: int) -> HPolytope:
    """Random bounded polytope: tangent planes of a ball at random directions
    plus a box, jittered; bounded by construction."""
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_halfspaces - 2 * d, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(1.0, 3.0, len(dirs))
    A = np.vstack([dirs, np.eye(d), -np.eye(d)])
    box = rng.uniform(1.5, 3.5, 2 * d)
    b = -np.concatenate([radii, box])
    center_shift = rng.uniform(-0.3, 0.3, d)
    return HPolytope(A, b + A @ center_shift)


@pytest.fixture
def ball_points_4d() -> VertexSet:
    rng = np.random.default_rng(7)
    pts = rng.standard_normal((50, 4))
    pts /= np.maximum(np.linalg.norm(pts, axis=1, keepdims=True), 1.0) / \
        rng.uniform(0.3, 1.0, (50, 1))
    return VertexSet(4, pts)
