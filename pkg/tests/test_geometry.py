import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polylab import geometry
from polylab.errors import DegenerateInput, EmptyPolytope, Unbounded
from polylab.geometry import HPolytope, VertexSet

from conftest import random_bounded_polytope
from oracles import (
    brute_force_hull_facets,
    membership_probes,
    monte_carlo_volume,
    rational_vertex_enumeration,
)

CUBE_CORNERS = np.array(list(itertools.product([0.0, 1.0], repeat=3)))


# ---------------------------------------------------------------- vertices

def test_cube_vertices(cube3):
    V = geometry.enumerate_vertices(cube3)
    assert len(V) == 8
    got = set(map(tuple, np.round(V.points, 9)))
    assert got == set(map(tuple, CUBE_CORNERS))


@pytest.mark.parametrize("simplex", [4], indirect=True)
def test_simplex_vertices(simplex):
    V = geometry.enumerate_vertices(simplex)
    assert len(V) == 5


def test_vertices_match_rational_oracle():
    P = random_bounded_polytope(3, 10, seed=123)
    V = geometry.enumerate_vertices(P)
    ref = rational_vertex_enumeration(P.A, P.b)
    assert len(V) == len(ref)
    # every fast vertex appears in the rational set
    for v in V.points:
        assert np.linalg.norm(ref - v, axis=1).min() < 1e-7


def test_vertices_on_facets_and_feasible():
    P = random_bounded_polytope(4, 12, seed=5).normalized()
    V = geometry.enumerate_vertices(P)
    vals = V.points @ P.A.T + P.b
    for i, v in enumerate(V.points):
        assert vals[i].max() <= geometry.eps_feas(v)
        assert np.sum(np.abs(vals[i]) <= geometry.EPS_ONFACET) >= P.dim


def test_empty_and_unbounded_errors():
    A = np.vstack([np.eye(2), -np.eye(2)])
    with pytest.raises(EmptyPolytope):
        geometry.enumerate_vertices(HPolytope(A, np.array([-1.0, -1, 2, 2])))
    with pytest.raises(Unbounded):
        geometry.enumerate_vertices(HPolytope(np.eye(2), -np.ones(2)))


# ---------------------------------------------------------------- hull

def test_hull_of_cube_corners():
    hull = geometry.convex_hull(VertexSet(3, CUBE_CORNERS))
    assert hull.n_halfspaces == 6
    # axis-aligned unit normals
    for row in hull.A:
        assert np.isclose(np.abs(row).max(), 1.0)
        assert np.isclose(np.linalg.norm(row), 1.0)


def test_hull_discards_interior_point():
    corners = np.vstack([np.zeros(3), np.eye(3)])
    centroid = corners.mean(axis=0, keepdims=True)
    hull = geometry.convex_hull(VertexSet(3, np.vstack([corners, centroid])))
    assert hull.n_halfspaces == 4


def test_hull_matches_brute_force_facets(ball_points_4d):
    pts = ball_points_4d.points
    hull = geometry.convex_hull(ball_points_4d)
    vals = pts @ hull.A.T + hull.b
    assert vals.max() <= 1e-8 * (1 + np.abs(pts).max())
    ref = brute_force_hull_facets(pts)
    assert hull.n_halfspaces == len(ref)


def test_hull_rejects_degenerate_input():
    flat = np.hstack([np.random.default_rng(0).random((5, 2)), np.zeros((5, 1))])
    with pytest.raises(DegenerateInput):
        geometry.convex_hull(VertexSet(3, flat))


def test_roundtrip_membership_agreement():
    for seed in (0, 1):
        P = random_bounded_polytope(3, 9, seed=seed).normalized()
        V = geometry.enumerate_vertices(P)
        hull = geometry.convex_hull(V)
        X, inside = membership_probes(P.A, P.b, -4, 4, 100_000, seed=seed)
        inside_hull = np.all(X @ hull.A.T + hull.b <= 1e-7, axis=1)
        assert np.mean(inside == inside_hull) > 0.9999


# ---------------------------------------------------------------- redundancy

def test_remove_redundant_slack_constraint(cube3):
    A = np.vstack([cube3.A, [[1.0, 0, 0]]])
    b = np.concatenate([cube3.b, [-2.0]])
    red = geometry.remove_redundant(HPolytope(A, b))
    assert red.n_halfspaces == 6


def test_remove_redundant_exact_duplicates(cube3):
    doubled = HPolytope(np.vstack([cube3.A] * 2), np.concatenate([cube3.b] * 2))
    assert geometry.remove_redundant(doubled).n_halfspaces == 6


def test_remove_redundant_preserves_point_set(cube3):
    rng = np.random.default_rng(3)
    extra = rng.standard_normal((20, 3))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    # tangent to a ball of radius 2 around the cube: all redundant
    P = HPolytope(np.vstack([cube3.A, extra]),
                  np.concatenate([cube3.b, -2.0 * np.ones(20) - extra @ np.full(3, 0.5)]))
    red = geometry.remove_redundant(P)
    assert red.n_halfspaces == 6
    X = rng.uniform(-1, 2, (20_000, 3))
    assert np.array_equal(P.contains(X), red.contains(X))


# ---------------------------------------------------------------- volume

def test_cube_volume(cube3):
    assert geometry.volume(geometry.enumerate_vertices(cube3)) == pytest.approx(1.0)


@pytest.mark.parametrize("simplex", [4], indirect=True)
def test_simplex_volume(simplex):
    V = geometry.enumerate_vertices(simplex)
    assert geometry.volume(V) == pytest.approx(1.0 / 24.0, rel=1e-12)


def test_volume_against_monte_carlo():
    P = random_bounded_polytope(3, 10, seed=11)
    V = geometry.enumerate_vertices(P)
    vol = geometry.volume(V)
    lo = V.points.min(axis=0) - 0.01
    hi = V.points.max(axis=0) + 0.01
    est, se = monte_carlo_volume(P.A, P.b, lo, hi, 10_000_000, seed=2)
    assert abs(vol - est) <= 3 * se


def test_volume_requires_full_rank():
    with pytest.raises(DegenerateInput):
        geometry.volume(VertexSet(3, np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]])))


@settings(deadline=None, max_examples=20)
@given(scale=st.sampled_from([0.5, 2.0]),
       shift=st.tuples(*[st.floats(-5, 5) for _ in range(3)]))
def test_volume_translation_and_scaling(scale, shift):
    rng = np.random.default_rng(4)
    pts = rng.standard_normal((12, 3))
    V0 = geometry.volume(VertexSet(3, pts))
    assert geometry.volume(VertexSet(3, pts + np.array(shift))) == pytest.approx(V0, rel=1e-9)
    assert geometry.volume(VertexSet(3, pts * scale)) == pytest.approx(
        V0 * scale ** 3, rel=1e-9)


# ---------------------------------------------------------------- intersect

def test_intersect_idempotent(cube3):
    same = geometry.intersect(cube3, cube3)
    assert same.n_halfspaces == 6
    assert geometry.volume(geometry.enumerate_vertices(same)) == pytest.approx(1.0)


def test_intersect_shifted_cube(cube3):
    shifted = HPolytope(cube3.A, cube3.b - 0.5 * cube3.A[:, 0])
    inter = geometry.intersect(cube3, shifted)
    assert geometry.volume(geometry.enumerate_vertices(inter)) == pytest.approx(0.5)


def test_intersect_empty_is_signaled(cube3):
    far = HPolytope(cube3.A, cube3.b - 5.0 * cube3.A[:, 0])
    with pytest.raises(EmptyPolytope):
        geometry.intersect(cube3, far)


def test_intersect_sampling_inclusion():
    P = random_bounded_polytope(3, 9, seed=21)
    Q = random_bounded_polytope(3, 9, seed=22)
    inter = geometry.intersect(P, Q)
    vol_i = geometry.volume(geometry.enumerate_vertices(inter))
    vol_p = geometry.volume(geometry.enumerate_vertices(P))
    vol_q = geometry.volume(geometry.enumerate_vertices(Q))
    assert vol_i <= min(vol_p, vol_q) + 1e-9
    X, in_p = membership_probes(P.A, P.b, -4, 4, 100_000, seed=1)
    in_q = np.all(X @ Q.A.T + Q.b <= 1e-9, axis=1)
    in_i = np.all(X @ inter.A.T + inter.b <= 1e-9, axis=1)
    assert np.mean(in_i == (in_p & in_q)) > 0.9999


# ---------------------------------------------------------------- facets

def test_cube_facets(cube3):
    fs = geometry.facets(cube3)
    assert len(fs) == 6
    assert sum(f.measure for f in fs) == pytest.approx(6.0)
    for f in fs:
        assert f.measure == pytest.approx(1.0)
        # center is the face midpoint: two coordinates at 0.5
        assert np.sum(np.isclose(f.center, 0.5)) == 2


def test_simplex_facet_measure(simplex):
    fs = geometry.facets(simplex)
    diag = [f for f in fs if f.halfspace_index == 3]
    assert diag[0].measure == pytest.approx(np.sqrt(3) / 2, rel=1e-9)


def test_facet_centers_strictly_inside():
    P = geometry.remove_redundant(random_bounded_polytope(3, 10, seed=31).normalized())
    for f in geometry.facets(P):
        vals = P.A @ f.center + P.b
        others = np.delete(vals, f.halfspace_index)
        assert others.max() < -1e-10


# ---------------------------------------------------------------- distance

def test_boundary_distance_cube(cube3):
    assert geometry.boundary_distance(cube3, np.array([0.5] * 3)) == pytest.approx(0.5)
    assert geometry.boundary_distance(cube3, np.array([1.0, 0.5, 0.5])) == pytest.approx(0.0, abs=1e-12)
    assert geometry.boundary_distance(cube3, np.array([2.0, 0.5, 0.5])) == pytest.approx(1.0, abs=1e-6)


def test_boundary_distance_zero_iff_boundary(cube3):
    rng = np.random.default_rng(9)
    for _ in range(20):
        x = rng.uniform(0, 1, 3)
        x[rng.integers(3)] = float(rng.integers(2))     # project onto a face
        assert geometry.boundary_distance(cube3, x) == pytest.approx(0.0, abs=1e-9)
    inside = rng.uniform(0.2, 0.8, (20, 3))
    for x in inside:
        assert geometry.boundary_distance(cube3, x) > 0.1


# ---------------------------------------------------------------- misc

def test_is_bounded(cube3):
    assert geometry.is_bounded(cube3)
    assert not geometry.is_bounded(HPolytope(np.eye(3), -np.ones(3)))


def test_polytope_json_roundtrip(cube3):
    import json

    payload = json.loads(json.dumps(cube3.to_json()))
    back = HPolytope.from_json(payload)
    assert np.array_equal(back.A, cube3.A)
    assert np.array_equal(back.b, cube3.b)
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((5, 3)) * np.pi
    vs = VertexSet(3, pts)
    back_vs = VertexSet.from_json(json.loads(json.dumps(vs.to_json())))
    assert np.array_equal(back_vs.points, pts)
