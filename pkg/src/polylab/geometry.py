"""Exact low-dimensional polytope computations (2 <= d <= 5).

Halfspaces follow the convention ``{x : A_k . x + b_k <= 0}``; a polytope is
the intersection of its halfspaces.  All routines here are pure functions of
immutable inputs and are safe to call concurrently.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import clarabel
import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog
from scipy.spatial import ConvexHull
from scipy.spatial import QhullError

from .errors import DegenerateInput, DimensionMismatch, EmptyPolytope, Unbounded

logger = logging.getLogger(__name__)

# Default tolerances, in rescaled units (problems live in roughly [-10, 10]^d).
EPS_ONFACET = 1e-6
EPS_VERTEX = 1e-7
EPS_RANK = 1e-10

MAX_DIM = 5
MAX_HALFSPACES_ENUM = 64


def eps_feas(x: np.ndarray) -> float:
    """Feasibility slack scaled to the magnitude of the probe point."""
    return 1e-8 * (1.0 + float(np.max(np.abs(x), initial=0.0)))


@dataclass(frozen=True)
class Hyperplane:
    """One halfspace ``{x : normal . x + offset <= 0}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.ndim != 1 or not np.linalg.norm(n) > 0:
            raise ValueError("hyperplane normal must be a nonzero vector")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))


@dataclass(frozen=True)
class HPolytope:
    """Intersection of halfspaces, stored as stacked rows (A, b)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.shape[0]:
            raise DimensionMismatch("A and b row counts differ")
        if not np.all(np.linalg.norm(A, axis=1) > 0):
            raise ValueError("HPolytope rows must have nonzero normals")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_halfspaces(self) -> int:
        return self.A.shape[0]

    @property
    def halfspaces(self) -> list[Hyperplane]:
        return [Hyperplane(self.A[k], self.b[k]) for k in range(self.A.shape[0])]

    def values(self, x: np.ndarray) -> np.ndarray:
        """Constraint values A x + b; shape (N,) for a point, (n, N) for a batch."""
        x = np.asarray(x, dtype=float)
        return x @ self.A.T + self.b

    def contains(self, x: np.ndarray, eps: float | None = None) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        tol = eps_feas(x) if eps is None else eps
        v = self.values(x)
        return np.all(v <= tol, axis=-1)

    def normalized(self) -> "HPolytope":
        norms = np.linalg.norm(self.A, axis=1)
        return HPolytope(self.A / norms[:, None], self.b / norms)

    def to_json(self) -> dict:
        return {"dim": self.dim, "A": self.A.tolist(), "b": self.b.tolist()}

    @staticmethod
    def from_json(obj: dict) -> "HPolytope":
        P = HPolytope(np.asarray(obj["A"], dtype=float), np.asarray(obj["b"], dtype=float))
        if P.dim != obj["dim"]:
            raise DimensionMismatch("declared dim does not match A")
        return P


@dataclass(frozen=True)
class VertexSet:
    """Finite point set; the V-representation of a polytope."""

    dim: int
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size and pts.shape[1] != self.dim:
            raise DimensionMismatch("points do not match declared dimension")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def to_json(self) -> dict:
        return {"dim": self.dim, "points": self.points.tolist()}

    @staticmethod
    def from_json(obj: dict) -> "VertexSet":
        return VertexSet(obj["dim"], np.asarray(obj["points"], dtype=float))


@dataclass(frozen=True)
class FacetDescription:
    """Facet of an irredundant polytope: incidences, center, (d-1)-measure."""

    halfspace_index: int
    incident_vertex_indices: np.ndarray
    center: np.ndarray
    measure: float


# ---------------------------------------------------------------------------
# linear-programming helpers


def chebyshev_center(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Center and radius of the largest inscribed ball of {A x + b <= 0}.

    Radius is capped at 1e6; a nonpositive radius means the system has no
    interior (empty or degenerate).
    """
    N, d = A.shape
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, norms[:, None]])
    res = linprog(c, A_ub=A_ub, b_ub=-b, bounds=[(None, None)] * d + [(None, 1e6)],
                  method="highs")
    if res.status != 0:
        return np.zeros(d), -np.inf
    return res.x[:d], float(res.x[d])


def is_bounded(P: HPolytope) -> bool:
    """Boundedness via positive span: the (normalized) normals must admit a
    strictly positive combination summing to zero and have full rank."""
    A = P.normalized().A
    d = P.dim
    if np.linalg.matrix_rank(A, tol=EPS_RANK * max(1.0, np.abs(A).max())) < d:
        return False
    # feasibility: exists lambda >= 1 with A^T lambda = 0
    res = linprog(np.zeros(P.n_halfspaces), A_eq=A.T, b_eq=np.zeros(d),
                  bounds=[(1.0, None)] * P.n_halfspaces, method="highs")
    return res.status == 0


def _interior_point(P: HPolytope) -> np.ndarray:
    x, r = chebyshev_center(P.A, P.b)
    if r <= 1e-12 * (1.0 + np.abs(P.b).max(initial=0.0)):
        raise EmptyPolytope("halfspace system has no interior")
    return x


# ---------------------------------------------------------------------------
# core operations


def enumerate_vertices(P: HPolytope, eps_vertex: float = EPS_VERTEX) -> VertexSet:
    """All extreme points of P by solving every d-subset of halfspaces.

    Requires 2 <= d <= 5 and at most 64 halfspaces so that C(N, d) stays
    tractable.  Raises EmptyPolytope / Unbounded when the respective check
    fails.
    """
    d, N = P.dim, P.n_halfspaces
    if not 2 <= d <= MAX_DIM:
        raise DimensionMismatch(f"dimension {d} outside supported range")
    if N > MAX_HALFSPACES_ENUM:
        raise ValueError(f"too many halfspaces for enumeration ({N} > {MAX_HALFSPACES_ENUM})")
    Pn = P.normalized()
    _interior_point(Pn)  # EmptyPolytope on failure
    if not is_bounded(Pn):
        raise Unbounded("halfspace system admits a recession direction")

    subsets = np.array(list(itertools.combinations(range(N), d)), dtype=int)
    mats = Pn.A[subsets]                       # (m, d, d)
    rhs = -Pn.b[subsets]                       # (m, d)
    dets = np.abs(np.linalg.det(mats))
    ok = dets > 1e-12
    cand = np.zeros((len(subsets), d))
    if ok.any():
        cand[ok] = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    vals = cand @ Pn.A.T + Pn.b                # (m, N)
    tol = 1e-8 * (1.0 + np.max(np.abs(cand), axis=1))
    feas = ok & np.all(vals <= tol[:, None], axis=1)
    verts = cand[feas]
    if verts.size == 0:
        raise EmptyPolytope("no feasible vertex")
    return VertexSet(d, _dedup_points(verts, eps_vertex))


def _dedup_points(pts: np.ndarray, eps: float) -> np.ndarray:
    """Greedy dedup under Euclidean tolerance, keeping first occurrences in a
    deterministic (lexicographic) scan order."""
    order = np.lexsort(pts.T[::-1])
    kept: list[np.ndarray] = []
    for idx in order:
        p = pts[idx]
        if all(np.linalg.norm(p - q) > eps for q in kept):
            kept.append(p)
    return np.array(kept)


def convex_hull(points: VertexSet) -> HPolytope:
    """Irredundant facet halfspaces of the hull, outward unit normals.

    Backed by an incremental-insertion hull; coplanar simplicial facets are
    merged by normal/offset proximity so each geometric facet appears once.
    """
    pts = points.points
    d = points.dim
    if not 2 <= d <= MAX_DIM:
        raise DimensionMismatch(f"dimension {d} outside supported range")
    _require_full_affine_rank(pts, d)
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:  # pragma: no cover - rank check should catch this
        raise DegenerateInput(str(exc)) from exc
    eqs = _dedup_equations(hull.equations)
    return HPolytope(eqs[:, :d], eqs[:, d])


def _require_full_affine_rank(pts: np.ndarray, d: int) -> None:
    if pts.shape[0] < d + 1:
        raise DegenerateInput("need at least d+1 points")
    centered = pts - pts.mean(axis=0)
    scale = max(1.0, np.abs(centered).max())
    if np.linalg.matrix_rank(centered, tol=EPS_RANK * scale) < d:
        raise DegenerateInput("points lie in a proper affine subspace")


def _dedup_equations(eqs: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Merge near-identical (normal, offset) rows; deterministic order."""
    order = np.lexsort(eqs.T[::-1])
    eqs = eqs[order]
    kept = []
    for row in eqs:
        if not kept:
            kept.append(row)
            continue
        diffs = np.abs(np.array(kept) - row).max(axis=1)
        if diffs.min() > tol:
            kept.append(row)
    return np.array(kept)


def remove_redundant(P: HPolytope) -> HPolytope:
    """Keep exactly the halfspaces that are facets of P.

    The point set of P is unchanged.  Works in three stages: duplicate-
    direction collapse, a bounding-ball screen plus one LP per surviving
    halfspace, and a final vertex-incidence test (a facet must carry at
    least d vertices).
    """
    d = P.dim
    Pn = P.normalized()
    x_c = _interior_point(Pn)  # EmptyPolytope on failure

    # collapse identical directions, keeping the tightest (largest) offset;
    # near-duplicates split by the rounding grid are cleaned up by the LPs
    key = np.round(Pn.A / 1e-9).astype(np.int64)
    _, group = np.unique(key, axis=0, return_inverse=True)
    order = np.lexsort((np.arange(len(Pn.b)), -Pn.b, group))
    first = order[np.unique(group[order], return_index=True)[1]]
    keep_idx = np.sort(first)
    A, b = Pn.A[keep_idx], Pn.b[keep_idx]
    orig = np.asarray(keep_idx)

    # bounding box via 2d LPs; also detects unboundedness
    lo, hi = np.empty(d), np.empty(d)
    for i in range(d):
        for sign, out in ((1.0, hi), (-1.0, lo)):
            c = np.zeros(d)
            c[i] = -sign
            res = linprog(c, A_ub=A, b_ub=-b, bounds=[(None, None)] * d, method="highs")
            if res.status == 3:
                raise Unbounded(f"polytope unbounded along axis {i}")
            if res.status != 0:
                raise EmptyPolytope("LP infeasible while bounding")
            out[i] = res.x[i]
    radius = 0.5 * float(np.linalg.norm(hi - lo))
    center = 0.5 * (hi + lo)

    # ball screen: max of A_k.x + b_k over the bounding ball
    ball_max = A @ center + b + radius
    survivors = np.where(ball_max >= -1e-9)[0]
    screened_out = np.setdiff1d(np.arange(len(b)), survivors)

    # one LP per survivor: can the halfspace be touched within the others?
    facet_like: list[int] = []
    active = set(survivors.tolist())
    for k in survivors:
        rows = sorted(active - {k})
        A_others = np.vstack([A[rows], A[k][None, :]])
        b_ub = np.concatenate([-b[rows], [-b[k] + 1.0]])  # cap keeps the LP bounded
        res = linprog(-A[k], A_ub=A_others, b_ub=b_ub, bounds=[(None, None)] * d,
                      method="highs")
        if res.status != 0:
            raise EmptyPolytope("LP failed during redundancy filtering")
        if -res.fun + b[k] < -1e-9:
            active.discard(k)
        else:
            facet_like.append(k)
    if screened_out.size:
        logger.debug("ball screen removed %d halfspaces", screened_out.size)

    reduced = HPolytope(A[facet_like], b[facet_like])
    if reduced.n_halfspaces > MAX_HALFSPACES_ENUM:
        raise ValueError("reduced system still too large for vertex enumeration")
    verts = enumerate_vertices(reduced)
    counts = _incidence_matrix(reduced, verts).sum(axis=0)
    final = [facet_like[k] for k in range(reduced.n_halfspaces) if counts[k] >= d]
    sel = orig[final]
    return HPolytope(P.A[sel], P.b[sel])


def _incidence_matrix(P: HPolytope, V: VertexSet, eps: float = EPS_ONFACET) -> np.ndarray:
    """Boolean (n_vertices, n_halfspaces): vertex v lies on halfspace k."""
    norms = np.linalg.norm(P.A, axis=1)
    vals = V.points @ P.A.T + P.b
    return np.abs(vals) <= eps * norms


def volume(V: VertexSet) -> float:
    """d-volume by triangulation: hull facets fanned from the centroid."""
    pts = V.points
    d = V.dim
    _require_full_affine_rank(pts, d)
    if d == 1:
        return float(pts.max() - pts.min())
    hull = ConvexHull(pts)
    c = pts.mean(axis=0)
    simplex_pts = pts[hull.simplices]          # (m, d, d)
    dets = np.linalg.det(simplex_pts - c)
    return float(np.abs(dets).sum() / math.factorial(d))


def intersect(P: HPolytope, Q: HPolytope) -> HPolytope:
    """Intersection as an irredundant H-polytope; raises EmptyPolytope when
    the intersection has no interior (a valid outcome for callers)."""
    if P.dim != Q.dim:
        raise DimensionMismatch("polytopes live in different dimensions")
    combined = HPolytope(np.vstack([P.A, Q.A]), np.concatenate([P.b, Q.b]))
    _interior_point(combined.normalized())
    return remove_redundant(combined)


def facets(P: HPolytope) -> list[FacetDescription]:
    """One description per halfspace of an irredundant bounded polytope."""
    V = enumerate_vertices(P)
    inc = _incidence_matrix(P, V)
    out = []
    for k in range(P.n_halfspaces):
        idx = np.where(inc[:, k])[0]
        if idx.size < P.dim:
            raise DegenerateInput(
                f"halfspace {k} carries {idx.size} < d vertices; polytope not irredundant")
        pts = V.points[idx]
        center = pts.mean(axis=0)
        out.append(FacetDescription(k, idx, center, _facet_measure(P.A[k], pts)))
    return out


def _facet_measure(normal: np.ndarray, pts: np.ndarray) -> float:
    """(d-1)-volume of the facet spanned by pts inside its hyperplane."""
    d = normal.shape[0]
    # orthonormal basis of the hyperplane through SVD (deterministic)
    u = normal / np.linalg.norm(normal)
    _, _, vt = np.linalg.svd(u[None, :])
    basis = vt[1:]                              # (d-1, d)
    coords = (pts - pts.mean(axis=0)) @ basis.T
    if d - 1 == 1:
        return float(coords.max() - coords.min())
    try:
        return volume(VertexSet(d - 1, coords))
    except DegenerateInput:
        return 0.0


def boundary_distance(P: HPolytope, x: np.ndarray) -> float:
    """Distance from x to the boundary of P.

    Inside: smallest slack to any halfspace.  Outside: Euclidean distance to
    the nearest point of P (an exact projection, solved as a small QP).
    """
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(P.A, axis=1)
    vals = (P.A @ x + P.b) / norms
    if np.all(vals <= 0):
        return float(-vals.max())
    return float(np.linalg.norm(project_onto(P, x) - x))


def project_onto(P: HPolytope, x: np.ndarray) -> np.ndarray:
    """Nearest point of P to x: min ||y - x||^2 s.t. A y + b <= 0."""
    import clarabel

    d = P.dim
    Pm = sp.identity(d, format="csc") * 2.0
    q = -2.0 * np.asarray(x, dtype=float)
    A = sp.csc_matrix(P.A)
    b = -P.b
    cones = [clarabel.NonnegativeConeT(P.n_halfspaces)]
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    solver = clarabel.DefaultSolver(Pm, q, A, b, cones, settings)
    sol = solver.solve()
    if str(sol.status) not in ("Solved", "AlmostSolved"):
        raise EmptyPolytope(f"projection failed: {sol.status}")
    return np.asarray(sol.x, dtype=float)
