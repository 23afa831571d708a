"""Independent brute-force oracles used to verify the fast paths.

Everything here is deliberately written against the mathematical definitions
(no shared code with src/): exact rational arithmetic for vertex
enumeration, hyperplane scanning for hulls, Monte Carlo for volumes, and a
direct free-energy scan for ground states.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def solve_rational(M, rhs):
    """Gaussian elimination over Fractions; None when singular."""
    d = len(rhs)
    aug = [list(row) + [r] for row, r in zip(M, rhs)]
    for col in range(d):
        pivot = next((r for r in range(col, d) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(d):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [aug[r][d] for r in range(d)]


def rational_vertex_enumeration(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All vertices of {A x + b <= 0} by exact d-subset solving."""
    N, d = A.shape
    AF = [[Fraction(float(x)) for x in row] for row in A]
    bF = [Fraction(float(x)) for x in b]
    verts: list[tuple] = []
    for subset in itertools.combinations(range(N), d):
        sol = solve_rational([AF[i] for i in subset], [-bF[i] for i in subset])
        if sol is None:
            continue
        if all(sum(AF[k][j] * sol[j] for j in range(d)) + bF[k] <= 0
               for k in range(N)):
            if sol not in verts:
                verts.append(sol)
    return np.array([[float(v) for v in vert] for vert in verts]) \
        if verts else np.zeros((0, d))


def brute_force_hull_facets(pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Facet equations of conv(pts) by testing every d-subset hyperplane.

    Returns unit-normal outward rows (n, d+1) with columns [normal, offset],
    deduplicated.
    """
    n, d = pts.shape
    center = pts.mean(axis=0)
    rows = []
    for subset in itertools.combinations(range(n), d):
        S = pts[list(subset)]
        rel = S[1:] - S[0]
        # normal spans the null space of the (d-1, d) difference matrix
        _, _, vt = np.linalg.svd(rel)
        normal = vt[-1]
        if np.linalg.norm(rel @ normal) > 1e-9:
            continue
        offset = -float(normal @ S[0])
        vals = pts @ normal + offset
        if np.all(vals <= tol):
            pass
        elif np.all(vals >= -tol):
            normal, offset = -normal, -offset
            vals = -vals
        else:
            continue
        if center @ normal + offset > -1e-12:   # degenerate: all points coplanar
            continue
        rows.append(np.concatenate([normal, [offset]]))
    if not rows:
        return np.zeros((0, d + 1))
    rows = np.array(rows)
    # dedup by rounded key
    key = np.round(rows / 1e-6).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return rows[np.sort(idx)]


def monte_carlo_volume(A: np.ndarray, b: np.ndarray, lo: np.ndarray,
                       hi: np.ndarray, n_samples: int, seed: int = 0
                       ) -> tuple[float, float]:
    """Volume of {A x + b <= 0} within the box [lo, hi]; returns (est, se)."""
    rng = np.random.default_rng(seed)
    box_vol = float(np.prod(hi - lo))
    n_in = 0
    chunk = 1_000_000
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        x = rng.uniform(lo, hi, size=(k, len(lo)))
        n_in += int(np.sum(np.all(x @ A.T + b <= 0, axis=1)))
        done += k
    p = n_in / n_samples
    est = box_vol * p
    se = box_vol * np.sqrt(max(p * (1 - p), 1e-12) / n_samples)
    return est, se


def brute_force_ground_state(C_DD: np.ndarray, C_Dg: np.ndarray, e: float,
                             Vg: np.ndarray, s_max: int) -> np.ndarray:
    """Argmin of the free energy over the state box, evaluated directly per
    state with a fresh matrix inverse (no shared code with the fast path)."""
    n_dots = C_DD.shape[0]
    M_inv = np.linalg.inv(C_DD)
    best, best_val = None, np.inf
    for s in itertools.product(range(s_max + 1), repeat=n_dots):
        v = e * np.array(s, dtype=float) + C_Dg @ Vg
        val = 0.5 * v @ M_inv @ v
        if val < best_val - 0.0:
            best, best_val = s, val
    return np.array(best, dtype=int)


def membership_probes(A: np.ndarray, b: np.ndarray, lo, hi, n: int,
                      seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Random probe points in a box plus their halfspace membership."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(lo, hi, size=(n, A.shape[1]))
    return X, np.all(X @ A.T + b <= 1e-9, axis=1)
