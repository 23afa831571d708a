"""Quantitative comparison of estimated vs ground-truth polytopes."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import EmptyPolytope
from .geometry import HPolytope

logger = logging.getLogger(__name__)

ANGLE_THRESHOLD_DEG = 10.0


@dataclass(frozen=True)
class FacetMatch:
    """Best estimated row for one truth facet."""

    truth_index: int
    best_row: int
    angle_deg: float
    matched: bool


def _rows_of(est) -> tuple[np.ndarray, np.ndarray]:
    return np.atleast_2d(np.asarray(est.A, dtype=float)), np.asarray(est.b, dtype=float)


def matching_error(truth: HPolytope, est,
                   threshold_deg: float = ANGLE_THRESHOLD_DEG,
                   ) -> tuple[float, list[FacetMatch]]:
    """Fraction of truth facet normals with no estimated normal within the
    angle threshold; also the per-facet best match.

    Invariant under positive row rescaling and row permutation of either
    argument.  An empty estimate leaves every facet unmatched.
    """
    A_t = truth.A / np.linalg.norm(truth.A, axis=1)[:, None]
    A_e, _ = _rows_of(est)
    details: list[FacetMatch] = []
    if A_e.size == 0:
        details = [FacetMatch(l, -1, 180.0, False) for l in range(len(A_t))]
        return 1.0, details
    A_e = A_e / np.linalg.norm(A_e, axis=1)[:, None]
    cos = np.clip(A_t @ A_e.T, -1.0, 1.0)
    angles = np.degrees(np.arccos(cos))
    best = np.argmin(angles, axis=1)
    for l in range(len(A_t)):
        ang = float(angles[l, best[l]])
        details.append(FacetMatch(l, int(best[l]), ang, ang <= threshold_deg))
    E = float(np.mean([not m.matched for m in details]))
    return E, details


def iou(P: HPolytope, Q: HPolytope) -> float:
    """Vol(P n Q) / (Vol(P) + Vol(Q) - Vol(P n Q))."""
    vol_p = geometry.volume(geometry.enumerate_vertices(P))
    vol_q = geometry.volume(geometry.enumerate_vertices(Q))
    try:
        inter = geometry.intersect(P, Q)
        vol_i = geometry.volume(geometry.enumerate_vertices(inter))
    except EmptyPolytope:
        vol_i = 0.0
    return vol_i / (vol_p + vol_q - vol_i)


def facet_error_table(truth: HPolytope, details: list[FacetMatch]) -> list[dict]:
    """Per-truth-facet (d-1)-measure joined with its match flag."""
    descriptions = geometry.facets(truth)
    if len(descriptions) != len(details):
        raise ValueError("match details do not cover the truth facets")
    return [{"facet": f.halfspace_index, "measure": float(f.measure),
             "matched": bool(details[f.halfspace_index].matched)}
            for f in descriptions]


def facet_error_histogram(table: list[dict], n_bins: int = 10) -> list[dict]:
    """Geometric bins over facet measure with per-bin total and error counts."""
    measures = np.array([row["measure"] for row in table])
    matched = np.array([row["matched"] for row in table])
    positive = measures[measures > 0]
    if positive.size == 0:
        raise ValueError("no facets with positive measure")
    lo, hi = positive.min() * 0.999, measures.max() * 1.001
    edges = np.geomspace(lo, hi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, measures, side="right") - 1, 0, n_bins - 1)
    out = []
    for k in range(n_bins):
        sel = idx == k
        out.append({
            "bin_lower": float(edges[k]),
            "bin_upper": float(edges[k + 1]),
            "count": int(sel.sum()),
            "errors": int((sel & ~matched).sum()),
        })
    return out
