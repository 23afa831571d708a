"""Membership queries and the bracketing line search that produces data."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NoExit, OracleFailure

logger = logging.getLogger(__name__)

DEFAULT_R_MAX = 40.0


@dataclass(frozen=True)
class PointPair:
    """One line-search bracket: x_minus inside, x_plus outside, optional
    true neighboring-state label for the baseline."""

    x_minus: np.ndarray
    x_plus: np.ndarray
    label: int | None = None

    def to_json(self) -> dict:
        return {
            "xm": np.asarray(self.x_minus).tolist(),
            "xp": np.asarray(self.x_plus).tolist(),
            "label": self.label,
        }

    @staticmethod
    def from_json(obj: dict) -> "PointPair":
        return PointPair(np.asarray(obj["xm"], dtype=float),
                         np.asarray(obj["xp"], dtype=float),
                         obj.get("label"))


@dataclass
class Dataset:
    """Collected brackets plus the interior anchor they were searched from."""

    origin: np.ndarray
    pairs: list[PointPair] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def dim(self) -> int:
        return np.asarray(self.origin).shape[0]

    @property
    def X_minus(self) -> np.ndarray:
        return np.array([p.x_minus for p in self.pairs]).reshape(len(self.pairs), self.dim)

    @property
    def X_plus(self) -> np.ndarray:
        return np.array([p.x_plus for p in self.pairs]).reshape(len(self.pairs), self.dim)

    @property
    def labels(self) -> list[int | None]:
        return [p.label for p in self.pairs]

    def add(self, pair: PointPair, eps_close: float) -> bool:
        """Insert unless an existing pair has x_minus within eps_close."""
        if self.pairs:
            dists = np.linalg.norm(self.X_minus - pair.x_minus, axis=1)
            if dists.min() < eps_close:
                return False
        self.pairs.append(pair)
        return True

    def to_json(self) -> dict:
        return {"origin": np.asarray(self.origin).tolist(),
                "pairs": [p.to_json() for p in self.pairs]}

    @staticmethod
    def from_json(obj: dict) -> "Dataset":
        return Dataset(np.asarray(obj["origin"], dtype=float),
                       [PointPair.from_json(p) for p in obj["pairs"]])


class CountingOracle:
    """Wraps a problem's membership function and counts raw queries."""

    def __init__(self, problem):
        self.problem = problem
        self.n_queries = 0

    @property
    def dim(self) -> int:
        return self.problem.dim

    def membership(self, x: np.ndarray) -> tuple[bool, int | None]:
        self.n_queries += 1
        return self.problem.membership(x)


def membership(problem, x: np.ndarray) -> tuple[bool, int | None]:
    """Membership of x in the problem's target region plus the achieved
    state id (used as the baseline label)."""
    return problem.membership(np.asarray(x, dtype=float))


def line_search(oracle, o: np.ndarray, u: np.ndarray, delta: float,
                r_max: float = DEFAULT_R_MAX) -> PointPair:
    """Bracket the boundary crossing along the ray o + t*u.

    Marches outward with doubling steps from delta, then bisects until the
    bracket is strictly shorter than delta.  The caller guarantees o is a
    member.  Raises NoExit when the ray stays inside up to r_max.
    """
    o = np.asarray(o, dtype=float)
    u = np.asarray(u, dtype=float)
    norm = np.linalg.norm(u)
    if not norm > 0:
        raise ValueError("direction must be nonzero")
    u = u / norm

    t_lo, t_hi = 0.0, delta
    label = None
    inside, label = oracle.membership(o + t_hi * u)
    while inside:
        t_lo = t_hi
        t_hi *= 2.0
        if t_hi > r_max:
            raise NoExit(f"no boundary within r_max={r_max}")
        inside, label = oracle.membership(o + t_hi * u)
    out_label = label
    while t_hi - t_lo >= delta:
        mid = 0.5 * (t_lo + t_hi)
        inside, label = oracle.membership(o + mid * u)
        if inside:
            t_lo = mid
        else:
            t_hi = mid
            out_label = label
    return PointPair(o + t_lo * u, o + t_hi * u, out_label)
