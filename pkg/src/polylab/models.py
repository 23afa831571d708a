"""Ground-truth problem generators with exact membership oracles.

Two families: a constant-interaction model of gated quantum-dot arrays, whose
charge-state regions in gate-voltage space are convex polytopes, and a
Voronoi-cell benchmark.  Both expose the ground-truth polytope in a rescaled
coordinate frame that roughly covers ``[-10, 10]^d``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import geometry
from .errors import (
    BoundaryHit,
    DimensionMismatch,
    EmptyPolytope,
    RetryExhausted,
    Unbounded,
)
from .geometry import HPolytope, Hyperplane

logger = logging.getLogger(__name__)

DEFAULT_S_MAX = 4


@dataclass(eq=False)
class DeviceModel:
    """Constant-interaction model: dot-dot and dot-gate capacitance matrices.

    ``rescale`` maps raw gate voltages to the working frame used by the
    estimation pipeline (see DeviceProblem).
    """

    n_dots: int
    n_gates: int
    C_DD: np.ndarray
    C_Dg: np.ndarray
    e_charge: float = 1.0
    rescale: float = 1.0
    _cho: tuple = field(init=False, repr=False)
    _tables: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        self.C_DD = np.asarray(self.C_DD, dtype=float)
        self.C_Dg = np.asarray(self.C_Dg, dtype=float)
        if self.C_DD.shape != (self.n_dots, self.n_dots):
            raise DimensionMismatch("C_DD shape")
        if self.C_Dg.shape != (self.n_dots, self.n_gates):
            raise DimensionMismatch("C_Dg shape")
        if np.abs(self.C_DD - self.C_DD.T).max() > 1e-12:
            raise ValueError("C_DD must be symmetric (1e-12)")
        if not self.e_charge > 0 or not self.rescale > 0:
            raise ValueError("e_charge and rescale must be positive")
        self._cho = cho_factor(self.C_DD)  # also certifies positive definiteness

    def solve_dd(self, v: np.ndarray) -> np.ndarray:
        """C_DD^{-1} v via the cached Cholesky factor (v may be a matrix)."""
        return cho_solve(self._cho, v)

    def state_table(self, s_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All states of the box {0..s_max}^n_dots in lexicographic order with
        the decomposition F(s, Vg) = const(Vg) + alpha_s + beta_s . Vg."""
        if s_max not in self._tables:
            states = np.array(list(itertools.product(range(s_max + 1), repeat=self.n_dots)),
                              dtype=int)
            m_states = self.solve_dd(states.T.astype(float)).T       # C_DD^{-1} s
            alpha = 0.5 * self.e_charge**2 * np.einsum("ij,ij->i", states, m_states)
            beta = self.e_charge * (m_states @ self.C_Dg)            # (K, n_gates)
            self._tables[s_max] = (states, alpha, beta)
        return self._tables[s_max]

    def to_json(self) -> dict:
        return {
            "n_dots": self.n_dots,
            "n_gates": self.n_gates,
            "C_DD": self.C_DD.tolist(),
            "C_Dg": self.C_Dg.tolist(),
            "e": self.e_charge,
            "rescale": self.rescale,
        }

    @staticmethod
    def from_json(obj: dict) -> "DeviceModel":
        return DeviceModel(obj["n_dots"], obj["n_gates"],
                           np.asarray(obj["C_DD"], dtype=float),
                           np.asarray(obj["C_Dg"], dtype=float),
                           obj["e"], obj["rescale"])


def as_state(s, n_dots: int) -> np.ndarray:
    s = np.asarray(s, dtype=int)
    if s.shape != (n_dots,):
        raise DimensionMismatch("state length")
    if np.any(s < 0):
        raise ValueError("occupancies must be nonnegative")
    return s


def free_energy(dev: DeviceModel, s, Vg: np.ndarray) -> float:
    """F(s, Vg) = 1/2 (|e| s + C_Dg Vg)^T C_DD^{-1} (|e| s + C_Dg Vg)."""
    s = as_state(s, dev.n_dots)
    Vg = np.asarray(Vg, dtype=float)
    if Vg.shape != (dev.n_gates,):
        raise DimensionMismatch("Vg length")
    v = dev.e_charge * s + dev.C_Dg @ Vg
    return 0.5 * float(v @ dev.solve_dd(v))


def transition_halfspace(dev: DeviceModel, s, r) -> Hyperplane:
    """Halfspace {Vg : n . Vg + c <= 0} containing the state-s region, with
    F(s, Vg) - F(r, Vg) = n . Vg + c identically."""
    s = as_state(s, dev.n_dots)
    r = as_state(r, dev.n_dots)
    if np.array_equal(s, r):
        raise ValueError("states must differ")
    e = dev.e_charge
    ms = dev.solve_dd(s.astype(float))
    mr = dev.solve_dd(r.astype(float))
    normal = e * dev.C_Dg.T @ (ms - mr)
    offset = 0.5 * e**2 * float(s @ ms - r @ mr)
    return Hyperplane(normal, offset)


def ground_state(dev: DeviceModel, Vg: np.ndarray, s_max: int = DEFAULT_S_MAX) -> np.ndarray:
    """Free-energy argmin over the state box {0..s_max}^n_dots.

    Ties break to the lexicographically smallest state.  Raises BoundaryHit
    when the argmin touches the box boundary (the box was too small).
    """
    states, alpha, beta = dev.state_table(s_max)
    idx = int(np.argmin(alpha + beta @ np.asarray(Vg, dtype=float)))
    s = states[idx]
    if np.any(s == s_max):
        raise BoundaryHit(s)
    return s.copy()


def ground_state_many(dev: DeviceModel, Vgs: np.ndarray, s_max: int = DEFAULT_S_MAX) -> np.ndarray:
    """Vectorized ground_state without the BoundaryHit check; returns state
    indices into the lexicographic table."""
    _, alpha, beta = dev.state_table(s_max)
    return np.argmin(alpha[None, :] + Vgs @ beta.T, axis=1)


def state_anchor(dev: DeviceModel, s) -> np.ndarray:
    """Gate voltage minimizing F(s, .): least-squares solution of
    |e| s + C_Dg Vg = 0.  Always strictly interior to the state-s region."""
    s = as_state(s, dev.n_dots)
    sol, *_ = np.linalg.lstsq(dev.C_Dg, -dev.e_charge * s.astype(float), rcond=None)
    return sol


def ground_truth_polytope(dev: DeviceModel, s, s_max: int = DEFAULT_S_MAX) -> HPolytope:
    """Irredundant facet system of the state-s region, in the rescaled frame
    x = rescale * (Vg - anchor(s))."""
    s = as_state(s, dev.n_dots)
    states, _, _ = dev.state_table(s_max)
    others = states[~np.all(states == s, axis=1)]
    e = dev.e_charge
    W = dev.solve_dd(dev.C_Dg)                          # C_DD^{-1} C_Dg
    m_quad = np.einsum("ij,ij->i", others, dev.solve_dd(others.T.astype(float)).T)
    ms = dev.solve_dd(s.astype(float))
    normals = e * (s - others) @ W                      # (K-1, n_gates)
    offsets = 0.5 * e**2 * (float(s @ ms) - m_quad)
    anchor = state_anchor(dev, s)
    A = normals / dev.rescale
    b = offsets + normals @ anchor
    raw = HPolytope(A, b)
    return geometry.remove_redundant(raw)


@dataclass(eq=False)
class DeviceProblem:
    """Membership problem: is the device in the target charge state?

    Operates in the rescaled frame x = rescale * (Vg - anchor(target)).
    Labels are lexicographic state indices from the enumeration box.
    """

    device: DeviceModel
    target: np.ndarray
    s_max: int = DEFAULT_S_MAX

    def __post_init__(self):
        self.target = as_state(self.target, self.device.n_dots)
        self.anchor = state_anchor(self.device, self.target)
        states, _, _ = self.device.state_table(self.s_max)
        self._target_idx = int(np.where(np.all(states == self.target, axis=1))[0][0])

    @property
    def dim(self) -> int:
        return self.device.n_gates

    def to_raw(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) / self.device.rescale + self.anchor

    def to_scaled(self, Vg: np.ndarray) -> np.ndarray:
        return self.device.rescale * (np.asarray(Vg, dtype=float) - self.anchor)

    def membership(self, x: np.ndarray) -> tuple[bool, int]:
        states, alpha, beta = self.device.state_table(self.s_max)
        idx = int(np.argmin(alpha + beta @ self.to_raw(x)))
        return idx == self._target_idx, idx

    def truth_polytope(self) -> HPolytope:
        return ground_truth_polytope(self.device, self.target, self.s_max)

    def interior_point(self) -> np.ndarray:
        return np.zeros(self.dim)


def generate_device(n_dots: int, seed: int, noise_sigma: float = 0.05,
                    max_tries: int = 100) -> DeviceModel:
    """Chain-coupled canonical capacitances with lognormal entrywise noise.

    The rescale factor is set so the all-ones state polytope, centered on its
    anchor, fits in [-10, 10]^d with max coordinate 9.
    """
    if n_dots not in (3, 4):
        raise ValueError("n_dots must be 3 or 4")
    rng = np.random.default_rng(seed)
    base_dd = np.eye(n_dots)
    base_dg = 10.0 * np.eye(n_dots)
    for i in range(n_dots - 1):
        base_dd[i, i + 1] = base_dd[i + 1, i] = 0.25
        base_dg[i, i + 1] = base_dg[i + 1, i] = 3.0
    target = np.ones(n_dots, dtype=int)
    for attempt in range(max_tries):
        C_DD = base_dd * rng.lognormal(0.0, noise_sigma, base_dd.shape)
        C_Dg = base_dg * rng.lognormal(0.0, noise_sigma, base_dg.shape)
        C_DD = 0.5 * (C_DD + C_DD.T)
        try:
            dev = DeviceModel(n_dots, n_dots, C_DD, C_Dg, e_charge=1.0, rescale=1.0)
            truth_raw = ground_truth_polytope(dev, target)
        except (np.linalg.LinAlgError, EmptyPolytope, Unbounded) as exc:
            logger.debug("device draw %d rejected: %s", attempt, exc)
            continue
        verts = geometry.enumerate_vertices(truth_raw)
        extent = float(np.abs(verts.points).max())
        dev.rescale = 9.0 / extent
        return dev
    raise RetryExhausted(f"no valid device after {max_tries} draws")


@dataclass(eq=False)
class VoronoiProblem:
    """Home Voronoi cell of the origin among anisotropic Gaussian sites."""

    dim: int
    sites: np.ndarray
    home_index: int
    truth: HPolytope

    def membership(self, x: np.ndarray) -> tuple[bool, int]:
        d2 = np.einsum("ij,ij->i", self.sites - x, self.sites - x)
        idx = int(np.argmin(d2))
        return idx == self.home_index, idx

    def interior_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def truth_polytope(self) -> HPolytope:
        return self.truth

    def to_json(self) -> dict:
        return {"dim": self.dim, "sites": self.sites.tolist(), "home_index": self.home_index}

    @staticmethod
    def from_json(obj: dict) -> "VoronoiProblem":
        sites = np.asarray(obj["sites"], dtype=float)
        truth = _bisector_cell(sites, obj["home_index"])
        return VoronoiProblem(obj["dim"], sites, obj["home_index"], truth)


def _bisector_cell(sites: np.ndarray, home: int) -> HPolytope:
    """Irredundant halfspace cell of the home site from its 29 bisectors."""
    h = sites[home]
    others = np.delete(sites, home, axis=0)
    A = 2.0 * (others - h)
    b = (h @ h) - np.einsum("ij,ij->i", others, others)
    return geometry.remove_redundant(HPolytope(A, b))


N_SITES = 30
BOX_HALFWIDTH = 10.0


def generate_voronoi(d: int, seed: int, max_tries: int = 10_000) -> VoronoiProblem:
    """Sample 30 sites from N(0, diag(2 * 10^(i/d))), i = 1..d, and keep the
    draw when the origin's cell is closed and inside [-10, 10]^d."""
    if d not in (3, 4):
        raise ValueError("d must be 3 or 4")
    rng = np.random.default_rng(seed)
    stds = np.sqrt(2.0 * 10.0 ** (np.arange(1, d + 1) / d))
    for attempt in range(max_tries):
        sites = rng.standard_normal((N_SITES, d)) * stds
        home = int(np.argmin(np.einsum("ij,ij->i", sites, sites)))
        try:
            truth = _bisector_cell(sites, home)
        except (EmptyPolytope, Unbounded):
            continue
        if not truth.contains(np.zeros(d), eps=-1e-12):
            continue
        verts = geometry.enumerate_vertices(truth)
        if np.abs(verts.points).max() > BOX_HALFWIDTH:
            continue
        return VoronoiProblem(d, sites, home, truth)
    raise RetryExhausted(f"no valid Voronoi instance after {max_tries} draws")
