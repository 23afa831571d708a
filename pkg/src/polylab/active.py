"""Active learning of a polytope: query proposal, refitting, termination.

A learned estimate equals the truth when every vertex of the estimate lies
on the true boundary and every facet carries a true-boundary point in its
interior, so each round probes exactly those locations: line searches are
sent from the interior anchor toward every facet center and every vertex of
the current estimate.  The loop terminates once all newly measured points
lie within eps_end of the estimate's boundary.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .errors import DegenerateInput, EmptyPolytope, NoExit, OracleFailure, Unbounded
from .fitter import FitConfig, FitResult, MarginModel, baseline_fit, fit_polytope
from .geometry import HPolytope
from .oracle import CountingOracle, Dataset, line_search

logger = logging.getLogger(__name__)

DEFAULT_N_INIT = 100
DEFAULT_MAX_ROUNDS = 50
ECDF_N_TARGETS = 20
ECDF_T_MAX = 10.0


@dataclass(frozen=True)
class ActiveConfig:
    """Loop parameters; eps_end and eps_close default to 1.5*delta and delta."""

    delta: float
    fit: FitConfig
    eps_end: float | None = None
    eps_close: float | None = None
    n_init: int = DEFAULT_N_INIT
    max_rounds: int = DEFAULT_MAX_ROUNDS
    r_max: float = 40.0

    def __post_init__(self):
        if self.eps_end is None:
            object.__setattr__(self, "eps_end", 1.5 * self.delta)
        if self.eps_close is None:
            object.__setattr__(self, "eps_close", self.delta)
        if not (self.eps_end > 0 and self.eps_close > 0):
            raise ValueError("eps_end and eps_close must be positive")


@dataclass
class RoundRecord:
    """One refinement round: sizes, search counts, and distance diagnostics."""

    index: int
    n_pairs_before: int
    n_pairs_after: int
    searches: int
    searches_failed: int
    cumulative_searches: int
    cumulative_queries: int
    new_point_distances: list[float]
    max_new_distance: float
    max_all_distance: float
    model_A: list
    model_b: list
    objective: float
    ccp_histories: list[list[float]]
    fallback: bool
    terminated: bool

    def to_json(self) -> dict:
        return self.__dict__.copy()

    @staticmethod
    def from_json(obj: dict) -> "RoundRecord":
        return RoundRecord(**obj)


@dataclass
class RunTrace:
    rounds: list[RoundRecord] = field(default_factory=list)

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.rounds:
                fh.write(json.dumps(rec.to_json()) + "\n")

    @staticmethod
    def from_jsonl(path) -> "RunTrace":
        rounds = []
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    rounds.append(RoundRecord.from_json(json.loads(line)))
        return RunTrace(rounds)

    @property
    def total_searches(self) -> int:
        return self.rounds[-1].cumulative_searches if self.rounds else 0

    @property
    def total_queries(self) -> int:
        return self.rounds[-1].cumulative_queries if self.rounds else 0

    @property
    def terminated(self) -> bool:
        return bool(self.rounds and self.rounds[-1].terminated)


def propose_queries(model: MarginModel) -> list[np.ndarray]:
    """Boundary queries of the estimate: one center per facet, then every
    vertex.  Raises EmptyPolytope/Unbounded when the estimate is degenerate;
    callers fall back to a round of random directions."""
    if model.n_rows == 0:
        raise EmptyPolytope("empty model")
    P = model.as_hpolytope()
    if P.n_halfspaces > geometry.MAX_HALFSPACES_ENUM:
        raise Unbounded(f"estimate has {P.n_halfspaces} rows; enumeration refused")
    reduced = geometry.remove_redundant(P)
    descriptions = geometry.facets(reduced)
    vertices = geometry.enumerate_vertices(reduced)
    queries = [f.center for f in descriptions]
    queries.extend(vertices.points)
    return queries


def _boundary_distances(model: MarginModel, pts: np.ndarray) -> np.ndarray:
    """dist to the estimate boundary for each point (vectorized inside case)."""
    P = model.as_hpolytope()
    norms = np.linalg.norm(P.A, axis=1)
    vals = (pts @ P.A.T + P.b) / norms
    out = np.empty(len(pts))
    inside = vals.max(axis=1) <= 0
    out[inside] = -vals[inside].max(axis=1)
    for i in np.where(~inside)[0]:
        out[i] = geometry.boundary_distance(P, pts[i])
    return out


def active_learn(problem, o: np.ndarray, cfg: ActiveConfig,
                 algorithm: str = "main",
                 initial_model: MarginModel | None = None,
                 ) -> tuple[FitResult, Dataset, RunTrace]:
    """Run the full loop against a membership problem.

    ``algorithm`` selects the fitting strategy: "main" (restarted CCP) or
    "baseline" (label-informed single solve).  ``initial_model`` injects a
    starting estimate and skips the seeding round; with an exact model the
    loop terminates after one validation round.
    """
    oracle = CountingOracle(problem)
    o = np.asarray(o, dtype=float)
    member, _ = oracle.membership(o)
    if not member:
        raise OracleFailure("anchor point is not a member")
    d = o.shape[0]
    ss = np.random.SeedSequence(cfg.fit.seed)
    dir_seed, *fit_seeds = ss.spawn(cfg.max_rounds + 2)
    dir_rng = np.random.default_rng(dir_seed)

    def fit(X: Dataset, round_idx: int) -> FitResult:
        seed = int(fit_seeds[round_idx].generate_state(1, dtype=np.uint64)[0] % (2**63))
        if algorithm == "baseline":
            return baseline_fit(X, cfg.fit.C, cfg.fit.tau_prune, cfg.fit.solver_tol)
        if algorithm != "main":
            raise ValueError(f"unknown algorithm {algorithm!r}")
        return fit_polytope(X, replace(cfg.fit, seed=seed))

    X = Dataset(origin=o)
    trace = RunTrace()
    cumulative = 0

    def run_searches(directions):
        nonlocal cumulative
        pairs, n_run, n_failed = [], 0, 0
        for u in directions:
            if not np.linalg.norm(u) > 0:
                continue
            n_run += 1
            try:
                pairs.append(line_search(oracle, o, u, cfg.delta, cfg.r_max))
            except NoExit:
                logger.warning("line search found no boundary; direction skipped")
                n_failed += 1
        cumulative += n_run
        return pairs, n_run, n_failed

    if initial_model is None:
        dirs = dir_rng.standard_normal((cfg.n_init, d))
        pairs, n_run, n_failed = run_searches(dirs)
        for p in pairs:
            X.add(p, cfg.eps_close)
        trace.rounds.append(RoundRecord(
            index=0, n_pairs_before=0, n_pairs_after=len(X),
            searches=n_run, searches_failed=n_failed,
            cumulative_searches=cumulative, cumulative_queries=oracle.n_queries,
            new_point_distances=[],
            max_new_distance=float("inf"), max_all_distance=float("inf"),
            model_A=[], model_b=[], objective=float("nan"), ccp_histories=[],
            fallback=False, terminated=False))
        result = fit(X, 0)
    else:
        result = FitResult(model=initial_model, objective=float("nan"),
                           xi_plus=np.zeros(0), xi_minus=np.zeros(0),
                           assignment=np.zeros(0, dtype=int), restarts_used=0,
                           ccp_iterations=0)

    for rnd in range(1, cfg.max_rounds + 1):
        model = result.model
        n_before = len(X)
        fallback = False
        try:
            queries = propose_queries(model)
            directions = [q - o for q in queries]
        except (EmptyPolytope, Unbounded, DegenerateInput) as exc:
            logger.warning("round %d: estimate unusable (%s); random fallback", rnd, exc)
            fallback = True
            directions = list(dir_rng.standard_normal((max(2 * d, 8), d)))
        pairs, n_run, n_failed = run_searches(directions)
        new_pts = np.array([q for p in pairs for q in (p.x_minus, p.x_plus)])
        for p in pairs:
            X.add(p, cfg.eps_close)
        if fallback or new_pts.size == 0:
            dists = np.full(max(len(new_pts), 1), np.inf)
            max_all = float("inf")
        else:
            dists = _boundary_distances(model, new_pts)
            stored = np.vstack([X.X_minus, X.X_plus])
            max_all = float(_boundary_distances(model, stored).max())
        terminated = bool(len(dists) and np.max(dists) < cfg.eps_end)
        trace.rounds.append(RoundRecord(
            index=rnd, n_pairs_before=n_before, n_pairs_after=len(X),
            searches=n_run, searches_failed=n_failed,
            cumulative_searches=cumulative, cumulative_queries=oracle.n_queries,
            new_point_distances=[float(v) for v in dists],
            max_new_distance=float(np.max(dists) if len(dists) else np.inf),
            max_all_distance=max_all,
            model_A=model.A.tolist(), model_b=model.b.tolist(),
            objective=float(result.objective),
            ccp_histories=result.ccp_histories,
            fallback=fallback, terminated=terminated))
        if terminated:
            break
        result = fit(X, rnd)
    else:
        logger.warning("active loop hit max_rounds=%d without terminating",
                       cfg.max_rounds)
    return result, X, trace


def ecdf_targets(trace: RunTrace, delta: float) -> list[dict]:
    """Line searches needed to reach each geometric precision target.

    Target t_j (between eps_end = 1.5*delta and 10) counts as reached at the
    first round whose full training set lies within t_j of the estimate
    trained on X_i; a None entry means the run never reached that target.
    """
    if not trace.rounds:
        raise ValueError("empty trace")
    targets = np.geomspace(1.5 * delta, ECDF_T_MAX, ECDF_N_TARGETS)
    rounds = [r for r in trace.rounds if r.index >= 1]
    out = []
    for j, t in enumerate(targets, start=1):
        entry = {"target_index": j, "target": float(t), "searches": None}
        for r in rounds:
            if r.max_all_distance < t:
                entry["searches"] = r.n_pairs_before
                break
        out.append(entry)
    return out
