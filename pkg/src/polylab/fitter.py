"""Sparsity-seeking large-margin polytope estimation.

The decision function is f(x) = max_k A_k . x + b_k with the estimate
polytope {f <= 0}.  Fitting alternates between assigning each outside point
to its argmax row and solving a convex subproblem: row-norm (group-sparse)
regularization plus squared slack penalties under margin constraints,

    min  sum_k ||A_k||_2 + (C/l) sum_i (xi+_i^2 + xi-_i^2)
    s.t. A_j . x_i^- + b_j <= -1 + xi-_i   for all i, j
         A_{s_i} . x_i^+ + b_{s_i} >= 1 - xi+_i
         xi >= 0.

The subproblem is a second-order cone program solved with an interior-point
method (Clarabel) in epigraph form.  Two structural reductions keep large
instances tractable without changing the optimum:

* rows never referenced by the assignment are optimally zero (they only add
  cost and inactive constraints), so the cone program is built over the
  assigned rows only and zero rows are restored afterwards;
* the (l x m) inside-point constraints are generated lazily; the solution is
  accepted only once every dropped constraint is verified inactive.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import clarabel
import numpy as np
import scipy.sparse as sp

from . import geometry
from .errors import DegenerateInput, SolverFailure
from .geometry import HPolytope, VertexSet
from .oracle import Dataset

logger = logging.getLogger(__name__)

DEFAULT_TAU_PRUNE = 1e-6
DEFAULT_SOLVER_TOL = 1e-8
DEFAULT_MAX_CCP_ITERS = 50

FULL_SOLVE_LIMIT = 5_000       # l*m below this: skip lazy generation
LAZY_MAX_ROUNDS = 40
LAZY_TOP_PER_POINT = 3         # violated constraints added per point per round


@dataclass(frozen=True)
class MarginModel:
    """Rows (A, b) of the decision function f(x) = max_k A_k . x + b_k."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.shape[0]:
            raise ValueError("row count mismatch between A and b")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.A.T + self.b

    def f(self, X: np.ndarray) -> np.ndarray:
        return self.decision_values(X).max(axis=1)

    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.A, axis=1)

    def pruned(self, tau_rel: float = DEFAULT_TAU_PRUNE) -> tuple["MarginModel", np.ndarray]:
        """Drop rows with ||A_k|| <= tau_rel * max_k ||A_k||."""
        norms = self.row_norms()
        if self.n_rows == 0 or norms.max() == 0.0:
            keep = np.zeros(self.n_rows, dtype=bool)
        else:
            keep = norms > tau_rel * norms.max()
        return MarginModel(self.A[keep], self.b[keep]), np.where(keep)[0]

    def as_hpolytope(self) -> HPolytope:
        return HPolytope(self.A, self.b)

    def to_json(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @staticmethod
    def from_json(obj) -> "MarginModel":
        return MarginModel(np.asarray(obj["A"], dtype=float), np.asarray(obj["b"], dtype=float))


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameters of the restart-fitting loop."""

    C: float
    sigma: float
    n_repeat: int = 10
    tau_prune: float = DEFAULT_TAU_PRUNE
    solver_tol: float = DEFAULT_SOLVER_TOL
    max_ccp_iters: int = DEFAULT_MAX_CCP_ITERS
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0 or not self.sigma >= 0:
            raise ValueError("C must be positive and sigma nonnegative")
        if self.n_repeat < 0:
            raise ValueError("n_repeat must be nonnegative")


@dataclass
class SubproblemSolution:
    model: MarginModel
    xi_minus: np.ndarray
    xi_plus: np.ndarray
    objective: float
    solver_status: str
    lazy_rounds: int
    tier: int = 0


@dataclass
class CcpRun:
    model: MarginModel
    objective: float
    xi_minus: np.ndarray
    xi_plus: np.ndarray
    history: list[float]
    iterations: int
    converged: bool
    tier: int = 0


@dataclass
class FitResult:
    """Best restart of the fitting algorithm, with provenance.

    ``restart_objectives`` holds the final objective of each completed
    restart (index 0 is the hull-initialized run); ``ccp_histories`` the
    per-iteration subproblem objectives of each.
    """

    model: MarginModel
    objective: float
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    assignment: np.ndarray
    restarts_used: int
    ccp_iterations: int
    best_restart: int = 0
    restart_objectives: list[float] = field(default_factory=list)
    ccp_histories: list[list[float]] = field(default_factory=list)
    converged: bool = True

    def to_json(self) -> dict:
        return {
            "model": self.model.to_json(),
            "objective": self.objective,
            "xi_plus": np.asarray(self.xi_plus).tolist(),
            "xi_minus": np.asarray(self.xi_minus).tolist(),
            "assignment": np.asarray(self.assignment, dtype=int).tolist(),
            "restarts_used": self.restarts_used,
            "ccp_iterations": self.ccp_iterations,
            "best_restart": self.best_restart,
            "restart_objectives": self.restart_objectives,
            "ccp_histories": self.ccp_histories,
            "converged": self.converged,
        }

    @staticmethod
    def from_json(obj: dict) -> "FitResult":
        return FitResult(
            MarginModel.from_json(obj["model"]), obj["objective"],
            np.asarray(obj["xi_plus"]), np.asarray(obj["xi_minus"]),
            np.asarray(obj["assignment"], dtype=int), obj["restarts_used"],
            obj["ccp_iterations"], obj["best_restart"],
            obj["restart_objectives"], obj["ccp_histories"], obj["converged"])


def assign(model: MarginModel, X_plus: np.ndarray) -> np.ndarray:
    """Row index of the argmax decision value per outside point; ties break
    to the smallest row index."""
    if model.n_rows == 0:
        raise ValueError("cannot assign against an empty model")
    return np.argmax(model.decision_values(X_plus), axis=1)


# ---------------------------------------------------------------------------
# conic subproblem


def _solve_conic(Xm: np.ndarray, Xp: np.ndarray, s_red: np.ndarray, m: int,
                 C: float, tol: float, ci: np.ndarray, cj: np.ndarray,
                 min_tier: int = 0):
    """Assemble and solve the cone program over m rows with the inside-point
    constraint subset {(ci[k], cj[k])}.  Variable layout:
    z = [vec(A) (m*d), b (m), xi- (l), xi+ (l), t (m)]."""
    l, d = Xm.shape
    nA = m * d
    off_b, off_xm, off_xp, off_t = nA, nA + m, nA + m + l, nA + m + 2 * l
    n = nA + m + 2 * l + m

    P = sp.diags(np.concatenate([
        np.zeros(nA + m), np.full(2 * l, 2.0 * C / l), np.zeros(m)]), format="csc")
    q = np.zeros(n)
    q[off_t:] = 1.0

    nc = len(ci)
    # inside-point rows: A_j . xm_i + b_j - xi-_i <= -1
    r1 = np.repeat(np.arange(nc), d)
    c1 = (cj[:, None] * d + np.arange(d)[None, :]).ravel()
    v1 = Xm[ci].ravel()
    rows = [r1, np.arange(nc), np.arange(nc)]
    cols = [c1, off_b + cj, off_xm + ci]
    vals = [v1, np.ones(nc), -np.ones(nc)]
    # outside-point rows: -(A_{s_i} . xp_i) - b_{s_i} - xi+_i <= -1
    base = nc
    r2 = base + np.repeat(np.arange(l), d)
    c2 = (s_red[:, None] * d + np.arange(d)[None, :]).ravel()
    rows += [r2, base + np.arange(l), base + np.arange(l)]
    cols += [c2, off_b + s_red, off_xp + np.arange(l)]
    vals += [-Xp.ravel(), -np.ones(l), -np.ones(l)]
    # slack nonnegativity
    base2 = nc + l
    rows += [base2 + np.arange(2 * l)]
    cols += [np.arange(off_xm, off_xm + 2 * l)]
    vals += [-np.ones(2 * l)]
    n_ineq = nc + l + 2 * l
    # SOC blocks: s = (t_k, A_k) in Q^{d+1}
    soc_rows = n_ineq + np.arange(m * (d + 1))
    soc_cols = np.empty(m * (d + 1), dtype=int)
    blocks = soc_cols.reshape(m, d + 1)
    blocks[:, 0] = off_t + np.arange(m)
    blocks[:, 1:] = np.arange(nA).reshape(m, d)
    rows.append(soc_rows)
    cols.append(soc_cols)
    vals.append(-np.ones(m * (d + 1)))

    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_ineq + m * (d + 1), n))
    b = np.zeros(n_ineq + m * (d + 1))
    b[:nc + l] = -1.0

    cones = [clarabel.NonnegativeConeT(n_ineq)] + [clarabel.SecondOrderConeT(d + 1)] * m
    # scaled feasibility residuals bottom out near 1e-8 at paper-scale
    # conditioning; the relative gap pins the objective accuracy instead.
    # 10x-relaxed retry tiers cover solves whose floor sits above tol.
    status = ""
    tier = min_tier
    for tier in range(min_tier, 2):
        t = tol * 10.0 ** tier
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_feas = 10.0 * t
        settings.tol_gap_rel = t
        settings.tol_gap_abs = 100.0 * t
        solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
        sol = solver.solve()
        status = str(sol.status)
        if status in ("Solved", "AlmostSolved"):
            if tier > min_tier or status == "AlmostSolved":
                logger.debug("subproblem solved at reduced accuracy "
                             "(tier=%d, status=%s, l=%d, m=%d)", tier, status, l, m)
            break
    else:
        raise SolverFailure(
            f"subproblem solver returned {status}",
            diagnostics={"status": status, "l": l, "m": m, "nc": nc, "C": C})
    z = np.asarray(sol.x)
    A_red = z[:nA].reshape(m, d)
    b_red = z[off_b:off_b + m]
    xi_m = z[off_xm:off_xm + l]
    xi_p = z[off_xp:off_xp + l]
    return A_red, b_red, xi_m, xi_p, status, tier


def solve_subproblem(X: Dataset, assignment: np.ndarray, n_rows: int, C: float,
                     solver_tol: float = DEFAULT_SOLVER_TOL,
                     ranking_model: MarginModel | None = None,
                     min_tier: int = 0) -> SubproblemSolution:
    """Solve the convex subproblem for a fixed assignment over n_rows rows.

    Rows outside the assignment image are returned as exact zeros with
    offset -1 (their optimal value).  ``ranking_model`` orders the lazily
    generated inside-point constraints; any model whose argmax produced the
    assignment works well.  ``min_tier`` starts the accuracy ladder lower
    for problem families known to sit above the solver's numerical floor.
    """
    assignment = np.asarray(assignment, dtype=int)
    l = len(X)
    if l < 1:
        raise ValueError("need at least one pair")
    if assignment.shape != (l,):
        raise ValueError("assignment length must match dataset")
    if assignment.min(initial=0) < 0 or (l and assignment.max() >= n_rows):
        raise ValueError("assignment index out of range")
    Xm, Xp = X.X_minus, X.X_plus
    d = Xm.shape[1]

    used = np.unique(assignment)
    m = len(used)
    s_red = np.searchsorted(used, assignment)

    if C == 0.0:
        # regularizer-only limit: A = 0, slacks absorb everything at no cost
        model = MarginModel(np.zeros((n_rows, d)), np.full(n_rows, -1.0))
        xi_m = np.zeros(l)
        xi_p = np.full(l, 2.0)
        return SubproblemSolution(model, xi_m, xi_p, 0.0, "analytic", 0)

    full = l * m <= FULL_SOLVE_LIMIT
    if full:
        ci = np.repeat(np.arange(l), m)
        cj = np.tile(np.arange(m), l)
        A_red, b_red, xi_m, xi_p, status, tier = _solve_conic(
            Xm, Xp, s_red, m, C, solver_tol, ci, cj, min_tier)
        rounds = 0
    else:
        pair_set = _initial_constraints(Xm, used, s_red, ranking_model)
        status = ""
        tier = min_tier
        for rounds in range(1, LAZY_MAX_ROUNDS + 1):
            ci, cj = pair_set
            A_red, b_red, xi_m, xi_p, status, tier = _solve_conic(
                Xm, Xp, s_red, m, C, solver_tol, ci, cj, tier)
            viol = Xm @ A_red.T + b_red[None, :] + 1.0 - xi_m[:, None]
            new = _worst_violations(viol, pair_set, tol=10 * solver_tol)
            if new is None:
                break
            pair_set = new
        else:
            raise SolverFailure("lazy constraint generation did not converge",
                                diagnostics={"l": l, "m": m})
        logger.debug("lazy solve: l=%d m=%d rounds=%d nc=%d", l, m, rounds, len(pair_set[0]))

    A_full = np.zeros((n_rows, d))
    b_full = np.full(n_rows, -1.0)
    A_full[used] = A_red
    b_full[used] = b_red
    model = MarginModel(A_full, b_full)
    objective = float(np.linalg.norm(A_red, axis=1).sum()
                      + (C / l) * (np.maximum(xi_m, 0) ** 2 + np.maximum(xi_p, 0) ** 2).sum())
    return SubproblemSolution(model, xi_m, xi_p, objective, status,
                              rounds if not full else 0, tier)


def _initial_constraints(Xm: np.ndarray, used: np.ndarray, s_red: np.ndarray,
                         ranking_model: MarginModel | None) -> tuple[np.ndarray, np.ndarray]:
    """Seed constraint set: each point's own assigned row plus its top-ranked
    rows under the ranking model."""
    l = Xm.shape[0]
    m = len(used)
    ci = [np.arange(l)]
    cj = [s_red]
    if ranking_model is not None and m > 1:
        k = min(m, Xm.shape[1] + 2)
        vals = Xm @ ranking_model.A[used].T + ranking_model.b[used]
        top = np.argpartition(-vals, k - 1, axis=1)[:, :k]
        ci.append(np.repeat(np.arange(l), k))
        cj.append(top.ravel())
    return _dedup_pairs(np.concatenate(ci), np.concatenate(cj), m)


def _dedup_pairs(ci: np.ndarray, cj: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    key = ci.astype(np.int64) * m + cj
    uniq = np.unique(key)
    return uniq // m, uniq % m


def _worst_violations(viol: np.ndarray, pair_set, tol: float):
    """Grow the constraint set by the worst violations per point AND per row
    (row coverage pins offsets of rows heading to zero); returns None when
    nothing is violated beyond tol."""
    l, m = viol.shape
    ci_old, cj_old = pair_set
    mask = np.zeros((l, m), dtype=bool)
    mask[ci_old, cj_old] = True
    viol = np.where(mask, -np.inf, viol)
    if not (viol > tol).any():
        return None
    k = min(m, LAZY_TOP_PER_POINT)
    top = np.argpartition(-viol, k - 1, axis=1)[:, :k]
    rows = np.repeat(np.arange(l), k)
    take = viol[rows, top.ravel()] > tol
    worst_point = np.argmax(viol, axis=0)            # per row
    row_take = viol[worst_point, np.arange(m)] > tol
    ci_new = np.concatenate([ci_old, rows[take], worst_point[row_take]])
    cj_new = np.concatenate([cj_old, top.ravel()[take], np.arange(m)[row_take]])
    return _dedup_pairs(ci_new, cj_new, m)


# ---------------------------------------------------------------------------
# convex-concave outer loop


def ccp_fit(X: Dataset, init: MarginModel, C: float,
            tau_prune: float = DEFAULT_TAU_PRUNE,
            solver_tol: float = DEFAULT_SOLVER_TOL,
            max_ccp_iters: int = DEFAULT_MAX_CCP_ITERS,
            min_tier: int = 0) -> CcpRun:
    """Alternate assignment and convex solves until the assignment repeats.

    Rows are pruned after every solve; pruned rows are never reintroduced.
    A run that hits the iteration cap returns its best iterate with
    ``converged=False``.
    """
    if init.n_rows == 0:
        raise ValueError("init model must be non-empty")
    Xp = X.X_plus
    model = init
    row_ids = np.arange(init.n_rows)
    seen: dict[tuple, int] = {}
    history: list[float] = []
    xi_m = xi_p = np.zeros(len(X))
    converged = False
    tier = min_tier
    for it in range(max_ccp_iters):
        s = assign(model, Xp)
        key = tuple(row_ids[s].tolist())
        prev_it = seen.get(key)
        if prev_it == it - 1:
            converged = True
            break
        if prev_it is not None:
            # assignment cycle: the subproblem would repeat; stop at the
            # current iterate (its objective already matches the cycle's)
            logger.debug("CCP assignment cycle (iters %d and %d)", prev_it, it)
            converged = True
            break
        seen[key] = it
        sol = solve_subproblem(X, s, model.n_rows, C, solver_tol,
                               ranking_model=model, min_tier=tier)
        tier = max(tier, sol.tier)
        history.append(sol.objective)
        xi_m, xi_p = sol.xi_minus, sol.xi_plus
        model, keep = sol.model.pruned(tau_prune)
        row_ids = row_ids[keep]
        if model.n_rows == 0:
            logger.warning("all rows pruned; returning empty model")
            converged = True
            break
    else:
        logger.warning("CCP hit max iterations (%d); returning last iterate",
                       max_ccp_iters)
    objective = history[-1] if history else np.inf
    return CcpRun(model, objective, xi_m, xi_p, history, len(history), converged, tier)


def fit_polytope(X: Dataset, cfg: FitConfig) -> FitResult:
    """Hull-initialized CCP fit followed by noise restarts (best of all).

    The initial rows are the hull facets of the inside points with offsets
    shifted by -1; each restart perturbs the pruned first solution with
    i.i.d. N(0, sigma^2) entries drawn from per-restart substreams.
    """
    Xm = X.X_minus
    d = Xm.shape[1]
    hull = geometry.convex_hull(VertexSet(d, Xm))      # DegenerateInput propagates
    init = MarginModel(hull.A, hull.b - 1.0)
    run0 = ccp_fit(X, init, cfg.C, cfg.tau_prune, cfg.solver_tol, cfg.max_ccp_iters)

    runs: list[CcpRun | None] = [run0]
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_repeat)
    base = run0.model
    for i, child in enumerate(children, start=1):
        rng = np.random.default_rng(child)
        noisy = MarginModel(base.A + rng.normal(0.0, cfg.sigma, base.A.shape),
                            base.b + rng.normal(0.0, cfg.sigma, base.b.shape))
        try:
            runs.append(ccp_fit(X, noisy, cfg.C, cfg.tau_prune, cfg.solver_tol,
                                cfg.max_ccp_iters, min_tier=run0.tier))
        except SolverFailure as exc:
            logger.warning("restart %d failed and was skipped: %s", i, exc)
            runs.append(None)
    completed = [(i, r) for i, r in enumerate(runs) if r is not None]
    best_idx, best = min(completed, key=lambda ir: (ir[1].objective, ir[0]))
    assignment = (assign(best.model, X.X_plus) if best.model.n_rows else
                  np.zeros(0, dtype=int))
    return FitResult(
        model=best.model,
        objective=best.objective,
        xi_plus=best.xi_plus,
        xi_minus=best.xi_minus,
        assignment=assignment,
        restarts_used=len(completed),
        ccp_iterations=best.iterations,
        best_restart=best_idx,
        restart_objectives=[r.objective if r is not None else float("nan") for r in runs],
        ccp_histories=[r.history if r is not None else [] for r in runs],
        converged=all(r.converged for _, r in completed),
    )


def baseline_fit(X: Dataset, C: float,
                 tau_prune: float = DEFAULT_TAU_PRUNE,
                 solver_tol: float = DEFAULT_SOLVER_TOL) -> FitResult:
    """Label-informed convex fit: one subproblem with the true assignment.

    Requires every pair to carry a state label; rows are indexed by the
    dense re-indexing of the observed labels.
    """
    labels = X.labels
    if any(lab is None for lab in labels):
        raise ValueError("baseline_fit requires labels on all pairs")
    uniq, s = np.unique(np.asarray(labels, dtype=int), return_inverse=True)
    sol = solve_subproblem(X, s, len(uniq), C, solver_tol)
    model, keep = sol.model.pruned(tau_prune)
    assignment = assign(model, X.X_plus) if model.n_rows else np.zeros(0, dtype=int)
    return FitResult(
        model=model,
        objective=sol.objective,
        xi_plus=sol.xi_plus,
        xi_minus=sol.xi_minus,
        assignment=assignment,
        restarts_used=1,
        ccp_iterations=1,
        best_restart=0,
        restart_objectives=[sol.objective],
        ccp_histories=[[sol.objective]],
        converged=True,
    )
