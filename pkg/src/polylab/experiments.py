"""Experiment sweep harness: generate problems, run pipelines, persist artifacts.

A sweep is a grid of cells (problem kind, dimension, instance, delta,
algorithm).  Every cell is independently seeded from the master seed and the
cell key, so single cells reproduce bit-for-bit regardless of execution
order, and completed cells are skipped on re-runs.
"""

from __future__ import annotations

import csv
import json
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics, models
from .active import ActiveConfig, RunTrace, active_learn, ecdf_targets
from .errors import PolylabError
from .fitter import FitConfig

logger = logging.getLogger(__name__)

C_SCALE_MAIN = 75.0
C_SCALE_BASELINE = 750.0
SIGMA_SCALE = 0.001

RESULT_COLUMNS = [
    "cell_id", "kind", "dim", "instance", "delta", "algorithm",
    "problem_seed", "fit_seed", "truth_facets", "est_rows", "unmatched",
    "matching_error", "iou", "searches_total", "membership_queries",
    "pairs", "rounds", "terminated", "objective",
]


@dataclass(frozen=True)
class ProblemSpec:
    kind: str           # "voronoi" | "device"
    dim: int

    def __post_init__(self):
        if self.kind not in ("voronoi", "device"):
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.dim not in (3, 4):
            raise ValueError("dim must be 3 or 4")


@dataclass(frozen=True)
class CellSpec:
    problem: ProblemSpec
    instance: int
    delta: float
    algorithm: str

    @property
    def cell_id(self) -> str:
        return (f"{self.problem.kind}{self.problem.dim}d_i{self.instance:03d}"
                f"_delta{self.delta:g}_{self.algorithm}")


@dataclass
class ExperimentConfig:
    problems: list[ProblemSpec]
    deltas: list[float]
    n_instances: int
    algorithms: list[str] = field(default_factory=lambda: ["main", "baseline"])
    master_seed: int = 2024
    n_init: int = 100
    max_rounds: int = 50
    n_repeat: int = 10
    s_max: int = models.DEFAULT_S_MAX
    fit_overrides: dict = field(default_factory=dict)

    @staticmethod
    def from_json(obj: dict) -> "ExperimentConfig":
        problems = [ProblemSpec(p["kind"], int(p.get("dim", p.get("dots"))))
                    for p in obj["problems"]]
        return ExperimentConfig(
            problems=problems,
            deltas=[float(x) for x in obj["deltas"]],
            n_instances=int(obj["n_instances"]),
            algorithms=list(obj.get("algorithms", ["main", "baseline"])),
            master_seed=int(obj.get("master_seed", 2024)),
            n_init=int(obj.get("n_init", 100)),
            max_rounds=int(obj.get("max_rounds", 50)),
            n_repeat=int(obj.get("n_repeat", 10)),
            s_max=int(obj.get("s_max", models.DEFAULT_S_MAX)),
            fit_overrides=dict(obj.get("fit_overrides", {})),
        )

    def cells(self) -> list[CellSpec]:
        out = []
        for prob in self.problems:
            for inst in range(self.n_instances):
                for delta in self.deltas:
                    for alg in self.algorithms:
                        out.append(CellSpec(prob, inst, delta, alg))
        return out


def _derive_seed(master: int, key: str) -> int:
    ss = np.random.SeedSequence([master, zlib.crc32(key.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2 ** 63))


def problem_seed_for(cfg_seed: int, spec: CellSpec) -> int:
    # instances are shared across deltas and algorithms for paired comparison
    key = f"{spec.problem.kind}/{spec.problem.dim}/{spec.instance}"
    return _derive_seed(cfg_seed, key)


def fit_seed_for(cfg_seed: int, spec: CellSpec) -> int:
    return _derive_seed(cfg_seed, spec.cell_id)


def build_problem(spec: CellSpec, seed: int, s_max: int):
    if spec.problem.kind == "voronoi":
        return models.generate_voronoi(spec.problem.dim, seed)
    device = models.generate_device(spec.problem.dim, seed)
    return models.DeviceProblem(device, np.ones(spec.problem.dim, dtype=int), s_max)


def problem_to_json(problem) -> dict:
    if isinstance(problem, models.VoronoiProblem):
        return {"kind": "voronoi", **problem.to_json()}
    return {"kind": "device", **problem.device.to_json(),
            "target": problem.target.tolist(), "s_max": problem.s_max}


def problem_from_json(obj: dict):
    """Accepts the bare device/Voronoi JSON formats (kind inferred)."""
    kind = obj.get("kind") or ("voronoi" if "sites" in obj else "device")
    if kind == "voronoi":
        return models.VoronoiProblem.from_json(obj)
    device = models.DeviceModel.from_json(obj)
    target = np.asarray(obj.get("target", np.ones(device.n_dots)), dtype=int)
    return models.DeviceProblem(device, target, obj.get("s_max", models.DEFAULT_S_MAX))


def derived_configs(delta: float, algorithm: str, fit_seed: int,
                    cfg: ExperimentConfig) -> ActiveConfig:
    c_scale = C_SCALE_MAIN if algorithm == "main" else C_SCALE_BASELINE
    fit_kwargs = {
        "C": c_scale / delta,
        "sigma": SIGMA_SCALE / delta,
        "n_repeat": cfg.n_repeat,
        "seed": fit_seed,
    }
    fit_kwargs.update(cfg.fit_overrides)
    return ActiveConfig(delta=delta, fit=FitConfig(**fit_kwargs),
                        n_init=cfg.n_init, max_rounds=cfg.max_rounds)


def run_cell(spec: CellSpec, cfg: ExperimentConfig, cell_dir: Path) -> dict:
    """Run one cell end to end and persist all artifacts into cell_dir."""
    cell_dir.mkdir(parents=True, exist_ok=True)
    p_seed = problem_seed_for(cfg.master_seed, spec)
    f_seed = fit_seed_for(cfg.master_seed, spec)
    problem = build_problem(spec, p_seed, cfg.s_max)
    _dump_json(cell_dir / "problem.json", problem_to_json(problem))

    active_cfg = derived_configs(spec.delta, spec.algorithm, f_seed, cfg)
    t0 = time.time()
    result, dataset, trace = active_learn(problem, problem.interior_point(),
                                          active_cfg, algorithm=spec.algorithm)
    runtime = time.time() - t0

    truth = problem.truth_polytope()
    E, details = metrics.matching_error(truth, result.model)
    est_iou = metrics.iou(truth, result.model.as_hpolytope())
    facet_table = metrics.facet_error_table(truth, details)

    _dump_json(cell_dir / "dataset.json", dataset.to_json())
    trace.to_jsonl(cell_dir / "trace.jsonl")
    _dump_json(cell_dir / "fit.json", result.to_json())
    row = {
        "cell_id": spec.cell_id,
        "kind": spec.problem.kind,
        "dim": spec.problem.dim,
        "instance": spec.instance,
        "delta": spec.delta,
        "algorithm": spec.algorithm,
        "problem_seed": p_seed,
        "fit_seed": f_seed,
        "truth_facets": truth.n_halfspaces,
        "est_rows": result.model.n_rows,
        "unmatched": sum(not m.matched for m in details),
        "matching_error": E,
        "iou": est_iou,
        "searches_total": trace.total_searches,
        "membership_queries": trace.total_queries,
        "pairs": len(dataset),
        "rounds": len(trace.rounds) - 1,
        "terminated": trace.terminated,
        "objective": float(result.objective),
    }
    _dump_json(cell_dir / "result.json", {
        **row,
        "runtime_s": runtime,
        "facet_table": facet_table,
        "ecdf": ecdf_targets(trace, spec.delta),
    })
    return row


def _dump_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True)


def _run_cell_job(args):
    spec, cfg, out_dir = args
    cell_dir = Path(out_dir) / "cells" / spec.cell_id
    try:
        row = run_cell(spec, cfg, cell_dir)
        return spec.cell_id, row, None
    except (PolylabError, ValueError, np.linalg.LinAlgError) as exc:
        logger.exception("cell %s failed", spec.cell_id)
        return spec.cell_id, None, f"{type(exc).__name__}: {exc}"


def run_experiment(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> int:
    """Run all incomplete cells; returns the number of failed cells.

    results.csv is regenerated from the persisted per-cell rows at the end,
    sorted by cell id, so resumed and parallel runs produce identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "config.json", {
        "problems": [{"kind": p.kind, "dim": p.dim} for p in cfg.problems],
        "deltas": cfg.deltas, "n_instances": cfg.n_instances,
        "algorithms": cfg.algorithms, "master_seed": cfg.master_seed,
        "n_init": cfg.n_init, "max_rounds": cfg.max_rounds,
        "n_repeat": cfg.n_repeat, "s_max": cfg.s_max,
        "fit_overrides": cfg.fit_overrides,
    })
    cells = cfg.cells()
    pending = [c for c in cells
               if not (out / "cells" / c.cell_id / "result.json").exists()]
    logger.info("%d cells total, %d to run", len(cells), len(pending))

    errors: list[tuple[str, str]] = []
    jobs_args = [(spec, cfg, str(out)) for spec in pending]
    if jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell_job, jobs_args))
    else:
        outcomes = [_run_cell_job(a) for a in jobs_args]
    for cell_id, row, err in outcomes:
        if err is not None:
            errors.append((cell_id, err))

    rows = []
    for spec in cells:
        path = out / "cells" / spec.cell_id / "result.json"
        if path.exists():
            with open(path) as fh:
                data = json.load(fh)
            rows.append({k: data[k] for k in RESULT_COLUMNS})
    rows.sort(key=lambda r: r["cell_id"])
    with open(out / "results.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    if errors:
        with open(out / "errors.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cell_id", "error"])
            writer.writerows(sorted(errors))
    return len(errors)
