"""Command-line interface: problem generation, single runs, sweeps, reports."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, metrics, models, reporting
from .active import ActiveConfig, ecdf_targets
from .fitter import FitConfig, FitResult

logger = logging.getLogger(__name__)


def _setup_logging():
    level = os.environ.get("POLYLAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True)


def cmd_gen_voronoi(args) -> int:
    problem = models.generate_voronoi(args.dim, args.seed)
    _dump(args.out, problem.to_json())
    print(f"wrote {args.out} ({problem.truth.n_halfspaces} facets)")
    return 0


def cmd_gen_device(args) -> int:
    device = models.generate_device(args.dots, args.seed)
    _dump(args.out, device.to_json())
    prob = models.DeviceProblem(device, np.ones(args.dots, dtype=int))
    print(f"wrote {args.out} ({prob.truth_polytope().n_halfspaces} facets)")
    return 0


def _load_problem(path):
    with open(path) as fh:
        return experiments.problem_from_json(json.load(fh))


def cmd_learn(args) -> int:
    from .active import active_learn

    problem = _load_problem(args.problem)
    algorithm = "baseline" if args.baseline else "main"
    c_scale = (experiments.C_SCALE_BASELINE if args.baseline
               else experiments.C_SCALE_MAIN)
    fit = FitConfig(C=args.C if args.C is not None else c_scale / args.delta,
                    sigma=args.sigma if args.sigma is not None
                    else experiments.SIGMA_SCALE / args.delta,
                    n_repeat=args.n_repeat, seed=args.seed)
    cfg = ActiveConfig(delta=args.delta, fit=fit, n_init=args.n_init,
                       max_rounds=args.max_rounds)
    result, dataset, trace = active_learn(problem, problem.interior_point(),
                                          cfg, algorithm=algorithm)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "dataset.json", dataset.to_json())
    trace.to_jsonl(out / "trace.jsonl")
    _dump(out / "fit.json", result.to_json())
    _dump(out / "ecdf.json", ecdf_targets(trace, args.delta))
    print(f"terminated={trace.terminated} rounds={len(trace.rounds) - 1} "
          f"searches={trace.total_searches} rows={result.model.n_rows}")
    return 0


def cmd_evaluate(args) -> int:
    problem = _load_problem(args.problem)
    with open(args.fit) as fh:
        result = FitResult.from_json(json.load(fh))
    truth = problem.truth_polytope()
    E, details = metrics.matching_error(truth, result.model)
    est_iou = metrics.iou(truth, result.model.as_hpolytope())
    table = metrics.facet_error_table(truth, details)
    payload = {
        "truth_facets": truth.n_halfspaces,
        "est_rows": result.model.n_rows,
        "unmatched": sum(not m.matched for m in details),
        "matching_error": E,
        "iou": est_iou,
        "facet_table": table,
    }
    if args.out:
        _dump(args.out, payload)
    print(json.dumps({k: payload[k] for k in
                      ("truth_facets", "est_rows", "unmatched",
                       "matching_error", "iou")}, indent=2))
    return 0


def cmd_run(args) -> int:
    with open(args.config) as fh:
        cfg = experiments.ExperimentConfig.from_json(json.load(fh))
    n_failed = experiments.run_experiment(cfg, args.out, jobs=args.jobs)
    n_cells = len(cfg.cells())
    print(f"{n_cells - n_failed}/{n_cells} cells complete, {n_failed} failed")
    return 1 if n_failed == n_cells else 0


def cmd_report(args) -> int:
    return reporting.report(args.artifacts, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polylab",
                                description="Facet discovery for convex polytopes "
                                            "from membership line searches")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-voronoi", help="generate a Voronoi-cell problem")
    g.add_argument("--dim", type=int, required=True, choices=(3, 4))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_voronoi)

    g = sub.add_parser("gen-device", help="generate a simulated dot-array device")
    g.add_argument("--dots", type=int, required=True, choices=(3, 4))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_device)

    g = sub.add_parser("learn", help="run the active-learning loop on a problem file")
    g.add_argument("--problem", required=True)
    g.add_argument("--delta", type=float, required=True)
    g.add_argument("--baseline", action="store_true")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--C", type=float, default=None)
    g.add_argument("--sigma", type=float, default=None)
    g.add_argument("--n-repeat", type=int, default=10)
    g.add_argument("--n-init", type=int, default=100)
    g.add_argument("--max-rounds", type=int, default=50)
    g.set_defaults(func=cmd_learn)

    g = sub.add_parser("evaluate", help="compare a fit against its problem's truth")
    g.add_argument("--problem", required=True)
    g.add_argument("--fit", required=True)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_evaluate)

    g = sub.add_parser("run", help="run a sweep from a config file")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--jobs", type=int, default=1)
    g.set_defaults(func=cmd_run)

    g = sub.add_parser("report", help="build figures and tables from a sweep")
    g.add_argument("artifacts", help="sweep output directory")
    g.add_argument("--out", default=None, help="report directory")
    g.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
