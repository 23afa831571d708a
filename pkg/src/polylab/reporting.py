"""Report generation from persisted sweep artifacts (no oracle access).

Produces three tidy CSV tables and three SVG figures: mean matching errors
vs line-search precision, facet-volume error histograms, and the ECDF of
precision targets reached vs number of line searches.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import metrics  # noqa: E402

logger = logging.getLogger(__name__)

NO_DATA_EXIT = 3

SVG_METADATA = {"Date": None, "Creator": None}


def _read_results(out_dir: Path) -> list[dict]:
    path = out_dir / "results.csv"
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _load_cell_json(out_dir: Path, cell_id: str) -> dict:
    with open(out_dir / "cells" / cell_id / "result.json") as fh:
        return json.load(fh)


def report(artifact_dir, report_dir=None) -> int:
    """Build the report bundle; returns a process exit code (0 ok, 3 no data)."""
    out = Path(artifact_dir)
    rows = _read_results(out)
    if not rows:
        logger.error("no results found in %s", out)
        return NO_DATA_EXIT
    dest = Path(report_dir) if report_dir else out / "report"
    dest.mkdir(parents=True, exist_ok=True)

    plt.rcParams["svg.hashsalt"] = "polylab"

    summary = _matching_summary(rows)
    _write_csv(dest / "matching_summary.csv",
               ["kind", "dim", "delta", "algorithm", "n", "mean_unmatched",
                "mean_matching_error", "mean_iou", "mean_searches"], summary)
    _fig_matching(summary, dest / "fig2_matching_error.svg")

    bins = _facet_bins(out, rows)
    _write_csv(dest / "facet_bins.csv",
               ["kind", "dim", "delta", "algorithm", "bin_lower", "bin_upper",
                "count", "errors"], bins)
    _fig_facets(bins, dest / "fig3_facet_volumes.svg")

    ecdf = _ecdf_rows(out, rows)
    _write_csv(dest / "ecdf.csv",
               ["cell_id", "kind", "dim", "delta", "algorithm", "target_index",
                "target", "searches"], ecdf)
    _fig_ecdf(ecdf, dest / "fig4_ecdf.svg")
    logger.info("report written to %s", dest)
    return 0


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def _group_key(row) -> tuple:
    return row["kind"], int(row["dim"]), float(row["delta"]), row["algorithm"]


def _matching_summary(rows: list[dict]) -> list[dict]:
    groups = defaultdict(list)
    for r in rows:
        groups[_group_key(r)].append(r)
    out = []
    for key in sorted(groups):
        rs = groups[key]
        n = len(rs)
        out.append({
            "kind": key[0], "dim": key[1], "delta": key[2], "algorithm": key[3],
            "n": n,
            "mean_unmatched": sum(int(r["unmatched"]) for r in rs) / n,
            "mean_matching_error": sum(float(r["matching_error"]) for r in rs) / n,
            "mean_iou": sum(float(r["iou"]) for r in rs) / n,
            "mean_searches": sum(int(r["searches_total"]) for r in rs) / n,
        })
    return out


def _fig_matching(summary: list[dict], path: Path) -> None:
    kinds = sorted({s["kind"] for s in summary})
    fig, axes = plt.subplots(1, len(kinds), figsize=(5 * len(kinds), 3.6),
                             squeeze=False)
    for ax, kind in zip(axes[0], kinds):
        for dim in sorted({s["dim"] for s in summary if s["kind"] == kind}):
            for alg in sorted({s["algorithm"] for s in summary
                               if s["kind"] == kind and s["dim"] == dim}):
                pts = sorted((s["delta"], s["mean_unmatched"]) for s in summary
                             if (s["kind"], s["dim"], s["algorithm"]) == (kind, dim, alg))
                ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                        label=f"{dim}D {alg}")
        ax.set_title(kind)
        ax.set_xlabel("line search precision delta")
        ax.set_ylabel("mean unmatched facets")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata=SVG_METADATA)
    plt.close(fig)


def _facet_bins(out: Path, rows: list[dict]) -> list[dict]:
    groups = defaultdict(list)
    for r in rows:
        data = _load_cell_json(out, r["cell_id"])
        groups[_group_key(r)].extend(data["facet_table"])
    out_rows = []
    for key in sorted(groups):
        table = groups[key]
        try:
            bins = metrics.facet_error_histogram(table)
        except ValueError:
            continue
        for b in bins:
            out_rows.append({"kind": key[0], "dim": key[1], "delta": key[2],
                             "algorithm": key[3], **b})
    return out_rows


def _fig_facets(bins: list[dict], path: Path) -> None:
    keys = sorted({(b["kind"], b["dim"], b["delta"], b["algorithm"]) for b in bins})
    n = max(len(keys), 1)
    fig, axes = plt.subplots((n + 2) // 3, 3, figsize=(12, 2.6 * ((n + 2) // 3)),
                             squeeze=False)
    flat = axes.ravel()
    for ax, key in zip(flat, keys):
        sel = [b for b in bins if (b["kind"], b["dim"], b["delta"], b["algorithm"]) == key]
        lowers = [b["bin_lower"] for b in sel]
        counts = [b["count"] for b in sel]
        errors = [b["errors"] for b in sel]
        ax.bar(range(len(sel)), counts, color="#7799cc", label="facets")
        ax.bar(range(len(sel)), errors, color="#cc4444", label="errors")
        ax.set_xticks(range(len(sel)))
        ax.set_xticklabels([f"{lo:.2g}" for lo in lowers], rotation=60, fontsize=6)
        ax.set_title(f"{key[0]} {key[1]}D delta={key[2]:g} {key[3]}", fontsize=8)
        ax.legend(fontsize=6)
    for ax in flat[len(keys):]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, metadata=SVG_METADATA)
    plt.close(fig)


def _ecdf_rows(out: Path, rows: list[dict]) -> list[dict]:
    out_rows = []
    for r in sorted(rows, key=lambda r: r["cell_id"]):
        data = _load_cell_json(out, r["cell_id"])
        for entry in data["ecdf"]:
            out_rows.append({"cell_id": r["cell_id"], "kind": r["kind"],
                             "dim": r["dim"], "delta": r["delta"],
                             "algorithm": r["algorithm"], **entry})
    return out_rows


def _fig_ecdf(ecdf: list[dict], path: Path) -> None:
    keys = sorted({(r["kind"], r["dim"], r["delta"], r["algorithm"]) for r in ecdf})
    n = max(len(keys), 1)
    fig, axes = plt.subplots((n + 2) // 3, 3, figsize=(12, 2.8 * ((n + 2) // 3)),
                             squeeze=False)
    flat = axes.ravel()
    for ax, key in zip(flat, keys):
        sel = [r for r in ecdf if (r["kind"], r["dim"], r["delta"], r["algorithm"]) == key]
        searches = sorted(int(r["searches"]) for r in sel if r["searches"] not in (None, ""))
        total = len(sel)
        if searches and total:
            ys = [(i + 1) / total for i in range(len(searches))]
            ax.step(searches, ys, where="post")
        ax.set_ylim(0, 1.05)
        ax.set_xlabel("line searches")
        ax.set_ylabel("targets reached")
        ax.set_title(f"{key[0]} {key[1]}D delta={key[2]:g} {key[3]}", fontsize=8)
    for ax in flat[len(keys):]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, metadata=SVG_METADATA)
    plt.close(fig)
