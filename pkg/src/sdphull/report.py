"""Tier comparison runner and report emission.

One instance is built into each relaxation tier, solved to global optimality
by branch and bound, and the per-tier results are collected into rows that
can be written as CSV, as a plot-ready data file, and as a rendered figure.
Runtimes in the comparison table are per-unit with the basic tier as the
base; absolute wall-clock times are kept separately so the table itself is
reproducible across machines.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .backends import get_backend
from .bnb import STATUS_OPTIMAL, Strategy, solve_mi
from .lift import error_metrics
from .model import MiqcqpProblem
from .solver import Settings
from .tiers import TIERS, build_tier

COMPARISON_FIELDS = ("tier", "status", "oov", "error_max", "error_rank",
                     "nodes", "runtime_pu")


def solve_tier(problem: MiqcqpProblem, tier: str, backend=None,
               strategy: Strategy | None = None,
               settings: Settings | None = None,
               eq_mode: str = "3a", hull_form: str = "compact",
               node_limit: int | None = None, workers: int = 1):
    """Build one tier and solve it; returns (TierBuild, MiResult)."""
    backend = backend or get_backend()
    build = build_tier(problem, tier, eq_mode=eq_mode, hull_form=hull_form)
    result = solve_mi(build.conic, build.entities, backend,
                      strategy=strategy, settings=settings,
                      node_limit=node_limit, workers=workers)
    return build, result


def tier_report(problem: MiqcqpProblem, build, result) -> dict:
    """Serializable summary of one tier solve (no timing fields)."""
    out = {
        "tier": build.tier,
        "status": result.status,
        "nodes": result.nodes,
        "bound": _num(result.bound),
        "objective": _num(result.objective),
        "gap": _num(result.gap()),
        "aux_count": build.hull.aux_count if build.hull else 0,
    }
    if result.best is not None:
        x, X = result.best.x, result.best.X
        rep = problem.evaluate_point(x)
        out["x"] = [float(v) for v in x]
        out["feasibility"] = {
            "max_violation": rep.max_violation(),
            "integer_max": float(rep.integer_distance.max(initial=0.0)),
        }
        out.update(error_metrics(x, X))
    return out


def compare_tiers(problem: MiqcqpProblem, backend=None,
                  strategy: Strategy | None = None,
                  settings: Settings | None = None,
                  eq_mode: str = "3a", hull_form: str = "compact",
                  node_limit: int | None = None, workers: int = 1):
    """Run every tier on one instance.

    Returns (rows, reports, times): comparison rows in tier order, the full
    per-tier reports, and absolute wall times keyed by tier.  A failing
    tier keeps its status in the row; the run still completes.
    """
    backend = backend or get_backend()
    rows, reports, times = [], {}, {}
    base_time = None
    for tier in TIERS:
        build, result = solve_tier(problem, tier, backend, strategy, settings,
                                   eq_mode, hull_form, node_limit, workers)
        rep = tier_report(problem, build, result)
        reports[tier] = rep
        times[tier] = result.wall_time
        if base_time is None:
            base_time = result.wall_time
        row = {"tier": tier, "status": result.status,
               "oov": rep["objective"],
               "error_max": rep.get("error_max", math.nan),
               "error_rank": rep.get("error_rank", -1),
               "nodes": result.nodes,
               "runtime_pu": result.wall_time / base_time if base_time else 1.0}
        rows.append(row)
    return rows, reports, times


def _num(v):
    """JSON-friendly number: non-finite values become None."""
    v = float(v)
    return v if math.isfinite(v) else None


def write_comparison_csv(rows: list[dict], path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COMPARISON_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in COMPARISON_FIELDS})


def write_plot_data(rows: list[dict], path):
    """Long-format data file for external plotting tools."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tier", "metric", "value"])
        for row in rows:
            for metric in ("oov", "error_max", "error_rank", "runtime_pu"):
                writer.writerow([row["tier"], metric, row[metric]])


def render_figure(rows: list[dict], path):
    """Bar panels of objective value and per-unit runtime across tiers."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tiers = [r["tier"] for r in rows]
    oov = [r["oov"] if r["oov"] is not None else math.nan for r in rows]
    rt = [r["runtime_pu"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.2))
    ax1.bar(tiers, oov, color="#4878d0")
    ax1.set_ylabel("objective value")
    ax1.set_title("relaxation tightness")
    ax2.bar(tiers, rt, color="#ee854a")
    ax2.set_ylabel("runtime (per unit, basic = 1)")
    ax2.set_title("runtime")
    for ax in (ax1, ax2):
        ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
