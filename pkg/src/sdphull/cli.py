"""Command-line front end.

Subcommands
-----------
solve    build one relaxation tier of an instance, run branch and bound,
         and write report.json, nodes.csv, and metadata.json.
compare  run all three tiers on one instance and write comparison.csv, a
         plot-ready data file, a rendered PNG figure, and metadata.json.
count    print the full and compact auxiliary-variable counts for given
         problem dimensions.

Instances come from ``--demo feeder13``, ``--demo illustrative``, or
``--input path`` (an instance JSON file; feeder system files are detected
by their node/branch schema).  A JSON config file can mirror any flag;
explicit flags override the file.  The default output directory is taken
from the SDPHULL_OUT environment variable when set.

Exit codes: 0 solved to optimality, 2 configuration error, 3 infeasible,
4 node or iteration limit, 5 numerical failure.  Error paths write no
output files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .backends import get_backend
from .bnb import (BEST_BOUND, DEPTH_FIRST, LAMBDA_CLOSENESS, LOWEST_INDEX,
                  MOST_FRACTIONAL, STATUS_INFEASIBLE, STATUS_NODE_LIMIT,
                  STATUS_OPTIMAL, Strategy, write_node_log)
from .demos import ILLUSTRATIVE_OBJECTIVES, illustrative_problem
from .feeder import analyze_solution, build_placement, demo_feeder_13, load_feeder
from .hull import COMPACT, FULL, count_aux
from .model import MiqcqpProblem, ModelError
from .report import (compare_tiers, render_figure, solve_tier, tier_report,
                     write_comparison_csv, write_plot_data)
from .solver import Settings
from .tiers import TIERS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4
EXIT_NUMERICAL = 5

_STATUS_EXIT = {STATUS_OPTIMAL: EXIT_OK, STATUS_INFEASIBLE: EXIT_INFEASIBLE,
                STATUS_NODE_LIMIT: EXIT_LIMIT}


class ConfigError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="sdphull",
                                  description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    def instance_flags(p):
        p.add_argument("--demo", choices=["feeder13", "illustrative"],
                       help="built-in demo instance")
        p.add_argument("--objective", choices=list(ILLUSTRATIVE_OBJECTIVES),
                       default="x",
                       help="objective of the illustrative demo")
        p.add_argument("--input", help="instance or feeder JSON file")
        p.add_argument("--config", help="JSON config file mirroring flags")
        p.add_argument("--eq-mode", choices=["3a", "3b", "3c"], default="3a")
        p.add_argument("--hull", choices=[FULL, COMPACT], default=COMPACT)
        p.add_argument("--strategy", default=f"{DEPTH_FIRST}:{MOST_FRACTIONAL}",
                       help="node order, optionally ':rule' "
                            f"({DEPTH_FIRST}|{BEST_BOUND}"
                            f"[:{MOST_FRACTIONAL}|{LOWEST_INDEX}|{LAMBDA_CLOSENESS}])")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--eps", type=float, default=1e-6,
                       help="solver feasibility/gap tolerance")
        p.add_argument("--node-limit", type=int, default=None)
        p.add_argument("--backend", default="clarabel",
                       choices=["clarabel", "builtin"])
        p.add_argument("--out", default=None, help="output directory "
                       "(default: $SDPHULL_OUT or the working directory)")

    ps = sub.add_parser("solve", help="solve one tier to global optimality")
    instance_flags(ps)
    ps.add_argument("--tier", choices=list(TIERS), default="ch-miesdp")

    pc = sub.add_parser("compare", help="run all tiers and tabulate")
    instance_flags(pc)

    pn = sub.add_parser("count", help="auxiliary-variable counts")
    pn.add_argument("--n", type=int, required=True)
    pn.add_argument("--m", type=int, required=True)
    pn.add_argument("--k", type=int, required=True)
    return top


def _apply_config_file(args: argparse.Namespace, argv: list[str]):
    """Fill unset flags from the JSON config file; explicit flags win."""
    if not args.config:
        return
    try:
        with open(args.config) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config file: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    given = {a.split("=")[0].lstrip("-").replace("-", "_")
             for a in argv if a.startswith("--")}
    for key, val in data.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ConfigError(f"config file: unknown option {key!r}")
        if dest not in given:
            setattr(args, dest, val)


def _load_instance(args):
    """Returns (problem, feeder_instance_or_None, label)."""
    if bool(args.demo) == bool(args.input):
        raise ConfigError("give exactly one of --demo and --input")
    if args.demo == "feeder13":
        feeder, pvs, costs = demo_feeder_13()
        inst = build_placement(feeder, pvs, costs)
        return inst.problem, inst, "feeder13"
    if args.demo == "illustrative":
        return illustrative_problem(args.objective), None, "illustrative"
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    try:
        with open(path) as fh:
            head = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"input file: {exc}") from exc
    try:
        if isinstance(head, dict) and "branches" in head:
            feeder, pvs, costs = load_feeder(path)
            inst = build_placement(feeder, pvs, costs)
            return inst.problem, inst, path.stem
        return MiqcqpProblem.from_dict(head), None, path.stem
    except (ModelError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"input file: {exc}") from exc


def _strategy(args) -> Strategy:
    text = str(args.strategy)
    order, _, rule = text.partition(":")
    try:
        return Strategy(node_order=order, branch_var=rule or MOST_FRACTIONAL)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _settings(args) -> Settings:
    eps = float(args.eps)
    if eps <= 0:
        raise ConfigError("--eps must be positive")
    return Settings(eps_feas=eps, eps_gap=eps)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("SDPHULL_OUT") or "."
    return Path(out)


def _config_echo(args, skip=("command", "config", "out")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_outputs(out_dir: Path, files: dict):
    """Write every output, or none: files are rendered into a scratch
    directory first and only moved into place once all writers succeed."""
    import shutil
    import tempfile

    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        for name, writer in files.items():
            writer(Path(tmp) / name)
        for name in files:
            shutil.move(str(Path(tmp) / name), str(out_dir / name))


def _dump_json(payload):
    def write(path):
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return write


def cmd_solve(args) -> int:
    problem, inst, label = _load_instance(args)
    strategy, settings = _strategy(args), _settings(args)
    backend = get_backend(args.backend)
    t0 = time.time()
    build, result = solve_tier(problem, args.tier, backend, strategy, settings,
                               eq_mode=args.eq_mode, hull_form=args.hull,
                               node_limit=args.node_limit,
                               workers=args.workers)
    report = {"instance": label, "config": _config_echo(args),
              "result": tier_report(problem, build, result)}
    if inst is not None and result.best is not None:
        report["placement"] = analyze_solution(inst, result.best.x,
                                               result.best.X,
                                               result.objective)
    meta = {"started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t0)),
            "wall_time_s": result.wall_time, "version": __version__,
            "backend": backend.name}
    _write_outputs(_out_dir(args), {
        "report.json": _dump_json(report),
        "metadata.json": _dump_json(meta),
        "nodes.csv": lambda p: write_node_log(result.log, p),
    })
    print(f"{label} {args.tier}: {result.status} "
          f"objective={result.objective:.6g} nodes={result.nodes}")
    return _STATUS_EXIT.get(result.status, EXIT_NUMERICAL)


def cmd_compare(args) -> int:
    problem, inst, label = _load_instance(args)
    strategy, settings = _strategy(args), _settings(args)
    backend = get_backend(args.backend)
    t0 = time.time()
    rows, reports, times = compare_tiers(problem, backend, strategy, settings,
                                         eq_mode=args.eq_mode,
                                         hull_form=args.hull,
                                         node_limit=args.node_limit,
                                         workers=args.workers)
    if inst is not None:
        for tier, rep in reports.items():
            if "x" in rep:
                import numpy as np
                rep["placement"] = analyze_solution(
                    inst, np.asarray(rep["x"]), None, rep["objective"])
    report = {"instance": label, "config": _config_echo(args),
              "tiers": reports}
    meta = {"started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t0)),
            "wall_time_s": times, "version": __version__,
            "backend": backend.name}
    _write_outputs(_out_dir(args), {
        "comparison.csv": lambda p: write_comparison_csv(rows, p),
        "comparison_plot.csv": lambda p: write_plot_data(rows, p),
        "comparison.png": lambda p: render_figure(rows, p),
        "report.json": _dump_json(report),
        "metadata.json": _dump_json(meta),
    })
    for row in rows:
        print(f"{row['tier']:>10s}  {row['status']:<10s} "
              f"oov={row['oov'] if row['oov'] is not None else 'n/a'} "
              f"runtime_pu={row['runtime_pu']:.3f}")
    worst = max(_STATUS_EXIT.get(r["status"], EXIT_NUMERICAL) for r in rows)
    return worst


def cmd_count(args) -> int:
    if min(args.n, args.m, args.k) < 0 or args.m > args.n:
        raise ConfigError("need 0 <= m <= n and k >= 0")
    counts = count_aux(args.n, args.m, args.k)
    print(f"full: {counts['full']}")
    print(f"compact: {counts['compact']}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = _parser().parse_args(argv)
    try:
        if args.command == "count":
            return cmd_count(args)
        _apply_config_file(args, argv)
        if args.command == "solve":
            return cmd_solve(args)
        return cmd_compare(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
