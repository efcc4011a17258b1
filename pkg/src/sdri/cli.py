"""Command-line entry points: run, validate, probe, sweep."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import errors as err
from .config import build_problem, build_schedule, parse_config
from .energy import CSV_COLUMNS
from .geometry import crystal_to_dict, domain_to_dict
from .optimizer import minimize, sweep as run_sweep
from .probes import run_suite
from .svg import snapshot_svg

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_SOLVE = 4
EXIT_PROBE = 5

_CONFIG_ERRORS = (err.ParseError, err.ValidationError, err.HypothesisViolated,
                  err.UnknownPreset)
_GEOMETRY_ERRORS = (err.DegenerateGeometry, err.OverlappingInteriors,
                    err.InvariantViolation, err.UnclassifiableArc,
                    err.NoTriplePoint)
_SOLVE_ERRORS = (err.MeshFailure, err.SingularSystem, err.NonConvergence)


def _classify_exit(exc) -> int:
    if isinstance(exc, _CONFIG_ERRORS):
        return EXIT_CONFIG
    if isinstance(exc, _SOLVE_ERRORS):
        return EXIT_SOLVE
    if isinstance(exc, _GEOMETRY_ERRORS):
        return EXIT_GEOMETRY
    raise exc


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(x) if isinstance(x, float) else str(x)
                              for x in row) + "\n")


def cmd_run(args) -> int:
    config = parse_config(args.config)
    problem = build_problem(config)
    outdir = args.output or config.output_dir
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "config_echo.json"), "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)

    schedule = build_schedule(config) if config.schedule else problem.schedule
    state = minimize(problem, schedule, config.seed)

    rows = [[i] + bd.as_row() for i, bd in enumerate(state.evals)]
    _write_csv(os.path.join(outdir, "breakdown.csv"), ("eval",) + CSV_COLUMNS, rows)
    if config.emit.get("trace", True):
        _write_csv(os.path.join(outdir, "trace.csv"),
                   ("iter", "accepted", "move_kind", "F", "F_lambda", "area",
                    "components", "elapsed_ms"), state.trace)
    with open(os.path.join(outdir, "final_geometry.json"), "w") as fh:
        json.dump({"domain": domain_to_dict(problem.domain),
                   "crystal": crystal_to_dict(state.best)}, fh, indent=2)
    if config.emit.get("svg", True):
        snapshot_svg(os.path.join(outdir, "snapshot.svg"),
                     problem.domain, state.best)
    if config.emit.get("mesh_dump", False) and problem.has_elasticity:
        from .meshing import triangulate
        mesh = triangulate(state.best, problem.domain, problem.h)
        with open(os.path.join(outdir, "mesh.json"), "w") as fh:
            json.dump(mesh.to_dict(), fh)
    best = state.best_breakdown
    print(f"best F_lambda = {best.total:.9g}  (surface {best.surface_total:.9g}, "
          f"elastic {best.elastic:.9g}, penalty {best.penalty:.9g})")
    print(f"area = {state.best.area:.9g}  components = "
          f"{state.best.component_count(problem.domain.snap_tol)}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = parse_config(args.config)
    build_problem(config)  # constructing runs geometry and hypothesis gates
    print("config ok: geometry valid, hypotheses satisfied")
    return EXIT_OK


def cmd_probe(args) -> int:
    reports = run_suite(args.suite, name_filter=args.filter, seed=args.seed,
                        threads=args.threads)
    outdir = args.output
    if outdir:
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "probe_report.json"), "w") as fh:
            json.dump([r.to_dict() for r in reports], fh, indent=2)
    width = max((len(r.name) for r in reports), default=10)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}")
    failed = [r for r in reports if not r.passed]
    if failed:
        print(f"{len(failed)} of {len(reports)} probes failed")
        return EXIT_PROBE
    print(f"all {len(reports)} probes passed")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = parse_config(args.config)
    problem = build_problem(config)
    try:
        name, values = args.param.split("=", 1)
        vals = [float(x) for x in values.split(",") if x]
    except ValueError:
        raise err.ValidationError(["--param must look like lambda=0.1,1,10 or m=1,2,4"])
    if name == "m":
        vals = [int(x) for x in vals]
    rows = run_sweep(problem, name, vals, seed=config.seed)
    outdir = args.output or config.output_dir
    os.makedirs(outdir, exist_ok=True)
    _write_csv(os.path.join(outdir, "sweep.csv"),
               ("param", "best_F", "best_F_lambda", "area", "components"),
               [[r["param"], r["best_F"], r["best_F_lambda"], r["area"],
                 r["components"]] for r in rows])
    for r in rows:
        print(f"{name}={r['param']}: F={r['best_F']:.6g} "
              f"F_lambda={r['best_F_lambda']:.6g} area={r['area']:.6g} "
              f"components={r['components']}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sdri",
        description="Sharp-interface surface/elastic energy minimizer "
                    "over polygonal crystals")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="minimize the configured problem")
    p_run.add_argument("config")
    p_run.add_argument("--output", default=None)
    p_run.set_defaults(fn=cmd_run)

    p_val = sub.add_parser("validate", help="parse config and check hypotheses")
    p_val.add_argument("config")
    p_val.set_defaults(fn=cmd_validate)

    p_probe = sub.add_parser("probe", help="run an oracle probe suite")
    p_probe.add_argument("suite", choices=("standard", "quick"))
    p_probe.add_argument("--filter", default=None)
    p_probe.add_argument("--seed", type=int, default=0)
    p_probe.add_argument("--threads", type=int, default=None)
    p_probe.add_argument("--output", default=None)
    p_probe.set_defaults(fn=cmd_probe)

    p_sweep = sub.add_parser("sweep", help="run minimize over a parameter list")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True,
                         help="lambda=v1,v2,... or m=v1,v2,...")
    p_sweep.add_argument("--output", default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except err.SdriError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _classify_exit(exc)


if __name__ == "__main__":
    sys.exit(main())
