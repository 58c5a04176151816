"""Command line entry point.

Exit codes: 0 ok, 1 invalid input, 2 guidance failure during a run.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, ExprError, GuidanceError
from .paths import REGISTRY
from .runner import (
    default_bbox,
    export_field_grid,
    run_scenario,
    write_grid,
    write_metrics,
    write_telemetry,
)
from .scenario import load_scenario

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 40x30, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gvfsim", description="Guiding vector field path-following simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write telemetry")
    run.add_argument("scenario")
    run.add_argument("--out", required=True, help="telemetry CSV path")
    run.add_argument("--metrics", help="metrics JSON path")
    run.add_argument("--seed", type=int, help="override the scenario seed")

    fld = sub.add_parser("field", help="export unit field vectors on a grid")
    fld.add_argument("scenario")
    fld.add_argument("--grid", type=_grid, required=True, metavar="AxB")
    fld.add_argument("--out", required=True)
    slice_ = fld.add_mutually_exclusive_group()
    slice_.add_argument("--w", type=float, help="virtual coordinate of the slice (pgvf)")
    slice_.add_argument("--z", type=float, help="altitude of the slice (3D pgvf)")

    sub.add_parser("list-trajectories", help="show the built-in trajectory registry")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("scenario")
    return p


def _run(args) -> int:
    cfg = load_scenario(args.scenario, seed=args.seed)
    records, metrics = run_scenario(cfg)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        write_telemetry(records, fh)
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            write_metrics(metrics, fh)
    for vid, m in metrics.vehicles.items():
        print(
            f"{vid}: steady-state {m.distance_metric} mean={m.steady_state_mean:.3f} "
            f"max={m.steady_state_max:.3f}"
        )
    return EXIT_OK


def _field(args) -> int:
    cfg = load_scenario(args.scenario)
    if cfg.mode == "gvf" and (args.w is not None or args.z is not None):
        raise ConfigError("--w/--z slices apply to pgvf scenarios only")
    try:
        bbox = default_bbox(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    columns, rows = export_field_grid(
        cfg.path, cfg.mode, cfg.vehicles[0].gains, bbox, args.grid, w=args.w, z=args.z
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        write_grid(columns, rows, fh)
    return EXIT_OK


def _list(args) -> int:
    for name in sorted(REGISTRY):
        entry = REGISTRY[name]
        print(f"{name:15s} {entry.kind:10s} ({', '.join(entry.arg_names)})")
    return EXIT_OK


def _validate(args) -> int:
    cfg = load_scenario(args.scenario)
    print(
        f"ok: {cfg.mode} on {cfg.trajectory_label}, {len(cfg.vehicles)} vehicle(s), "
        f"{cfg.n_steps} steps"
    )
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _run, "field": _field, "list-trajectories": _list, "validate": _validate}[
        args.command
    ]
    try:
        return handler(args)
    except (ConfigError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except GuidanceError as exc:
        print(f"guidance failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
