"""Command-line entry points: calibrate, sequential, sweep, coldstart, and the
full reproduction run."""
from __future__ import annotations

import argparse
import json
import sys

from .config import RunConfig
from .metrics import (CalibrationTargets, calibrate, compare_backends,
                      emit_reports, sweep_backends)
from .netmodel import PathKind
from .workload import measure_cold_start, run_sequential_with_sim


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    result = calibrate(cfg)
    out = result.to_dict()
    out["seed"] = cfg.seed
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0 if result.converged else 3


def cmd_sequential(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    rep = compare_backends(cfg)
    emit_reports(args.out, comparison=rep, cfg=cfg)
    if args.trace:
        _, sim = run_sequential_with_sim(cfg, PathKind.BYPASS)
        sim.engine.write_trace(args.trace)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    rep = sweep_backends(cfg)
    emit_reports(args.out, sweep=rep, cfg=cfg)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_coldstart(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    bypass_us = measure_cold_start(cfg, PathKind.BYPASS)
    kernel_us = measure_cold_start(cfg, PathKind.KERNEL_STACK)
    print(json.dumps({"bypass_init_us": bypass_us, "kernel_init_us": kernel_us},
                     indent=2, sort_keys=True))
    return 0


def cmd_reproduce(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    cal = calibrate(cfg)
    cfg = cfg.with_params(path_params=cal.path_params,
                          compute_params=cal.compute_params)
    comparison = compare_backends(cfg)
    sweep = sweep_backends(cfg)
    coldstart = {
        "bypass_init_us": measure_cold_start(cfg, PathKind.BYPASS),
        "kernel_init_us": measure_cold_start(cfg, PathKind.KERNEL_STACK),
    }
    extra = {"calibration": cal.to_dict(), "coldstart": coldstart}
    files = emit_reports(args.out, comparison=comparison, sweep=sweep,
                         summary_extra=extra, cfg=cfg)
    if args.trace:
        _, sim = run_sequential_with_sim(cfg, PathKind.BYPASS)
        sim.engine.write_trace(args.trace)
    print(json.dumps({"files": files, **comparison.to_dict(), **sweep.to_dict(),
                      **coldstart}, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="faasim",
                                     description="Deterministic FaaS backend simulator")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--trace", help="write event trace to this path")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("calibrate").set_defaults(fn=cmd_calibrate)
    sub.add_parser("sequential").set_defaults(fn=cmd_sequential)
    sub.add_parser("sweep").set_defaults(fn=cmd_sweep)
    sub.add_parser("coldstart").set_defaults(fn=cmd_coldstart)
    sub.add_parser("reproduce").set_defaults(fn=cmd_reproduce)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # machine-readable failure line, nonzero exit
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
