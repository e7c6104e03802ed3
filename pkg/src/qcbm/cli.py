"""Command-line front end.

    qcbm run --config PATH [--jobs N] [--dry-run]
    qcbm reproduce {batch_size,moment_matching,fine_tune} [--seeds K]
    qcbm eval --checkpoint PATH --bas HxW
    qcbm dataset --bas HxW --out PATH

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import studies
from .bas import BasSpec, dump_dataset, sample_target
from .circuit import generate, load_params
from .config import OUTPUT_ROOT_ENV, load_config
from .metrics import FEATURE_DUMP_SAMPLES, dump_features, evaluate
from .statevector import ConfigurationError
from .trainer import grid_search, run_dir_name, train

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("qcbm")


def _write_features(result, run_dir):
    net = result.final_net
    if net is None:
        return
    rng = np.random.default_rng(result.seed)
    gen = generate(result.circuit_spec, result.final_params, FEATURE_DUMP_SAMPLES, rng)
    real = sample_target(result.bas_spec, FEATURE_DUMP_SAMPLES, rng)
    dump_features(net, gen, real, Path(run_dir) / "features.csv")


def _write_grid_summary(cells, out_dir):
    with open(out_dir / "grid_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lr_g", "lr_d", "n_seeds", "mean_final_tv", "sd_final_tv"])
        for c in cells:
            writer.writerow([c["lr_g"], c["lr_d"], len(c["runs"]), np.mean(c["final_tv"]), np.std(c["final_tv"])])
    with open(out_dir / "grid_traces.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lr_g", "lr_d", "iteration", "mean_tv", "sd_tv"])
        for c in cells:
            for it, m, s in zip(c["iteration"], c["mean"], c["sd"]):
                writer.writerow([c["lr_g"], c["lr_d"], it, m, s])


def cmd_run(args):
    cfg = load_config(args.config)
    if args.dry_run:
        print(json.dumps({"config": str(args.config), "valid": True, "grid": cfg.is_grid,
                          "scheme": asdict(cfg.scheme), "bas": str(cfg.bas), "depth": cfg.depth}))
        return EXIT_OK
    out_dir = cfg.output_path()
    if not cfg.is_grid:
        result = train(cfg.scheme, cfg.circuit, cfg.bas)
        result.save(out_dir)
        _write_features(result, out_dir)
        print(json.dumps({"output_dir": str(out_dir), "final_tv": result.final_report.tv}))
        return EXIT_OK
    lr_g = cfg.lr_g_list or (cfg.scheme.lr_g,)
    lr_d = cfg.lr_d_list or (cfg.scheme.lr_d,)
    cells = grid_search(cfg.scheme, cfg.circuit, cfg.bas, lr_g, lr_d, cfg.n_seeds or 1, args.jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    for cell in cells:
        for run in cell["runs"]:
            run.save(out_dir / run_dir_name(run.config))
    _write_grid_summary(cells, out_dir)
    best = min(cells, key=lambda c: np.mean(c["final_tv"]))
    print(json.dumps({"output_dir": str(out_dir), "cells": len(cells),
                      "best": {"lr_g": best["lr_g"], "lr_d": best["lr_d"],
                               "mean_final_tv": float(np.mean(best["final_tv"]))}}))
    return EXIT_OK


def cmd_reproduce(args):
    root = Path(args.output_dir or os.environ.get(OUTPUT_ROOT_ENV) or "runs")
    out_dir = root / "reproduce" / args.study
    summary = studies.run_study(args.study, out_dir, args.seeds, args.iterations, args.jobs)
    print(json.dumps({"study": args.study, "output_dir": str(out_dir), "summary": summary}, indent=1))
    return EXIT_OK


def cmd_eval(args):
    bas = BasSpec.parse(args.bas)
    spec, params = load_params(args.checkpoint)
    print(evaluate(spec, params, bas).to_json())
    return EXIT_OK


def cmd_dataset(args):
    path, sidecar = dump_dataset(BasSpec.parse(args.bas), args.out)
    print(json.dumps({"patterns": str(path), "sidecar": str(sidecar)}))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="qcbm", description="Quantum circuit Born machine lab")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train one config, or a grid when lr lists / n_seeds are set")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dry-run", action="store_true", help="validate the config and exit")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reproduce", help="run a canned study")
    p.add_argument("study", choices=studies.STUDIES)
    p.add_argument("--seeds", type=int, default=None, help="root seeds per configuration")
    p.add_argument("--iterations", type=int, default=None, help="override the G-step budget")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output-dir", type=Path, default=None)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("eval", help="print the EvalReport of a parameter checkpoint")
    p.add_argument("--checkpoint", required=True, type=Path)
    p.add_argument("--bas", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("dataset", help="write every valid BAS pattern plus a JSON sidecar")
    p.add_argument("--bas", required=True)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_dataset)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "seeds", None) is not None and args.seeds < 1:
        print("error: --seeds must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 1
        log.debug("run failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
