"""The ``da`` command line: run experiments, tune, pre-generate truths, plot.

Exit codes: 0 success, 2 configuration error, 3 full divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..core import ConfigurationError
from .config import default_grid, load_config, load_grid
from .plotting import emit_plot
from .plotting_helpers import rows_from_csv_dicts
from .runner import TuningFailure, get_truth, run_experiment, tune
from .storage import emit_csv, read_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out or cfg.output_dir)
    records = run_experiment(cfg, workers=args.workers)
    csv_path = emit_csv(records, out_dir / "results.csv")
    svg_path = emit_plot(records, out_dir / "results.svg",
                         title=f"{cfg.system} / {cfg.filter_name}")
    print(f"wrote {csv_path} and {svg_path}")
    if all(r.diverged for r in records):
        print("every run diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_tune(args) -> int:
    cfg = load_config(args.config)
    grid = load_grid(args.grid) if args.grid else default_grid(cfg.filter_name)
    out_dir = Path(args.out or cfg.output_dir)
    try:
        best, records = tune(cfg, grid, workers=args.workers)
    except TuningFailure as e:
        print(f"tuning failed: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    csv_path = emit_csv(records, out_dir / "tuning.csv")
    best_path = out_dir / "best_params.json"
    best_path.write_text(
        json.dumps({str(t): p for t, p in sorted(best.items())}, indent=2, sort_keys=True)
        + "\n", encoding="utf-8")
    print(f"wrote {csv_path} and {best_path}")
    for t in sorted(best):
        print(f"T={t}: {best[t]}")
    return EXIT_OK


def _cmd_truth(args) -> int:
    cfg = load_config(args.config)
    seeds = list(cfg.seeds) + [cfg.tune_seed]
    for seed in seeds:
        bundle = get_truth(cfg, seed)
        print(f"seed {seed}: {bundle.n_da_steps} DA steps, dim {bundle.states.shape[1]}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    rows = rows_from_csv_dicts(read_csv(args.infile))
    emit_plot(rows, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="da", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured experiment sweep")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    run.add_argument("--workers", type=int, default=1)
    run.set_defaults(fn=_cmd_run)

    tn = sub.add_parser("tune", help="grid-search hyperparameters on the tuning trajectory")
    tn.add_argument("--config", required=True)
    tn.add_argument("--grid", default=None, help="JSON grid file (default: built-in grid)")
    tn.add_argument("--out", default=None)
    tn.add_argument("--workers", type=int, default=1)
    tn.set_defaults(fn=_cmd_tune)

    tr = sub.add_parser("truth", help="pre-generate and cache truth trajectories")
    tr.add_argument("--config", required=True)
    tr.set_defaults(fn=_cmd_truth)

    pl = sub.add_parser("plot", help="render an RMSE-vs-T SVG from a results CSV")
    pl.add_argument("--in", dest="infile", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(fn=_cmd_plot)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
