#!/usr/bin/env python3
"""Run every config in configs/ (or the ones named) and write results/<name>.csv."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from sparsepat.harness.config import ConfigError, load_config
from sparsepat.harness.experiments import run_experiment
from sparsepat.harness.results import write_csv

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("configs", nargs="*", type=Path, help="config files (default: configs/*.cfg)")
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    ap.add_argument("--trials", type=int, help="override the trial count of every config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()

    paths = args.configs or sorted((ROOT / "configs").glob("*.cfg"))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for path in paths:
        try:
            cfg = load_config(path, trials=args.trials, seed=args.seed, workers=args.workers)
        except ConfigError as exc:
            print(f"{path.name}: {exc}", file=sys.stderr)
            return 2
        t0 = time.perf_counter()
        rows = run_experiment(cfg)
        out = args.out_dir / f"{path.stem}.csv"
        write_csv(rows, out)
        print(f"{cfg.experiment:20s} {len(rows):4d} rows  {time.perf_counter() - t0:6.1f} s  -> {out.relative_to(ROOT) if out.is_relative_to(ROOT) else out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
