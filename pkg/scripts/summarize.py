#!/usr/bin/env python3
"""Print a compact table of selected metrics from result CSVs."""

import argparse
import math
from collections import defaultdict
from pathlib import Path

from sparsepat.harness.results import read_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv", nargs="+", type=Path)
    ap.add_argument("--metric", action="append", help="substring filter on metric names (repeatable)")
    args = ap.parse_args()
    for path in args.csv:
        table = defaultdict(dict)
        for r in read_csv(path):
            if args.metric and not any(m in r.metric for m in args.metric):
                continue
            if r.metric.endswith(("_ci_low", "_ci_high")):
                continue
            table[r.metric]["-" if math.isnan(r.snr_db) else f"{r.snr_db:g}"] = (r.value, r.stderr)
        print(f"== {path.name}")
        for metric, cols in table.items():
            cells = "  ".join(f"{k:>4}: {v:.4g}" + (f"±{se:.1g}" if se else "") for k, (v, se) in cols.items())
            print(f"  {metric:34s} {cells}")


if __name__ == "__main__":
    main()
