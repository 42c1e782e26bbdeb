"""Command-line entry point: ``sparsepat --experiment NAME [--config FILE] ...``."""

from __future__ import annotations

import argparse
import logging
import sys
import time

from .config import EXPERIMENTS, ConfigError, build_config, load_config
from .experiments import run_experiment
from .results import rows_to_csv, write_csv

log = logging.getLogger("sparsepat")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sparsepat",
        description="Monte Carlo experiments for pilot-aided transmission over sparse block-fading channels.",
    )
    p.add_argument("--experiment", choices=EXPERIMENTS, help="experiment to run (overrides the config file)")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--snr-db", help="comma separated SNR grid in dB")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV output path (stdout if omitted)")
    p.add_argument("--workers", type=int)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def cli_main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = dict(
        experiment=args.experiment,
        snr_db=args.snr_db,
        trials=args.trials,
        seed=args.seed,
        out=args.out,
        workers=args.workers,
    )
    try:
        cfg = load_config(args.config, **overrides) if args.config else build_config(**overrides)
        cfg.channel_spec()  # surface spec and pilot-pattern errors before any work
        t0 = time.perf_counter()
        rows = run_experiment(cfg)
    except ConfigError as exc:
        print(f"sparsepat: error: {exc}", file=sys.stderr)
        return 2
    log.info("%s: %d rows in %.1f s", cfg.experiment, len(rows), time.perf_counter() - t0)
    if cfg.out:
        write_csv(rows, cfg.out)
    else:
        sys.stdout.write(rows_to_csv(rows))
    return 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
