"""Experiment harness: configuration, Monte Carlo runners, CSV output and CLI."""

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, build_config, load_config
from .experiments import RUNNERS, run_experiment
from .results import CSV_HEADER, ResultRow, read_csv, rows_to_csv, write_csv

__all__ = [
    "CSV_HEADER",
    "EXPERIMENTS",
    "RUNNERS",
    "ConfigError",
    "ExperimentConfig",
    "ResultRow",
    "build_config",
    "load_config",
    "read_csv",
    "rows_to_csv",
    "run_experiment",
    "write_csv",
]
