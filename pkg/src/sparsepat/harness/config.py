"""
Experiment configuration.

Config files are flat ``key = value`` text; ``#`` starts a comment. Lists
are comma separated. Keys mirror the fields of :class:`ExperimentConfig`::

    experiment = mse-sweep
    n_block = 7
    l_taps = 4
    s_sparsity = 2
    n_pilots = 2
    snr_db = 0, 10, 20, 30, 40, 50, 60
    trials = 10000
    seed = 1
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from ..model import ChannelSpec, db_to_linear, make_spec

EXPERIMENTS = (
    "mse-sweep",
    "pase-error",
    "pase-fixed-support",
    "wmd-genie",
    "dasd-e2e",
    "ml-vs-oracle",
    "rate-prelog",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n_block: int = 7
    l_taps: int = 4
    s_sparsity: int = 2
    n_pilots: int | None = None
    pilot_indices: tuple[int, ...] | None = None
    support_prior: tuple[float, ...] | None = None
    k_blocks: int = 1
    snr_db: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0)
    trials: int = 1000
    seed: int = 0
    out: str | None = None
    workers: int = 1
    # experiment-specific knobs
    true_support_index: int = 0
    slope_window_db: tuple[float, ...] = (30.0, 50.0)
    k_grid: tuple[int, ...] = (1, 4, 16)
    info_bits: int = 2
    crc_bits: int = 0
    noise_free: bool = False
    perfect_csi: bool = False
    order_by_pase: bool = False
    quad_points: int = 201
    quad_span: float = 6.0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}"
            )
        if not self.snr_db:
            raise ConfigError("SNR grid must be nonempty")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ConfigError("SNR grid must be strictly ascending")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if len(self.slope_window_db) != 2 or self.slope_window_db[0] >= self.slope_window_db[1]:
            raise ConfigError("slope_window_db needs two ascending values")
        if not self.k_grid or min(self.k_grid) < 1:
            raise ConfigError("k_grid entries must be positive")

    def channel_spec(self, snr_db: float | None = None, k_blocks: int | None = None) -> ChannelSpec:
        """Build (and validate) the channel spec at one SNR point."""
        try:
            return make_spec(
                self.n_block,
                self.l_taps,
                self.s_sparsity,
                self.n_pilots,
                snr_db=self.snr_db[0] if snr_db is None else snr_db,
                pilot_indices=self.pilot_indices,
                support_prior=self.support_prior,
                k_blocks=self.k_blocks if k_blocks is None else k_blocks,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def snr_linear(self) -> list[float]:
        return [db_to_linear(d) for d in self.snr_db]


def _field_types() -> dict[str, str]:
    return {f.name: str(f.type) for f in fields(ExperimentConfig)}


def _coerce(key: str, raw: Any, type_name: str) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if "None" in type_name and text.lower() in ("", "none"):
        return None
    items = [t.strip() for t in text.split(",") if t.strip()]
    try:
        if type_name.startswith("tuple[int"):
            return tuple(int(t) for t in items)
        if type_name.startswith("tuple[float"):
            return tuple(float(t) for t in items)
        if type_name.startswith("int"):
            return int(text)
        if type_name.startswith("float"):
            return float(text)
        if type_name.startswith("bool"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {type_name}") from None
    return text


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _field_types():
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_config(file_values: dict[str, Any] | None = None, **overrides: Any) -> ExperimentConfig:
    """Merge file values with overrides (``None`` overrides are ignored)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    if "experiment" not in merged:
        raise ConfigError("no experiment given")
    types = _field_types()
    kwargs = {k: _coerce(k, v, types[k]) for k, v in merged.items()}
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, **overrides: Any) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config_text(text), **overrides)


def with_updates(cfg: ExperimentConfig, **changes: Any) -> ExperimentConfig:
    return dataclasses.replace(cfg, **changes)


__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "build_config",
    "load_config",
    "parse_config_text",
    "with_updates",
]
