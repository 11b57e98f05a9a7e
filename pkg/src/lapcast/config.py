"""Run configuration: defaults, config-file parsing, CLI merging.

The config file is plain text, one ``key = value`` per line, keys named
exactly like the RunConfig fields; ``#`` starts a comment. CLI flags
override file values, which override defaults. The effective config is
echoed into output artifacts together with a short hash.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .errors import ConfigError
from .synth import SynthConfig

MODES = ("mlp", "oracle", "covariate-free", "currank")


@dataclass
class RunConfig:
    # reproducibility
    seed: int = 42
    # model
    context_length: int = 60
    prediction_length: int = 2
    lstm_layers: int = 2
    hidden_size: int = 40
    embedding_dim: int = 4
    batch_size: int = 32
    loss_weight: float = 9.0
    learning_rate: float = 1e-3
    lr_decay_factor: float = 0.5
    lr_patience: int = 10
    lr_floor: float = 1e-6
    epochs: int = 30
    pit_epochs: int = 400
    num_samples: int = 100
    use_context_features: bool = False
    use_shift_features: bool = False
    mode: str = "mlp"
    # dataset split (by race, in sorted race-id order)
    validation_races: int = 2
    test_races: int = 4
    stride: int = 1
    # synthetic generator
    num_races: int = 20
    num_cars: int = 16
    num_laps: int = 100
    base_lap_time: float = 40.0
    base_spread: float = 2.0
    lap_noise: float = 0.2
    pit_penalty: float = 30.0
    caution_slowdown: float = 1.5
    caution_rate: float = 2.0
    caution_min_laps: int = 3
    caution_max_laps: int = 8
    caution_pit_prob: float = 0.5
    stint_mean: float = 35.0
    stint_sd: float = 5.0
    stint_min: int = 24
    stint_max: int = 50
    # benchmarks
    bench_batch_sizes: str = "32,64,128,256,640,1600,3200"
    bench_steps: int = 5
    bench_warmup: int = 3
    # evaluation
    rho_list: str = "0.5,0.9"
    # io
    data_path: str = ""
    checkpoint_path: str = ""
    out_path: str = ""
    profile: bool = False

    def validate(self) -> "RunConfig":
        if self.prediction_length < 1 or self.context_length < self.prediction_length:
            raise ConfigError("need context_length >= prediction_length >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.loss_weight < 1.0:
            raise ConfigError("loss_weight must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.num_samples < 1:
            raise ConfigError("num_samples must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def synth_config(self) -> SynthConfig:
        return SynthConfig(
            num_races=self.num_races, num_cars=self.num_cars,
            num_laps=self.num_laps, base_lap_time=self.base_lap_time,
            base_spread=self.base_spread, lap_noise=self.lap_noise,
            pit_penalty=self.pit_penalty,
            caution_slowdown=self.caution_slowdown,
            caution_rate=self.caution_rate,
            caution_min_laps=self.caution_min_laps,
            caution_max_laps=self.caution_max_laps,
            caution_pit_prob=self.caution_pit_prob,
            stint_mean=self.stint_mean, stint_sd=self.stint_sd,
            stint_min=self.stint_min, stint_max=self.stint_max)

    def batch_size_sweep(self) -> list[int]:
        try:
            sizes = [int(tok) for tok in self.bench_batch_sizes.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(
                f"bench_batch_sizes must be comma-separated integers, "
                f"got {self.bench_batch_sizes!r}") from None
        if not sizes or any(s < 1 for s in sizes):
            raise ConfigError("bench_batch_sizes must be positive integers")
        return sizes

    def rhos(self) -> list[float]:
        try:
            rhos = [float(tok) for tok in self.rho_list.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError(f"rho_list must be comma-separated floats, "
                              f"got {self.rho_list!r}") from None
        if any(not 0.0 < r < 1.0 for r in rhos):
            raise ConfigError("every rho must lie in (0, 1)")
        return rhos


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, text: str):
    kind = _FIELD_TYPES[key]
    text = text.strip()
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind}, got {text!r}") from None
    return text


def load_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, value)
    return values


def make_config(file_path=None, overrides=None) -> RunConfig:
    """defaults < config file < explicit overrides."""
    values = {}
    if file_path:
        values.update(load_config_file(file_path))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config field {key!r}")
        values[key] = _coerce(key, str(val)) if isinstance(val, str) else val
    return RunConfig(**values).validate()


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
