"""Synthetic race generator with known ground-truth dynamics.

Cumulative elapsed time drives everything: each car has a base pace,
per-lap Gaussian noise, a pit schedule drawn from a truncated Gaussian
stint-length distribution (hard resource cap at 50 laps), and caution
periods that slow the whole field. Rank per lap is the ascending order
of cumulative time with car-index tie-breaks, so pit stops cost rank
exactly the way the forecasting model is supposed to learn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LapRecord
from .errors import ConfigError


@dataclass
class SynthConfig:
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

    def validate(self, min_laps=1):
        if self.num_cars < 2:
            raise ConfigError(f"num_cars must be >= 2, got {self.num_cars}")
        if self.num_laps < min_laps:
            raise ConfigError(
                f"num_laps must be >= {min_laps}, got {self.num_laps}")
        if not (1 <= self.stint_min <= self.stint_max <= 50):
            raise ConfigError("stint bounds must satisfy 1 <= min <= max <= 50")
        if not (1 <= self.caution_min_laps <= self.caution_max_laps):
            raise ConfigError("caution duration bounds are invalid")


def draw_stint_length(cfg: SynthConfig, rng) -> int:
    """Truncated-Gaussian stint length via rejection, in whole laps."""
    for _ in range(1000):
        length = int(round(rng.normal(cfg.stint_mean, cfg.stint_sd)))
        if cfg.stint_min <= length <= cfg.stint_max:
            return length
    return int(np.clip(round(cfg.stint_mean), cfg.stint_min, cfg.stint_max))


def _caution_flags(cfg: SynthConfig, rng) -> np.ndarray:
    flags = np.zeros(cfg.num_laps + 1, dtype=bool)  # 1-based laps
    n_events = rng.poisson(cfg.caution_rate) if cfg.caution_rate > 0 else 0
    for _ in range(n_events):
        start = int(rng.integers(2, cfg.num_laps + 1))
        length = int(rng.integers(cfg.caution_min_laps, cfg.caution_max_laps + 1))
        flags[start:min(start + length, cfg.num_laps + 1)] = True
    return flags


def generate_race(cfg: SynthConfig, rng, race_id: str) -> list[LapRecord]:
    cfg.validate()
    n = cfg.num_cars
    base = cfg.base_lap_time + cfg.base_spread * rng.random(n)
    stint_target = np.array([draw_stint_length(cfg, rng) for _ in range(n)])
    caution = _caution_flags(cfg, rng)

    cumulative = np.zeros(n)
    laps_since_pit = np.zeros(n, dtype=np.int64)
    records = []
    for lap in range(1, cfg.num_laps + 1):
        caution_started = caution[lap] and not caution[lap - 1]
        laps_since_pit += 1
        pitting = laps_since_pit >= stint_target
        if caution_started and cfg.caution_pit_prob > 0:
            pitting |= rng.random(n) < cfg.caution_pit_prob
        noise = rng.standard_normal(n) * cfg.lap_noise if cfg.lap_noise > 0 \
            else np.zeros(n)
        lap_time = base + noise
        if caution[lap]:
            lap_time = lap_time * cfg.caution_slowdown
        lap_time = lap_time + np.where(pitting, cfg.pit_penalty, 0.0)
        cumulative += lap_time

        for car in np.flatnonzero(pitting):
            laps_since_pit[car] = 0
            stint_target[car] = draw_stint_length(cfg, rng)

        order = np.argsort(cumulative, kind="stable")
        rank = np.empty(n, dtype=np.int64)
        rank[order] = np.arange(1, n + 1)
        behind = cumulative - cumulative.min()
        for car in range(n):
            records.append(LapRecord(
                race_id=race_id, car_id=car, lap=lap, rank=int(rank[car]),
                lap_time=float(lap_time[car]),
                time_behind_leader=float(behind[car]),
                track_status=int(caution[lap]),
                lap_status=int(pitting[car])))
    return records


def synth_generate(cfg: SynthConfig, seed: int) -> list[LapRecord]:
    """Generate cfg.num_races races; same seed gives identical records."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    records = []
    for idx in range(cfg.num_races):
        records.extend(generate_race(cfg, rng, f"synth-{idx:03d}"))
    return records
