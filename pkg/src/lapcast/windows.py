"""Sliding training windows, the feature-column layout, and normalization.

Every model input step carries lag-1 values of the target and the two
timing series, the current lap's race-status covariates, and optional
context / shift feature blocks. The same column layout is used when
assembling decoder inputs during forecasting, so the constants here are
the single source of truth for feature order.

Lag columns beyond the encoder horizon are frozen at the last observed
lap (the timing series are never forecast), while the rank lag stays
teacher-forced in training and is replaced by sampled values at
inference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RaceFrame
from .errors import DataError

PREV_RANK = "prev_rank"
PREV_LAP_TIME = "prev_lap_time"
PREV_TIME_BEHIND = "prev_time_behind"
TRACK_STATUS = "track_status"
LAP_STATUS = "lap_status"
CAUTION_LAPS = "caution_laps"
PIT_AGE = "pit_age"
LEADER_PIT_COUNT = "leader_pit_count"
TOTAL_PIT_COUNT = "total_pit_count"
SHIFT_TRACK_STATUS = "shift_track_status"
SHIFT_LAP_STATUS = "shift_lap_status"
SHIFT_TOTAL_PIT_COUNT = "shift_total_pit_count"

BASE_COLUMNS = (PREV_RANK, PREV_LAP_TIME, PREV_TIME_BEHIND, TRACK_STATUS,
                LAP_STATUS, CAUTION_LAPS, PIT_AGE)
CONTEXT_COLUMNS = (LEADER_PIT_COUNT, TOTAL_PIT_COUNT)
SHIFT_COLUMNS = (SHIFT_TRACK_STATUS, SHIFT_LAP_STATUS, SHIFT_TOTAL_PIT_COUNT)

# covariates derived from race status, zeroed in the covariate-free ablation
RACE_STATUS_COLUMNS = (TRACK_STATUS, LAP_STATUS, CAUTION_LAPS, PIT_AGE,
                       LEADER_PIT_COUNT, TOTAL_PIT_COUNT, SHIFT_TRACK_STATUS,
                       SHIFT_LAP_STATUS, SHIFT_TOTAL_PIT_COUNT)

# column -> scaler key; binary flags stay raw
SCALER_KEY = {
    PREV_RANK: "rank",
    PREV_LAP_TIME: "lap_time",
    PREV_TIME_BEHIND: "time_behind_leader",
    CAUTION_LAPS: "caution_laps",
    PIT_AGE: "pit_age",
    LEADER_PIT_COUNT: "leader_pit_count",
    TOTAL_PIT_COUNT: "total_pit_count",
    SHIFT_TOTAL_PIT_COUNT: "total_pit_count",
}

TARGET_KEY = "rank"


def feature_layout(use_context=False, use_shift=False) -> tuple:
    cols = list(BASE_COLUMNS)
    if use_context:
        cols.extend(CONTEXT_COLUMNS)
    if use_shift:
        cols.extend(SHIFT_COLUMNS)
    return tuple(cols)


@dataclass
class TrainingWindow:
    race_id: str
    car_id: int
    start_lap: int      # 1-based first lap covered
    x_raw: np.ndarray   # (C+k, n_features), unnormalized
    z_raw: np.ndarray   # (C+k,), raw rank values
    weights: np.ndarray  # (k,), decoder-step loss weights


def window_matrix(frame: RaceFrame, car_row: int, start_lap: int, C: int,
                  k: int, layout) -> tuple[np.ndarray, np.ndarray]:
    """Raw (x, z) for laps [start_lap, start_lap + C + k)."""
    T = C + k
    s = start_lap - 1  # 0-based column of the first step
    laps = np.arange(s, s + T)
    x = np.empty((T, len(layout)))

    # lag indices: true lag everywhere, duplicated at lap 1; the timing
    # lags freeze at the last encoder lap for decoder steps past the first
    lag = np.maximum(laps - 1, 0)
    frozen_lag = np.minimum(lag, s + C - 1)

    for ci, name in enumerate(layout):
        if name == PREV_RANK:
            x[:, ci] = frame.rank[car_row, lag]
        elif name == PREV_LAP_TIME:
            x[:, ci] = frame.lap_time[car_row, frozen_lag]
        elif name == PREV_TIME_BEHIND:
            x[:, ci] = frame.time_behind[car_row, frozen_lag]
        elif name == TRACK_STATUS:
            x[:, ci] = frame.track_status[car_row, laps]
        elif name == LAP_STATUS:
            x[:, ci] = frame.lap_status[car_row, laps]
        elif name == CAUTION_LAPS:
            x[:, ci] = frame.caution_laps[car_row, laps]
        elif name == PIT_AGE:
            x[:, ci] = frame.pit_age[car_row, laps]
        elif name == LEADER_PIT_COUNT:
            x[:, ci] = frame.leader_pit_count[laps]
        elif name == TOTAL_PIT_COUNT:
            x[:, ci] = frame.total_pit_count[laps]
        elif name == SHIFT_TRACK_STATUS:
            x[:, ci] = frame.shift_track_status[car_row, laps]
        elif name == SHIFT_LAP_STATUS:
            x[:, ci] = frame.shift_lap_status[car_row, laps]
        elif name == SHIFT_TOTAL_PIT_COUNT:
            x[:, ci] = frame.shift_total_pit_count[laps]
        else:
            raise KeyError(name)
    z = frame.rank[car_row, laps].copy()
    return x, z


def build_windows(frames, C: int, k: int, stride: int = 1, loss_weight: float = 9.0,
                  use_context=False, use_shift=False) -> list[TrainingWindow]:
    """Sliding windows per car; races shorter than C+k yield none.

    Decoder steps whose target rank differs from the previous lap's rank
    get ``loss_weight``; others get 1.
    """
    layout = feature_layout(use_context, use_shift)
    T = C + k
    windows = []
    for race_id in sorted(frames):
        frame = frames[race_id]
        n_starts = max(0, (frame.n_laps - T) // stride + 1)
        for row, car_id in enumerate(frame.car_ids):
            for j in range(n_starts):
                start = 1 + j * stride
                x, z = window_matrix(frame, row, start, C, k, layout)
                dec = np.arange(start + C, start + C + k) - 1
                changed = frame.rank[row, dec] != frame.rank[row, dec - 1]
                weights = np.where(changed, float(loss_weight), 1.0)
                windows.append(TrainingWindow(race_id, int(car_id), start,
                                              x, z, weights))
    return windows


@dataclass
class Scaler:
    means: dict
    stds: dict

    def transform(self, key: str, values):
        return (values - self.means[key]) / self.stds[key]

    def invert(self, key: str, values):
        return values * self.stds[key] + self.means[key]

    def transform_features(self, x, layout):
        """Normalized copy of a raw feature matrix (last axis = columns)."""
        out = np.array(x, dtype=np.float64, copy=True)
        for ci, name in enumerate(layout):
            key = SCALER_KEY.get(name)
            if key is not None:
                out[..., ci] = (out[..., ci] - self.means[key]) / self.stds[key]
        return out


def fit_scaler(windows, layout) -> Scaler:
    """Two-pass mean/std per scaler key over the training windows;
    zero-variance features get std 1 so the transform stays invertible."""
    if not windows:
        raise DataError("fit_scaler: empty training split")
    pools: dict = {TARGET_KEY: [w.z_raw for w in windows]}
    for ci, name in enumerate(layout):
        key = SCALER_KEY.get(name)
        if key is None:
            continue
        pools.setdefault(key, []).extend(w.x_raw[:, ci] for w in windows)
    means, stds = {}, {}
    for key, chunks in pools.items():
        values = np.concatenate(chunks)
        means[key] = float(np.mean(values))
        std = float(np.std(values))
        stds[key] = std if std > 0.0 else 1.0
    return Scaler(means, stds)


def prepare_dataset(windows, scaler: Scaler, layout, car_to_row: dict,
                    covariate_free=False) -> dict:
    """Stack windows into normalized batch-ready arrays."""
    if not windows:
        raise DataError("prepare_dataset: no windows")
    X = np.stack([w.x_raw for w in windows])
    Z = np.stack([w.z_raw for w in windows])
    W = np.stack([w.weights for w in windows])
    X = scaler.transform_features(X, layout)
    Z = scaler.transform(TARGET_KEY, Z)
    if covariate_free:
        for ci, name in enumerate(layout):
            if name in RACE_STATUS_COLUMNS:
                X[..., ci] = 0.0
    try:
        rows = np.array([car_to_row[w.car_id] for w in windows], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"car {exc.args[0]} not present in the training split")
    return {
        "X": X, "Z": Z, "W": W, "car_rows": rows,
        "meta": [(w.race_id, w.car_id, w.start_lap) for w in windows],
    }
