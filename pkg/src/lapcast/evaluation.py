"""Evaluation pipeline: points, lap slices, stint task, pit recall.

Forecast origins step by the prediction length, so every lap past the
context window is scored exactly once, at the horizon of the forecast
window that covers it. A scored lap is PitStopCovered when any car's pit
lap lies within one lap of it; NormalLaps is the complement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import metrics as M
from .data import RaceFrame
from .errors import ContextError, MetricError
from .forecasting import ForecastResult, currank_forecast, forecast
from .stints import LONG_NORMAL, segment_stints

SLICE_ALL = "AllLaps"
SLICE_NORMAL = "NormalLaps"
SLICE_PIT = "PitStopCovered"
SLICES = (SLICE_ALL, SLICE_NORMAL, SLICE_PIT)


@dataclass
class EvalPoint:
    race_id: str
    car_id: int
    lap: int
    horizon: int
    actual_rank: int
    point: float          # real-valued median forecast, rank units
    pred_rank: int        # aggregate derived rank
    samples: np.ndarray   # rank-unit sample set


def points_from_result(result: ForecastResult, frame: RaceFrame) -> list[EvalPoint]:
    points = []
    for li, lap in enumerate(result.laps):
        if lap > frame.n_laps:
            raise MetricError(
                f"race {frame.race_id}: no actual for forecast lap {lap}")
        for c, car_id in enumerate(result.car_ids):
            row = frame.car_row(int(car_id))
            points.append(EvalPoint(
                race_id=result.race_id, car_id=int(car_id), lap=int(lap),
                horizon=int(lap - result.origin),
                actual_rank=int(frame.rank[row, lap - 1]),
                point=float(result.q50[c, li]),
                pred_rank=int(result.agg_rank[c, li]),
                samples=result.samples[c, :, li]))
    return points


def points_from_entries(entries, frames) -> list[EvalPoint]:
    """Rebuild evaluation points from forecast-file rows."""
    points = []
    for e in entries:
        frame = frames[e["race_id"]]
        lap = int(e["lap"])
        if lap > frame.n_laps:
            raise MetricError(
                f"race {e['race_id']}: no actual for forecast lap {lap}")
        row = frame.car_row(int(e["car_id"]))
        points.append(EvalPoint(
            race_id=e["race_id"], car_id=int(e["car_id"]), lap=lap,
            horizon=lap - int(e["origin"]),
            actual_rank=int(frame.rank[row, lap - 1]),
            point=float(e["q50"]),
            pred_rank=int(e["rank"]),
            samples=np.asarray(e["samples"], dtype=np.float64)))
    return points


def slice_laps(points, frames) -> dict:
    """Partition into AllLaps / NormalLaps / PitStopCovered."""
    pit_laps = {rid: frames[rid].pit_laps() for rid in frames}
    out = {SLICE_ALL: list(points), SLICE_NORMAL: [], SLICE_PIT: []}
    for p in points:
        pits = pit_laps[p.race_id]
        covered = bool(pits.size and np.min(np.abs(pits - p.lap)) <= 1)
        out[SLICE_PIT if covered else SLICE_NORMAL].append(p)
    return out


def compute_slice_metrics(points, rhos) -> dict:
    """top1acc / mae / rho-risks for one slice; None-valued when empty."""
    result = {"n_points": len(points)}
    names = ["top1acc", "mae"] + [f"risk_{int(round(r * 100))}" for r in rhos]
    if not points:
        result.update({name: None for name in names})
        return result
    groups: dict = {}
    for p in points:
        groups.setdefault((p.race_id, p.lap), []).append(
            (p.actual_rank, p.pred_rank, p.car_id))
    result["top1acc"] = M.top1_accuracy(groups)
    result["mae"] = M.mae([p.actual_rank for p in points],
                          [p.point for p in points])
    actuals = [p.actual_rank for p in points]
    sample_sets = [p.samples for p in points]
    for rho in rhos:
        result[f"risk_{int(round(rho * 100))}"] = M.rho_risk(actuals,
                                                             sample_sets, rho)
    return result


def forecast_origins(n_laps, C, k) -> list[int]:
    """Non-overlapping origins C, C+k, ... so each lap is scored once."""
    return list(range(C, n_laps - k + 1, k))


def evaluate_race(frame, bundle, cfg, mode, seed) -> list[EvalPoint]:
    points = []
    C, k = cfg.context_length, cfg.prediction_length
    for L0 in forecast_origins(frame.n_laps, C, k):
        if mode == "currank":
            result = currank_forecast(frame, L0, L0 + k, cfg.num_samples)
        else:
            result = forecast(frame, bundle.model, bundle.pit, bundle.scaler,
                              cfg, L0, L0 + k, mode=mode, seed=seed)
        points.extend(points_from_result(result, frame))
    return points


# ---------------------------------------------------------------------------
# Stint task: rank change between consecutive pit stops


@dataclass
class StintChange:
    race_id: str
    car_id: int
    from_pit: int
    to_pit: int
    actual_change: int
    predicted_change: float
    actual_rank_at_close: int
    samples: np.ndarray   # sampled rank at the closing pit, rank units


def qualifying_stints(frame, C):
    """Pit-to-pit stints whose opening pit has a full context behind it."""
    return [s for s in segment_stints(frame)
            if s.start_lap > 1 and s.start_lap - 1 >= C
            and s.close_lap <= frame.n_laps]


def stint_change_forecast(frame, bundle, cfg, stint, mode, seed) -> StintChange:
    """Regressive rollout from the opening pit to the closing pit."""
    p = stint.start_lap - 1
    q = stint.close_lap
    if p < cfg.context_length:
        raise ContextError(
            f"stint at lap {p} lacks {cfg.context_length} laps of history")
    if mode == "currank":
        result = currank_forecast(frame, p, q, cfg.num_samples)
    else:
        result = forecast(frame, bundle.model, bundle.pit, bundle.scaler,
                          cfg, p, q, mode=mode, seed=seed)
    row = frame.car_row(stint.car_id)
    c = int(np.flatnonzero(result.car_ids == stint.car_id)[0])
    li = len(result.laps) - 1
    rank_before = int(frame.rank[row, p - 1])
    rank_close = int(frame.rank[row, q - 1])
    return StintChange(
        race_id=frame.race_id, car_id=stint.car_id, from_pit=p, to_pit=q,
        actual_change=rank_close - rank_before,
        predicted_change=float(result.agg_rank[c, li]) - rank_before,
        actual_rank_at_close=rank_close,
        samples=result.samples[c, :, li])


def stint_task(frames, bundle, cfg, mode, seed) -> list[StintChange]:
    changes = []
    for rid in sorted(frames):
        frame = frames[rid]
        for stint in qualifying_stints(frame, cfg.context_length):
            changes.append(stint_change_forecast(frame, bundle, cfg, stint,
                                                 mode, seed))
    return changes


def stint_metrics(changes, rhos) -> dict:
    """SignAcc and MAE over rank changes; rho-risk over the rank at the
    closing pit, whose positive sum keeps the normalization defined."""
    result = {"n_stints": len(changes)}
    names = ["signacc", "mae"] + [f"risk_{int(round(r * 100))}" for r in rhos]
    if not changes:
        result.update({name: None for name in names})
        return result
    result["signacc"] = M.sign_accuracy(
        [c.predicted_change for c in changes],
        [c.actual_change for c in changes])
    result["mae"] = M.mae([c.actual_change for c in changes],
                          [c.predicted_change for c in changes])
    actuals = [c.actual_rank_at_close for c in changes]
    sample_sets = [c.samples for c in changes]
    for rho in rhos:
        result[f"risk_{int(round(rho * 100))}"] = M.rho_risk(actuals,
                                                             sample_sets, rho)
    return result


# ---------------------------------------------------------------------------
# Pit-occurrence recall (two-lap classification protocol)


def pit_within_two_laps(pit_model, frames, threshold=0.1, n_draws=2000,
                        seed=0) -> dict:
    """Per-lap classification inside held-out long-normal stints.

    At each lap L of a stint, positive means the stint's closing pit
    falls within (L, L+2]. The predicted probability is the share of
    sampled next-pit draws (anchored at the opening pit, conditioned on
    survival past L) landing in that window. Returns recall, precision,
    and F1 at the given probability threshold.
    """
    rng = np.random.default_rng(seed)
    tp = fp = fn = 0
    for rid in sorted(frames):
        frame = frames[rid]
        for stint in segment_stints(frame):
            if stint.category != LONG_NORMAL or stint.start_lap == 1:
                continue
            p = stint.start_lap - 1  # opening pit lap, counters reset
            q = stint.close_lap
            mu, sigma = pit_model.predict(0.0, 0.0)
            draws = np.clip(np.round(mu + sigma * rng.standard_normal(n_draws)),
                            1, 50)
            for L in range(p + 1, q):
                age = L - p
                alive = draws > age
                n_alive = int(np.count_nonzero(alive))
                if n_alive == 0:
                    prob = 1.0  # survival past the cap forces an imminent pit
                else:
                    hits = np.count_nonzero(alive & (draws <= age + 2))
                    prob = hits / n_alive
                predicted = prob >= threshold
                actual = q - L <= 2
                tp += predicted and actual
                fp += predicted and not actual
                fn += actual and not predicted
    recall = tp / (tp + fn) if tp + fn else None
    precision = tp / (tp + fp) if tp + fp else None
    f1 = (2 * precision * recall / (precision + recall)
          if precision and recall else None)
    return {"recall": recall, "precision": precision, "f1": f1,
            "threshold": threshold, "positives": tp + fn}
