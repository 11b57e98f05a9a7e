"""Regressive probabilistic forecasting (cause-effect decomposed).

Per sample trajectory: the pit predictor chain-samples future pit laps
from the last known pit (first offset conditioned on the observed
pit-free laps), future track status is assumed green, covariates are
re-derived along the sampled plan, and the sequence model rolls forward
feeding each sampled target back as the next input. 100 independent
trajectories per forecast; every (sample, car) pair owns an RNG stream
derived from the master seed so parallel and serial execution agree.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import windows as W
from .data import LEADER_SET_SIZE, RaceFrame
from .errors import ConfigError, ContextError, DataError, ModeError
from .metrics import quantile_nearest_rank
from .pit_model import chain_pit_laps, last_known_pit
from .rank_model import copy_states, decode_step, encode
from .windows import TARGET_KEY, feature_layout


@dataclass
class ForecastResult:
    race_id: str
    car_ids: np.ndarray
    origin: int                # forecast start L0 (last observed lap)
    laps: np.ndarray           # forecast laps L0+1 .. LP
    samples: np.ndarray        # (n_cars, n_samples, n_laps), rank units
    q10: np.ndarray            # (n_cars, n_laps)
    q50: np.ndarray
    q90: np.ndarray
    per_sample_rank: np.ndarray  # (n_cars, n_samples, n_laps), int
    agg_rank: np.ndarray         # (n_cars, n_laps), int

    @property
    def point(self):
        """Point forecast = median (0.5 nearest-rank quantile) of samples."""
        return self.q50


def ranks_from_samples(values: np.ndarray):
    """Ranks by ascending sampled value, car-index tie-break.

    values is (n_cars, n_samples); returns per-sample rank permutations
    (n_cars, n_samples) and the aggregate ranks (n_cars,) computed the
    same way from the per-car medians.
    """
    n_cars, n_samples = values.shape
    order = np.argsort(values, axis=0, kind="stable")
    ranks = np.empty((n_cars, n_samples), dtype=np.int64)
    positions = np.arange(1, n_cars + 1)
    for s in range(n_samples):
        ranks[order[:, s], s] = positions
    medians = np.array([quantile_nearest_rank(values[c], 0.5)
                        for c in range(n_cars)])
    agg_order = np.argsort(medians, kind="stable")
    agg = np.empty(n_cars, dtype=np.int64)
    agg[agg_order] = positions
    return ranks, agg


def _rng_streams(master_seed, race_id, origin, sample, car_id):
    """Two independent generators per (sample, car): one for the pit
    chain, one for the trajectory draws. Keeping them separate makes a
    2k-lap rollout agree bit-exactly with chained k-lap blocks."""
    entropy = [int(master_seed), zlib.crc32(race_id.encode()), int(origin),
               int(sample), int(car_id)]
    pit_ss, eps_ss = np.random.SeedSequence(entropy).spawn(2)
    return np.random.default_rng(pit_ss), np.random.default_rng(eps_ss)


def _encode_history(frame, model, scaler, layout, C, L0, covariate_free):
    start = L0 - C + 1
    xs = []
    for row in range(frame.n_cars):
        x, _ = W.window_matrix(frame, row, start, C, 0, layout)
        xs.append(x)
    X = scaler.transform_features(np.stack(xs), layout)
    if covariate_free:
        for ci, name in enumerate(layout):
            if name in W.RACE_STATUS_COLUMNS:
                X[..., ci] = 0.0
    car_rows_map = model.car_to_row()
    try:
        car_rows = np.array([car_rows_map[int(c)] for c in frame.car_ids],
                            dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"car {exc.args[0]} unknown to the trained model")
    return encode(model, X, car_rows), car_rows


class _FuturePlan:
    """Per-sample future race status for every car: sampled (mlp),
    ground truth (oracle), or all-zero (covariate-free)."""

    def __init__(self, frame: RaceFrame, L0, LP, k, mode, pit_model,
                 rngs, zero_sigma):
        self.frame = frame
        self.L0 = L0
        self.k = k
        n = frame.n_cars
        ext = LP + k  # shift features read beyond the forecast horizon
        self.ext = ext
        self.track = np.zeros((n, ext + 1))   # 1-based lap indexing
        self.pit = np.zeros((n, ext + 1))
        if mode == "oracle":
            upto = min(ext, frame.n_laps)
            self.track[:, 1:upto + 1] = frame.track_status[:, :upto]
            self.pit[:, 1:upto + 1] = frame.lap_status[:, :upto]
        elif mode == "mlp":
            for row in range(n):
                anchor = last_known_pit(frame.lap_status[row], L0)
                if anchor > 0:
                    feats = (frame.caution_laps[row, anchor - 1],
                             frame.pit_age[row, anchor - 1])
                else:
                    feats = (0.0, 0.0)
                for lap in chain_pit_laps(pit_model, anchor, feats[0], feats[1],
                                          L0, ext, rngs[row],
                                          zero_sigma=zero_sigma):
                    self.pit[row, lap] = 1.0
        # covariate-free: everything stays zero

        # age counters continued from the observed state at L0
        self.caution = np.zeros((n, ext + 1))
        self.age = np.zeros((n, ext + 1))
        c = frame.caution_laps[:, L0 - 1].copy()
        a = frame.pit_age[:, L0 - 1].copy()
        for lap in range(L0 + 1, ext + 1):
            pitting = self.pit[:, lap] == 1.0
            c = np.where(pitting, 0.0, c + self.track[:, lap])
            a = np.where(pitting, 0.0, a + 1.0)
            self.caution[:, lap] = c
            self.age[:, lap] = a
        self.total_pits = self.pit[:, :].sum(axis=0)  # per extended lap

    def observed_or_planned_pit(self, lap):
        if lap <= self.L0:
            return self.frame.lap_status[:, lap - 1]
        return self.pit[:, lap]

    def total_pit_count(self, lap):
        if lap <= self.L0:
            return float(self.frame.total_pit_count[lap - 1])
        if lap > self.ext:
            return 0.0
        return float(self.total_pits[lap])

    def leader_pit_count(self, lap, ranks_at):
        """Pitting cars at `lap` among the leader set at lap-2; `ranks_at`
        resolves a lap to per-car ranks (observed or sampled)."""
        ref = lap - 2
        if ref < 1:
            return 0.0
        ranks = ranks_at(ref)
        pits = self.observed_or_planned_pit(lap)
        return float(np.sum(pits[ranks <= LEADER_SET_SIZE]))


def forecast(frame: RaceFrame, model, pit_model, scaler, cfg, L0, LP,
             mode=None, seed=None, zero_sigma=False) -> ForecastResult:
    """Alg-2-style rollout for every car of one race.

    The decoder advances lap by lap, feeding each sampled (normalized)
    target back as the next prev-rank input; chaining k-lap blocks is
    the same recurrence, so horizons beyond k need no re-encoding.
    """
    mode = mode or cfg.mode
    seed = cfg.seed if seed is None else seed
    C = cfg.context_length
    k = cfg.prediction_length
    n_samples = cfg.num_samples
    if mode == "currank":
        return currank_forecast(frame, L0, LP, n_samples)
    if L0 < C:
        raise ContextError(f"forecast needs {C} laps of history, have {L0}")
    if LP <= L0:
        raise ConfigError(f"forecast horizon LP={LP} must exceed L0={L0}")
    if frame.n_laps < L0:
        raise ContextError(f"race has only {frame.n_laps} laps, L0={L0}")
    if mode == "oracle" and frame.n_laps < LP:
        raise ModeError(
            f"oracle mode needs ground-truth status through lap {LP}, "
            f"race ends at {frame.n_laps}")
    if mode == "mlp" and pit_model is None:
        raise ModeError("mlp mode requires a trained pit model")
    if mode not in ("mlp", "oracle", "covariate-free"):
        raise ModeError(f"unknown forecast mode {mode!r}")

    covariate_free = mode == "covariate-free"
    layout = feature_layout(cfg.use_context_features, cfg.use_shift_features)
    base_states, car_rows = _encode_history(frame, model, scaler, layout, C,
                                            L0, covariate_free)
    n = frame.n_cars
    horizon = LP - L0
    laps = np.arange(L0 + 1, LP + 1)
    emb = model.embedding.table[car_rows]

    # lag-1 timing inputs freeze at the last observed lap
    prev_lt = scaler.transform("lap_time", frame.lap_time[:, L0 - 1])
    prev_tb = scaler.transform("time_behind_leader", frame.time_behind[:, L0 - 1])
    z0 = scaler.transform(TARGET_KEY, frame.rank[:, L0 - 1])

    col_idx = {name: i for i, name in enumerate(layout)}
    samples_norm = np.empty((n, n_samples, horizon))

    for s in range(n_samples):
        streams = [_rng_streams(seed, frame.race_id, L0, s, int(cid))
                   for cid in frame.car_ids]
        pit_rngs = [st[0] for st in streams]
        eps_rngs = [st[1] for st in streams]
        plan = _FuturePlan(frame, L0, LP, k, mode, pit_model, pit_rngs,
                           zero_sigma)
        states = copy_states(base_states)
        prev_z = z0.copy()
        sampled_ranks = {}  # lap -> per-car integer ranks of sampled values

        def ranks_at(lap, _s=s, _sampled=sampled_ranks):
            if lap <= L0:
                return frame.rank[:, lap - 1]
            return _sampled[lap]

        for li, lap in enumerate(laps):
            x = np.zeros((n, len(layout)))
            x[:, col_idx[W.PREV_RANK]] = prev_z
            x[:, col_idx[W.PREV_LAP_TIME]] = prev_lt
            x[:, col_idx[W.PREV_TIME_BEHIND]] = prev_tb
            if not covariate_free:
                x[:, col_idx[W.TRACK_STATUS]] = plan.track[:, lap]
                x[:, col_idx[W.LAP_STATUS]] = plan.pit[:, lap]
                x[:, col_idx[W.CAUTION_LAPS]] = scaler.transform(
                    "caution_laps", plan.caution[:, lap])
                x[:, col_idx[W.PIT_AGE]] = scaler.transform(
                    "pit_age", plan.age[:, lap])
                if cfg.use_context_features:
                    x[:, col_idx[W.LEADER_PIT_COUNT]] = scaler.transform(
                        "leader_pit_count",
                        plan.leader_pit_count(lap, ranks_at))
                    x[:, col_idx[W.TOTAL_PIT_COUNT]] = scaler.transform(
                        "total_pit_count", plan.total_pit_count(lap))
                if cfg.use_shift_features:
                    x[:, col_idx[W.SHIFT_TRACK_STATUS]] = plan.track[:, min(lap + k, plan.ext)]
                    x[:, col_idx[W.SHIFT_LAP_STATUS]] = plan.pit[:, min(lap + k, plan.ext)]
                    x[:, col_idx[W.SHIFT_TOTAL_PIT_COUNT]] = scaler.transform(
                        "total_pit_count", plan.total_pit_count(lap + k))
            x_t = np.ascontiguousarray(np.concatenate([x, emb], axis=1))
            states, mu, sigma = decode_step(model, x_t, states)
            if zero_sigma:
                z_t = mu[:, 0].copy()
            else:
                eps = np.array([eps_rngs[row].standard_normal()
                                for row in range(n)])
                z_t = mu[:, 0] + sigma[:, 0] * eps
            samples_norm[:, s, li] = z_t
            prev_z = z_t
            if cfg.use_context_features:
                values = scaler.invert(TARGET_KEY, z_t)
                order = np.argsort(values, kind="stable")
                rr = np.empty(n, dtype=np.int64)
                rr[order] = np.arange(1, n + 1)
                sampled_ranks[lap] = rr

    samples = scaler.invert(TARGET_KEY, samples_norm)
    q10 = np.empty((n, horizon))
    q50 = np.empty((n, horizon))
    q90 = np.empty((n, horizon))
    per_sample_rank = np.empty((n, n_samples, horizon), dtype=np.int64)
    agg_rank = np.empty((n, horizon), dtype=np.int64)
    for li in range(horizon):
        for c in range(n):
            vals = samples[c, :, li]
            q10[c, li] = quantile_nearest_rank(vals, 0.1)
            q50[c, li] = quantile_nearest_rank(vals, 0.5)
            q90[c, li] = quantile_nearest_rank(vals, 0.9)
        per_sample_rank[:, :, li], agg_rank[:, li] = ranks_from_samples(
            samples[:, :, li])
    return ForecastResult(frame.race_id, frame.car_ids.copy(), L0, laps,
                          samples, q10, q50, q90, per_sample_rank, agg_rank)


def currank_forecast(frame: RaceFrame, L0, LP, n_samples=100) -> ForecastResult:
    """Baseline: every future rank equals the rank at L0."""
    if L0 < 1 or frame.n_laps < L0:
        raise ContextError(f"currank needs an observed rank at lap {L0}")
    if LP <= L0:
        raise ConfigError(f"forecast horizon LP={LP} must exceed L0={L0}")
    n = frame.n_cars
    horizon = LP - L0
    current = frame.rank[:, L0 - 1]
    samples = np.tile(current[:, None, None], (1, n_samples, horizon))
    q = np.tile(current[:, None], (1, horizon))
    rank = np.tile(current.astype(np.int64)[:, None], (1, horizon))
    per_sample = np.tile(current.astype(np.int64)[:, None, None],
                         (1, n_samples, horizon))
    return ForecastResult(frame.race_id, frame.car_ids.copy(), L0,
                          np.arange(L0 + 1, LP + 1), samples,
                          q.copy(), q.copy(), q.copy(), per_sample, rank)


def forecast_entries(result: ForecastResult) -> list[dict]:
    """JSON-ready rows: one per (car, future lap)."""
    rows = []
    for li, lap in enumerate(result.laps):
        for c, car_id in enumerate(result.car_ids):
            rows.append({
                "race_id": result.race_id,
                "car_id": int(car_id),
                "lap": int(lap),
                "samples": [float(v) for v in result.samples[c, :, li]],
                "q10": float(result.q10[c, li]),
                "q50": float(result.q50[c, li]),
                "q90": float(result.q90[c, li]),
                "rank": int(result.agg_rank[c, li]),
                "origin": int(result.origin),
            })
    return rows
