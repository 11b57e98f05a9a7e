"""Forecast-quality metrics: MAE, Top1Acc, rho-risk, SignAcc.

All metrics are pure functions over evaluation points and invariant to
point ordering. The quantile estimator is nearest-rank: the
ceil(rho * n)-th order statistic, which is deterministic for any sample
count.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, MetricError


def quantile_nearest_rank(values, rho: float) -> float:
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must be in (0, 1), got {rho}")
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    if ordered.size == 0:
        raise MetricError("quantile of an empty sample set")
    idx = math.ceil(rho * ordered.size) - 1
    return float(ordered[idx])


def mae(actuals, forecasts) -> float:
    actuals = np.asarray(actuals, dtype=np.float64)
    forecasts = np.asarray(forecasts, dtype=np.float64)
    if actuals.size == 0:
        raise MetricError("mae is undefined on an empty point set")
    return float(np.mean(np.abs(forecasts - actuals)))


def top1_accuracy(groups) -> float:
    """Fraction of (race, lap) groups whose predicted leader is the
    actual leader.

    ``groups`` maps (race_id, lap) to a list of (actual_rank,
    predicted_rank, car_id) triples covering the full car set.
    """
    if not groups:
        raise MetricError("top1_accuracy is undefined with no groups")
    sizes = {len(g) for g in groups.values()}
    if len(sizes) != 1:
        raise MetricError(f"incomplete groups: car-set sizes differ {sorted(sizes)}")
    hits = 0
    for key, triples in groups.items():
        actual_leader = [car for a, _, car in triples if a == 1]
        predicted_leader = [car for _, p, car in triples if p == 1]
        if len(actual_leader) != 1 or len(predicted_leader) != 1:
            raise MetricError(f"group {key}: leaders are not unique")
        hits += actual_leader[0] == predicted_leader[0]
    return hits / len(groups)


def rho_risk(actuals, sample_sets, rho: float) -> float:
    """Normalized quantile loss
    sum_i 2 (Zhat_i - Z_i) (1[Z_i < Zhat_i] - rho) / sum_i Z_i
    with Zhat the empirical nearest-rank rho-quantile of each sample set.
    """
    actuals = np.asarray(actuals, dtype=np.float64)
    if actuals.size == 0:
        raise MetricError("rho_risk is undefined on an empty point set")
    denominator = float(np.sum(actuals))
    if denominator == 0.0:
        raise MetricError("rho_risk: sum of actuals is zero")
    total = 0.0
    for z, samples in zip(actuals, sample_sets):
        zhat = quantile_nearest_rank(samples, rho)
        total += 2.0 * (zhat - z) * ((1.0 if z < zhat else 0.0) - rho)
    return total / denominator


def sign_accuracy(predicted_changes, actual_changes) -> float:
    """Fraction of stints whose predicted rank-change sign is right.

    Zero actual change counts as correct only for an exactly-zero
    prediction (strict convention, stated in the report footer).
    """
    predicted = np.asarray(predicted_changes, dtype=np.float64)
    actual = np.asarray(actual_changes, dtype=np.float64)
    if predicted.size == 0:
        raise MetricError("sign_accuracy is undefined on an empty point set")
    hits = np.sign(predicted) == np.sign(actual)
    return float(np.mean(hits))
