"""Pit predictor: a small MLP with a Gaussian head over the next-pit offset.

Trained on long-normal stints only (the short-distance section is
dominated by unpredictable failures and caution pits have their own
dynamics). Inputs are the two age counters at the stint-opening pit lap;
the target is the offset in laps to the closing pit, learned in
normalized space. Sampled offsets are rounded to whole laps and clamped
to [1, 50] — the fuel-and-tires resource cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import DivergenceError
from .optim import AdamState, adam_step
from .stints import require_examples

OFFSET_MIN = 1
OFFSET_MAX = 50


@dataclass
class PitModel:
    mlp: nn.MlpParams
    target_mean: float
    target_std: float

    def predict(self, caution_laps, pit_age):
        """(mu, sigma) of the next-pit offset in laps."""
        x = np.array([[float(caution_laps), float(pit_age)]])
        mu_n, sigma_n, _ = nn.mlp_forward(self.mlp, x)
        mu = mu_n[0, 0] * self.target_std + self.target_mean
        sigma = sigma_n[0, 0] * self.target_std
        return float(mu), float(sigma)

    def sample_offset(self, caution_laps, pit_age, rng, zero_sigma=False,
                      min_offset=OFFSET_MIN) -> int:
        """Draw one offset, conditioned to be >= min_offset (survival:
        the car demonstrably has not pitted before then)."""
        mu, sigma = self.predict(caution_laps, pit_age)
        lo = max(OFFSET_MIN, int(min_offset))
        if zero_sigma:
            return int(np.clip(round(mu), lo, OFFSET_MAX))
        for _ in range(64):
            offset = int(np.clip(round(mu + sigma * rng.standard_normal()),
                                 OFFSET_MIN, OFFSET_MAX))
            if offset >= lo:
                return offset
        return min(lo, OFFSET_MAX)


def train_pit_model(examples, rng, epochs=400, lr=1e-3,
                    hidden_sizes=(10, 5, 5)) -> tuple[PitModel, list]:
    """Full-batch ADAM on the Gaussian NLL of normalized offsets."""
    examples = require_examples(examples)
    x = np.array([[e.caution_laps, e.pit_age] for e in examples])
    z = np.array([[e.offset] for e in examples])
    mean = float(np.mean(z))
    std = float(np.std(z))
    if std <= 0.0:
        std = 1.0
    z_n = (z - mean) / std

    mlp = nn.init_mlp(rng, 2, hidden_sizes)
    params = nn.mlp_params_dict(mlp)
    state = AdamState(lr=lr)
    history = []
    n = len(examples)
    for epoch in range(epochs):
        mu, sigma, cache = nn.mlp_forward(mlp, x)
        loss = nn.gaussian_nll(z_n, mu, sigma) / n
        if not np.isfinite(loss):
            raise DivergenceError(f"pit model diverged at epoch {epoch}")
        dmu, dsigma = nn.gaussian_nll_grad(z_n, mu, sigma)
        dmu /= n
        dsigma /= n
        _, grads = nn.mlp_backward(mlp, cache, dmu, dsigma)
        adam_step(params, grads, state)
        history.append(loss)
    return PitModel(mlp, mean, std), history


def chain_pit_laps(pit_model: PitModel, last_pit_lap, caution_laps, pit_age,
                   start_lap, horizon_lap, rng, zero_sigma=False) -> list[int]:
    """Sample future pit laps from the last known pit past the horizon.

    The first draw is anchored at the last known pit (lap 0 with the
    race-start counters if the car has never pitted) and conditioned on
    the observed absence of pits up to start_lap; subsequent draws
    anchor at each sampled pit, where both counters are zero because the
    forecast assumes no future cautions.
    """
    pits = []
    anchor = int(last_pit_lap)
    feats = (float(caution_laps), float(pit_age))
    first = True
    while True:
        min_offset = max(OFFSET_MIN, start_lap - anchor + 1) if first else OFFSET_MIN
        offset = pit_model.sample_offset(feats[0], feats[1], rng,
                                         zero_sigma=zero_sigma,
                                         min_offset=min_offset)
        anchor = anchor + offset
        first = False
        if anchor > horizon_lap:
            break
        if anchor > start_lap:
            pits.append(anchor)
        feats = (0.0, 0.0)
    return pits


def last_known_pit(lap_status_row, through_lap) -> int:
    """Most recent 1-based pit lap at or before through_lap; 0 if none."""
    upto = lap_status_row[:through_lap]
    hits = np.flatnonzero(upto == 1.0)
    return int(hits[-1]) + 1 if hits.size else 0
