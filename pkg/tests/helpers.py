"""Shared builders for model-level tests."""

import numpy as np

from lapcast.config import RunConfig
from lapcast.data import derive_features
from lapcast.rank_model import init_rank_model
from lapcast.synth import SynthConfig
from lapcast.synth import synth_generate
from lapcast.windows import (build_windows, feature_layout, fit_scaler,
                             prepare_dataset)


def tiny_model(rng, n_features=7, n_cars=3, hidden=8, layers=2, emb=4):
    return init_rank_model(rng, n_features, list(range(n_cars)),
                           hidden=hidden, layers=layers, embedding_dim=emb)


def random_batch(rng, batch=3, C=4, k=2, n_features=7, n_cars=3):
    T = C + k
    X = rng.standard_normal((batch, T, n_features))
    Z = rng.standard_normal((batch, T))
    W = 1.0 + 8.0 * (rng.random((batch, k)) < 0.3)
    rows = rng.integers(0, n_cars, size=batch)
    return X, Z, W, rows


def small_dataset(seed=9, num_races=3, num_cars=4, num_laps=24, C=10, k=2,
                  loss_weight=9.0):
    """Real windows from a small synthetic run, normalized and stacked."""
    cfg = SynthConfig(num_races=num_races, num_cars=num_cars,
                      num_laps=num_laps)
    frames = derive_features(synth_generate(cfg, seed), k=k)
    layout = feature_layout()
    wins = build_windows(frames, C, k, loss_weight=loss_weight)
    scaler = fit_scaler(wins, layout)
    cars = sorted({w.car_id for w in wins})
    mapping = {c: i for i, c in enumerate(cars)}
    data = prepare_dataset(wins, scaler, layout, mapping)
    return frames, layout, scaler, mapping, data


def small_run_config(**kw):
    # short stints (24-32 laps) so 60-lap races still contain complete
    # pit-opened long-normal stints for the pit model
    base = dict(context_length=10, prediction_length=2, hidden_size=8,
                lstm_layers=2, embedding_dim=4, batch_size=8, epochs=5,
                pit_epochs=50, num_samples=20, num_races=6, num_cars=4,
                num_laps=60, stint_mean=26.0, stint_sd=2.0, stint_min=24,
                stint_max=32, validation_races=1, test_races=2, seed=5)
    base.update(kw)
    return RunConfig(**base).validate()
