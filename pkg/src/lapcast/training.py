"""Minibatch training of the rank model and the surrounding pipeline.

Training is teacher-forced: observed previous targets feed the decoder
steps, and the weighted Gaussian NLL is taken over decoder steps only.
The validation loss drives the plateau schedule and selects the
parameters that are returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import profiling
from .config import RunConfig, config_hash
from .data import derive_features
from .errors import ConfigError, DivergenceError, DomainError
from .optim import AdamState, PlateauLr, adam_step
from .pit_model import PitModel, train_pit_model
from .rank_model import (RankModelParams, backward_batch, clone_params,
                         forward_batch, init_rank_model, params_dict)
from .stints import pit_training_examples, stint_stats
from .windows import (build_windows, feature_layout, fit_scaler,
                      prepare_dataset, Scaler)


def split_races(race_ids, validation_races, test_races):
    """Deterministic split in sorted race-id order: the last test_races
    are held out, the validation_races before them tune the schedule."""
    ordered = sorted(race_ids)
    if test_races + validation_races >= len(ordered):
        raise ConfigError(
            f"{len(ordered)} races cannot cover test={test_races} + "
            f"validation={validation_races} plus a training split")
    test = ordered[len(ordered) - test_races:] if test_races else []
    rest = ordered[:len(ordered) - test_races]
    val = rest[len(rest) - validation_races:] if validation_races else []
    train = rest[:len(rest) - validation_races]
    return train, val, test


def _epoch_loss(model, data, C, k, batch_size):
    total, terms = 0.0, 0
    N = data["X"].shape[0]
    for lo in range(0, N, batch_size):
        sl = slice(lo, min(lo + batch_size, N))
        nll, n, _ = forward_batch(model, data["X"][sl], data["Z"][sl],
                                  data["W"][sl], data["car_rows"][sl], C, k)
        total += nll
        terms += n
    return total / terms


def train_rank_model(model: RankModelParams, train_data, val_data,
                     cfg: RunConfig, seed=None):
    """Alg-1-style minibatch loop; returns (best-validation model, history)."""
    if train_data["X"].shape[0] == 0:
        raise ConfigError("empty training set")
    seed = cfg.seed if seed is None else seed
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    C, k, B = cfg.context_length, cfg.prediction_length, cfg.batch_size
    params = params_dict(model)
    adam = AdamState(lr=cfg.learning_rate)
    sched = PlateauLr(lr=cfg.learning_rate, factor=cfg.lr_decay_factor,
                      patience=cfg.lr_patience, floor=cfg.lr_floor)
    N = train_data["X"].shape[0]
    history = []
    best_val = float("inf")
    best_model = clone_params(model)

    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(N)
        epoch_nll, epoch_terms = 0.0, 0
        for bi, lo in enumerate(range(0, N, B)):
            idx = perm[lo:lo + B]
            with profiling.step_scope():
                try:
                    nll, n, cache = forward_batch(
                        model, train_data["X"][idx], train_data["Z"][idx],
                        train_data["W"][idx], train_data["car_rows"][idx],
                        C, k)
                except DomainError as exc:  # sigma underflowed to zero
                    raise DivergenceError(
                        f"{exc} at epoch {epoch}, batch {bi} "
                        f"(shuffle seed {seed})") from None
                loss = nll / n
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"non-finite loss at epoch {epoch}, batch {bi} "
                        f"(shuffle seed {seed})")
                grads = backward_batch(model, cache)
                adam_step(params, grads, adam)
            epoch_nll += nll
            epoch_terms += n
        train_loss = epoch_nll / epoch_terms
        val_loss = (_epoch_loss(model, val_data, C, k, B)
                    if val_data is not None else train_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_model = clone_params(model)
        lr, stop = sched.observe(val_loss)
        adam.lr = lr
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "val_loss": val_loss, "lr": lr})
        if stop:
            break
    return best_model, history


@dataclass
class TrainedBundle:
    model: RankModelParams
    pit: PitModel | None
    scaler: Scaler
    layout: tuple
    config: RunConfig
    history: list = field(default_factory=list)
    pit_history: list = field(default_factory=list)

    def config_echo(self) -> dict:
        echo = self.config.to_dict()
        echo["config_hash"] = config_hash(self.config)
        return echo


def build_bundle(records, cfg: RunConfig) -> TrainedBundle:
    """Feature derivation, splits, scaler, pit model, rank model."""
    cfg.validate()
    k = cfg.prediction_length
    frames = derive_features(records, k)
    train_ids, val_ids, _ = split_races(frames.keys(), cfg.validation_races,
                                        cfg.test_races)
    train_frames = {rid: frames[rid] for rid in train_ids}
    val_frames = {rid: frames[rid] for rid in val_ids}

    layout = feature_layout(cfg.use_context_features, cfg.use_shift_features)
    train_windows = build_windows(train_frames, cfg.context_length, k,
                                  cfg.stride, cfg.loss_weight,
                                  cfg.use_context_features,
                                  cfg.use_shift_features)
    if not train_windows:
        raise ConfigError("training races are shorter than context+prediction")
    val_windows = build_windows(val_frames, cfg.context_length, k, cfg.stride,
                                cfg.loss_weight, cfg.use_context_features,
                                cfg.use_shift_features)
    scaler = fit_scaler(train_windows, layout)

    car_ids = sorted({w.car_id for w in train_windows})
    car_to_row = {cid: i for i, cid in enumerate(car_ids)}
    covariate_free = cfg.mode == "covariate-free"
    train_data = prepare_dataset(train_windows, scaler, layout, car_to_row,
                                 covariate_free)
    val_data = (prepare_dataset(val_windows, scaler, layout, car_to_row,
                                covariate_free) if val_windows else None)

    init_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    model = init_rank_model(init_rng, len(layout), car_ids,
                            hidden=cfg.hidden_size, layers=cfg.lstm_layers,
                            embedding_dim=cfg.embedding_dim)

    pit = None
    pit_history = []
    if not covariate_free:
        stints, _ = stint_stats(train_frames)
        examples = pit_training_examples(train_frames, stints)
        pit_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
        pit, pit_history = train_pit_model(examples, pit_rng,
                                           epochs=cfg.pit_epochs,
                                           lr=cfg.learning_rate)

    model, history = train_rank_model(model, train_data, val_data, cfg)
    return TrainedBundle(model, pit, scaler, layout, cfg, history, pit_history)
