"""Training-performance benchmarks: batch-size throughput sweep and
per-op-class walltime breakdown.

Both benches run real training steps (batch assembly, forward, BPTT,
optimizer) on synthetic or provided data. Throughput is reported as
microseconds per sample; a few warm-up steps run first so one-time
allocation and JIT compilation stay out of the timings. Instrumentation
only wraps timers around the kernels, so profiled and unprofiled
training produce bit-identical parameters.
"""

from __future__ import annotations

import os
from time import perf_counter_ns

import numpy as np

from . import profiling
from .backend import get_backend, use_backend
from .config import RunConfig, config_hash
from .data import derive_features, ingest_csv
from .errors import ConfigError
from .optim import AdamState, adam_step
from .rank_model import backward_batch, forward_batch, init_rank_model, params_dict
from .synth import synth_generate
from .training import split_races
from .windows import build_windows, feature_layout, fit_scaler, prepare_dataset

CONVERGENCE_CAVEAT = (
    "throughput only: large batches typically need several times more "
    "epochs to reach the same validation loss as batch 32")


def _bench_dataset(cfg: RunConfig):
    if cfg.data_path:
        records = ingest_csv(cfg.data_path)
    else:
        records = synth_generate(cfg.synth_config(), cfg.seed)
    frames = derive_features(records, cfg.prediction_length)
    train_ids, _, _ = split_races(frames.keys(), 0, 0) \
        if len(frames) <= cfg.test_races + cfg.validation_races \
        else split_races(frames.keys(), cfg.validation_races, cfg.test_races)
    train_frames = {rid: frames[rid] for rid in train_ids}
    layout = feature_layout(cfg.use_context_features, cfg.use_shift_features)
    windows = build_windows(train_frames, cfg.context_length,
                            cfg.prediction_length, cfg.stride,
                            cfg.loss_weight, cfg.use_context_features,
                            cfg.use_shift_features)
    if not windows:
        raise ConfigError("benchmark dataset yields no training windows")
    scaler = fit_scaler(windows, layout)
    cars = sorted({w.car_id for w in windows})
    mapping = {c: i for i, c in enumerate(cars)}
    data = prepare_dataset(windows, scaler, layout, mapping)
    return data, layout, cars


def _replicate(data, needed):
    have = data["X"].shape[0]
    reps = -(-needed // have)
    idx = np.tile(np.arange(have), reps)[:needed]
    return {"X": data["X"][idx], "Z": data["Z"][idx], "W": data["W"][idx],
            "car_rows": data["car_rows"][idx], "meta": None}


def _steps(model, data, cfg, batch_size, n_steps, offset=0):
    """Run n_steps real training steps; returns elapsed ns (timed part)."""
    params = params_dict(model)
    adam = AdamState(lr=cfg.learning_rate)
    N = data["X"].shape[0]
    C, k = cfg.context_length, cfg.prediction_length
    elapsed = 0
    for step in range(n_steps):
        lo = ((offset + step) * batch_size) % max(1, N - batch_size + 1)
        sl = slice(lo, lo + batch_size)
        t0 = perf_counter_ns()
        with profiling.step_scope():
            nll, n, cache = forward_batch(model, data["X"][sl], data["Z"][sl],
                                          data["W"][sl], data["car_rows"][sl],
                                          C, k)
            grads = backward_batch(model, cache)
            adam_step(params, grads, adam)
        elapsed += perf_counter_ns() - t0
    return elapsed


def _fresh_model(cfg, layout_size, cars):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    return init_rank_model(rng, layout_size, cars, hidden=cfg.hidden_size,
                           layers=cfg.lstm_layers,
                           embedding_dim=cfg.embedding_dim)


def bench_throughput(cfg: RunConfig, backends=None) -> dict:
    """Sweep the configured batch sizes; report us/sample per size."""
    sweep = cfg.batch_size_sweep()
    data, layout, cars = _bench_dataset(cfg)
    warnings = []
    biggest = max(sweep)
    if data["X"].shape[0] < biggest:
        warnings.append(
            f"dataset has {data['X'].shape[0]} windows; replicating to "
            f"fill batches of {biggest}")
        data = _replicate(data, biggest)
    backends = backends or [get_backend()]
    results = {}
    for backend_name in backends:
        with use_backend(backend_name):
            per_size = {}
            for B in sweep:
                model = _fresh_model(cfg, len(layout), cars)
                _steps(model, data, cfg, B, cfg.bench_warmup)
                elapsed = _steps(model, data, cfg, B, cfg.bench_steps,
                                 offset=cfg.bench_warmup)
                per_sample_us = elapsed / 1000.0 / (cfg.bench_steps * B)
                per_size[str(B)] = {
                    "us_per_sample": per_sample_us,
                    "step_ms": elapsed / 1e6 / cfg.bench_steps,
                    "steps": cfg.bench_steps,
                }
            results[backend_name] = per_size
    report = {
        "batch_sizes": sweep,
        "results": results,
        "cpu_count": os.cpu_count(),
        "warnings": warnings,
        "caveat": CONVERGENCE_CAVEAT,
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
    }
    for backend_name, per_size in results.items():
        first = per_size[str(sweep[0])]["us_per_sample"]
        last = per_size[str(sweep[-1])]["us_per_sample"]
        report.setdefault("speedup", {})[backend_name] = first / last
    return report


def bench_opbreakdown(cfg: RunConfig) -> dict:
    """Instrumented training steps; emits the per-class walltime shares."""
    data, layout, cars = _bench_dataset(cfg)
    B = cfg.batch_size
    if data["X"].shape[0] < B:
        data = _replicate(data, B)
    model = _fresh_model(cfg, len(layout), cars)
    _steps(model, data, cfg, B, cfg.bench_warmup)  # warm-up unprofiled
    profiling.reset()
    profiling.enable()
    try:
        _steps(model, data, cfg, B, cfg.bench_steps, offset=cfg.bench_warmup)
        op_profile = profiling.report()
    finally:
        profiling.disable()
    kernel_pct = sum(op_profile[cls]["pct"] for cls in profiling.KERNEL_CLASSES)
    return {
        "op_profile": op_profile,
        "kernel_pct": kernel_pct,
        "batch_size": B,
        "steps": cfg.bench_steps,
        "backend": get_backend(),
        "cpu_count": os.cpu_count(),
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
    }
