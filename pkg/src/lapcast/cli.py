"""Command-line surface: simulate | train | forecast | evaluate |
bench-throughput | bench-opbreakdown.

Every command takes --config (key = value file) plus flag overrides and
prints the effective config. Exit codes: 0 ok, 1 usage/config, 2 data
integrity, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

from . import profiling
from .bench import bench_opbreakdown, bench_throughput
from .checkpoint import load_checkpoint, save_checkpoint
from .config import config_hash, make_config
from .data import derive_features, ingest_csv, write_csv
from .errors import ConfigError, LapcastError, exit_code_for
from .evaluation import (SLICES, compute_slice_metrics, evaluate_race,
                         forecast_origins, points_from_entries, slice_laps,
                         stint_metrics, stint_task)
from .forecasting import currank_forecast, forecast, forecast_entries
from .rank_model import parameter_count
from .report import MetricsReport, emit_report
from .stints import stint_stats
from .synth import synth_generate
from .training import build_bundle, split_races


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--data", dest="data_path", help="race-log CSV")
    p.add_argument("--out", dest="out_path", help="output path")
    p.add_argument("--mode", choices=["mlp", "oracle", "covariate-free",
                                      "currank"])
    p.add_argument("--profile", action="store_true", default=None,
                   help="enable kernel walltime instrumentation")


def build_parser():
    parser = _Parser(prog="lapcast",
                     description="rank-position forecasting for lap racing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic race log")
    _common_flags(p)
    p.add_argument("--races", type=int, dest="num_races")
    p.add_argument("--cars", type=int, dest="num_cars")
    p.add_argument("--laps", type=int, dest="num_laps")

    p = sub.add_parser("train", help="train pit + rank models")
    _common_flags(p)
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("forecast", help="probabilistic forecasts on test races")
    _common_flags(p)
    p.add_argument("--checkpoint", dest="checkpoint_path")

    p = sub.add_parser("evaluate", help="score forecasts against actuals")
    _common_flags(p)
    p.add_argument("--checkpoint", dest="checkpoint_path")
    p.add_argument("--forecast", dest="forecast_path",
                   help="score a pre-computed forecast file")
    p.add_argument("--format", choices=["json", "csv", "both"], default="both")

    p = sub.add_parser("bench-throughput", help="batch-size sweep, us/sample")
    _common_flags(p)
    p.add_argument("--backend", choices=["numba", "numpy", "both"])

    p = sub.add_parser("bench-opbreakdown",
                       help="per-op-class walltime shares")
    _common_flags(p)
    return parser


def _overrides(args) -> dict:
    skip = {"command", "config", "forecast_path", "backend", "format"}
    return {k: v for k, v in vars(args).items()
            if k not in skip and v is not None}


def _echo(cfg):
    print(f"config_hash = {config_hash(cfg)}")
    for key, value in sorted(cfg.to_dict().items()):
        print(f"{key} = {value}")


def _dataset_digest(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()[:12]


def cmd_simulate(cfg) -> int:
    if cfg.num_laps < cfg.context_length + cfg.prediction_length:
        raise ConfigError(
            f"num_laps={cfg.num_laps} is shorter than context+prediction="
            f"{cfg.context_length + cfg.prediction_length}")
    if not cfg.out_path:
        raise ConfigError("simulate needs --out for the CSV")
    records = synth_generate(cfg.synth_config(), cfg.seed)
    write_csv(records, cfg.out_path)
    frames = derive_features(records, cfg.prediction_length)
    _, histogram = stint_stats(frames)
    print(f"wrote {len(records)} records to {cfg.out_path}")
    print("stint categories:", json.dumps(histogram, sort_keys=True))
    return 0


def cmd_train(cfg) -> int:
    if not cfg.data_path:
        raise ConfigError("train needs --data")
    if not cfg.out_path:
        raise ConfigError("train needs --out for the checkpoint")
    if cfg.profile:
        profiling.reset()
        profiling.enable()
    records = ingest_csv(cfg.data_path)
    try:
        bundle = build_bundle(records, cfg)
    finally:
        profiling.disable()
    save_checkpoint(bundle, cfg.out_path)
    history_path = cfg.out_path + ".history.csv"
    with open(history_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_loss,lr\n")
        for row in bundle.history:
            fh.write(f"{row['epoch']},{row['train_loss']!r},"
                     f"{row['val_loss']!r},{row['lr']!r}\n")
    if cfg.profile:
        with open(cfg.out_path + ".profile.json", "w", encoding="utf-8") as fh:
            json.dump(profiling.report(), fh, indent=2)
    print(f"parameters: {parameter_count(bundle.model)}")
    print(f"best validation loss: {min(h['val_loss'] for h in bundle.history)!r}")
    print(f"checkpoint: {cfg.out_path}")
    print(f"history: {history_path}")
    return 0


def _test_frames(cfg, records):
    frames = derive_features(records, cfg.prediction_length)
    _, _, test_ids = split_races(frames.keys(), cfg.validation_races,
                                 cfg.test_races)
    return frames, {rid: frames[rid] for rid in test_ids}


def _load_for_inference(checkpoint_path, overrides):
    """Checkpoint config drives the model; explicit CLI flags override."""
    bundle = load_checkpoint(checkpoint_path)
    cfg = bundle.config
    for key in ("seed", "mode", "num_samples", "data_path", "out_path",
                "profile", "checkpoint_path"):
        if key in overrides:
            setattr(cfg, key, overrides[key])
    cfg.validate()
    return bundle, cfg


def cmd_forecast(args, cfg, overrides) -> int:
    mode = cfg.mode
    if mode != "currank":
        if not cfg.checkpoint_path:
            raise ConfigError(f"mode {mode} needs --checkpoint")
        bundle, cfg = _load_for_inference(cfg.checkpoint_path, overrides)
        mode = cfg.mode
    else:
        bundle = None
    if not cfg.data_path:
        raise ConfigError("forecast needs --data")
    if not cfg.out_path:
        raise ConfigError("forecast needs --out")
    records = ingest_csv(cfg.data_path)
    _, test_frames = _test_frames(cfg, records)
    entries = []
    for rid in sorted(test_frames):
        frame = test_frames[rid]
        for L0 in forecast_origins(frame.n_laps, cfg.context_length,
                                   cfg.prediction_length):
            LP = L0 + cfg.prediction_length
            if mode == "currank":
                result = currank_forecast(frame, L0, LP, cfg.num_samples)
            else:
                result = forecast(frame, bundle.model, bundle.pit,
                                  bundle.scaler, cfg, L0, LP,
                                  mode=mode, seed=cfg.seed)
            entries.extend(forecast_entries(result))
    with open(cfg.out_path, "w", encoding="utf-8") as fh:
        json.dump(entries, fh)
    _echo(cfg)
    print(f"wrote {len(entries)} forecast rows to {cfg.out_path}")
    return 0


def cmd_evaluate(args, cfg, overrides) -> int:
    bundle = None
    mode = cfg.mode
    if not args.forecast_path and mode != "currank":
        if not cfg.checkpoint_path:
            raise ConfigError("evaluate needs --forecast or --checkpoint "
                              "(or --mode currank)")
        bundle, cfg = _load_for_inference(cfg.checkpoint_path, overrides)
        mode = cfg.mode
    if not cfg.data_path:
        raise ConfigError("evaluate needs --data")
    if not cfg.out_path:
        raise ConfigError("evaluate needs --out")
    records = ingest_csv(cfg.data_path)
    frames, test_frames = _test_frames(cfg, records)
    if args.forecast_path:
        with open(args.forecast_path, encoding="utf-8") as fh:
            entries = json.load(fh)
        points = points_from_entries(entries, frames)
    else:
        points = []
        for rid in sorted(test_frames):
            points.extend(evaluate_race(test_frames[rid], bundle, cfg, mode,
                                        cfg.seed))
    rhos = cfg.rhos()
    slices = slice_laps(points, frames)
    report_slices = {name: compute_slice_metrics(slices[name], rhos)
                     for name in SLICES}
    if bundle is not None or (mode == "currank" and not args.forecast_path):
        changes = stint_task(test_frames, bundle, cfg, mode, cfg.seed)
        if changes:
            report_slices["StintTask"] = stint_metrics(changes, rhos)
    meta = {
        "seed": cfg.seed,
        "mode": mode,
        "config_hash": config_hash(cfg),
        "dataset": _dataset_digest(cfg.data_path),
        "n_points": len(points),
    }
    report = MetricsReport(report_slices, meta)
    fmt = args.format
    wrote = []
    if fmt in ("json", "both"):
        emit_report(report, cfg.out_path, "json")
        wrote.append(cfg.out_path)
    if fmt in ("csv", "both"):
        csv_path = cfg.out_path.rsplit(".", 1)[0] + ".csv"
        emit_report(report, csv_path, "csv")
        wrote.append(csv_path)
    _echo(cfg)
    for name in SLICES:
        print(name, json.dumps(report_slices[name], sort_keys=True))
    print("reports:", ", ".join(wrote))
    return 0


def cmd_bench_throughput(args, cfg) -> int:
    backends = None
    if args.backend == "both":
        backends = ["numpy", "numba"]
    elif args.backend:
        backends = [args.backend]
    report = bench_throughput(cfg, backends)
    for backend_name, per_size in report["results"].items():
        for size in report["batch_sizes"]:
            row = per_size[str(size)]
            print(f"{backend_name:6s} B={size:5d}: "
                  f"{row['us_per_sample']:10.1f} us/sample "
                  f"({row['step_ms']:.1f} ms/step)")
        print(f"{backend_name:6s} speedup {report['speedup'][backend_name]:.2f}x "
              f"({report['batch_sizes'][0]} -> {report['batch_sizes'][-1]})")
    print("note:", report["caveat"])
    for warning in report["warnings"]:
        print("warning:", warning)
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
        print(f"wrote {cfg.out_path}")
    return 0


def cmd_bench_opbreakdown(args, cfg) -> int:
    report = bench_opbreakdown(cfg)
    for cls, row in report["op_profile"].items():
        print(f"{cls:8s} {row['pct']:6.2f}%  calls={row['calls']}")
    print(f"kernel classes: {report['kernel_pct']:.2f}% of instrumented "
          f"walltime at batch {report['batch_size']} ({report['backend']})")
    if cfg.out_path:
        with open(cfg.out_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
        print(f"wrote {cfg.out_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = _overrides(args)
        cfg = make_config(args.config, overrides)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "forecast":
            return cmd_forecast(args, cfg, overrides)
        if args.command == "evaluate":
            return cmd_evaluate(args, cfg, overrides)
        if args.command == "bench-throughput":
            return cmd_bench_throughput(args, cfg)
        if args.command == "bench-opbreakdown":
            return cmd_bench_opbreakdown(args, cfg)
        raise ConfigError(f"unknown command {args.command}")
    except LapcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
