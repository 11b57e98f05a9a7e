"""Checkpoint persistence: bit-exact JSON round-trip of a trained bundle.

Floats are serialized through Python's repr (shortest round-trippable
form), so load(save(m)) reproduces forecasts bit-identically.
"""

from __future__ import annotations

import json

import numpy as np

from . import nn
from .config import RunConfig
from .errors import CheckpointError, SchemaVersionError
from .pit_model import PitModel
from .rank_model import RankModelParams, params_dict
from .training import TrainedBundle
from .windows import Scaler

SCHEMA_VERSION = 1


def _pack_params(params: dict) -> dict:
    return {name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in params.items()}


def _unpack_array(name, spec) -> np.ndarray:
    try:
        arr = np.array(spec["data"], dtype=np.float64).reshape(spec["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"parameter {name!r} is malformed: {exc}") from None
    return arr


def save_checkpoint(bundle: TrainedBundle, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": bundle.config_echo(),
        "scaler": {"means": bundle.scaler.means, "stds": bundle.scaler.stds},
        "layout": list(bundle.layout),
        "car_ids": [int(c) for c in bundle.model.car_ids],
        "params": _pack_params(params_dict(bundle.model)),
        "pit_model": None,
        "history": bundle.history,
    }
    if bundle.pit is not None:
        doc["pit_model"] = {
            "target_mean": bundle.pit.target_mean,
            "target_std": bundle.pit.target_std,
            "hidden_sizes": [w.shape[1] for w in bundle.pit.mlp.weights],
            "params": _pack_params(nn.mlp_params_dict(bundle.pit.mlp)),
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _rebuild_model(doc) -> RankModelParams:
    packed = doc["params"]
    car_ids = [int(c) for c in doc["car_ids"]]
    embedding = nn.EmbeddingTable(_unpack_array("embedding", packed["embedding"]))
    layers = []
    li = 0
    while f"lstm{li}.W_x" in packed:
        layers.append(nn.LstmLayerParams(
            _unpack_array(f"lstm{li}.W_x", packed[f"lstm{li}.W_x"]),
            _unpack_array(f"lstm{li}.W_h", packed[f"lstm{li}.W_h"]),
            _unpack_array(f"lstm{li}.b", packed[f"lstm{li}.b"])))
        li += 1
    if not layers:
        raise CheckpointError("checkpoint holds no recurrent layers")
    head = nn.GaussianHeadParams(
        _unpack_array("head.W_mu", packed["head.W_mu"]),
        _unpack_array("head.b_mu", packed["head.b_mu"]),
        _unpack_array("head.W_sigma", packed["head.W_sigma"]),
        _unpack_array("head.b_sigma", packed["head.b_sigma"]))
    if embedding.num_ids != len(car_ids):
        raise CheckpointError(
            f"embedding rows {embedding.num_ids} != car count {len(car_ids)}")
    return RankModelParams(embedding, layers, head, car_ids)


def _rebuild_pit(spec) -> PitModel:
    packed = spec["params"]
    weights, biases = [], []
    li = 0
    while f"layer{li}.W" in packed:
        weights.append(_unpack_array(f"layer{li}.W", packed[f"layer{li}.W"]))
        biases.append(_unpack_array(f"layer{li}.b", packed[f"layer{li}.b"]))
        li += 1
    head = nn.GaussianHeadParams(
        _unpack_array("head.W_mu", packed["head.W_mu"]),
        _unpack_array("head.b_mu", packed["head.b_mu"]),
        _unpack_array("head.W_sigma", packed["head.W_sigma"]),
        _unpack_array("head.b_sigma", packed["head.b_sigma"]))
    return PitModel(nn.MlpParams(weights, biases, head),
                    float(spec["target_mean"]), float(spec["target_std"]))


def load_checkpoint(path) -> TrainedBundle:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise CheckpointError(f"{path} is not a checkpoint file")
    version = doc["schema_version"]
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"checkpoint schema {version} needs migration; this build "
            f"supports {SCHEMA_VERSION}")
    try:
        cfg_fields = {k: v for k, v in doc["config"].items()
                      if k != "config_hash"}
        cfg = RunConfig(**cfg_fields).validate()
        scaler = Scaler(means=dict(doc["scaler"]["means"]),
                        stds=dict(doc["scaler"]["stds"]))
        layout = tuple(doc["layout"])
        model = _rebuild_model(doc)
        pit = _rebuild_pit(doc["pit_model"]) if doc.get("pit_model") else None
        history = list(doc.get("history", []))
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint {path} is missing fields: {exc!r}") \
            from None
    return TrainedBundle(model, pit, scaler, layout, cfg, history)
