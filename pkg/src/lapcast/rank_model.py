"""The rank sequence model: embedding + stacked LSTM + Gaussian head.

Training forward runs teacher-forced over all C+k steps of a window
batch with the weighted Gaussian NLL on the k decoder steps; backward is
full BPTT through the stack, the head, and the embedding rows touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ShapeError


@dataclass
class RankModelParams:
    embedding: nn.EmbeddingTable
    layers: list
    head: nn.GaussianHeadParams
    car_ids: list  # car_id in embedding-row order

    @property
    def hidden(self):
        return self.layers[-1].hidden

    def car_to_row(self) -> dict:
        return {cid: i for i, cid in enumerate(self.car_ids)}


def init_rank_model(rng, n_features, car_ids, hidden=40, layers=2,
                    embedding_dim=4) -> RankModelParams:
    input_dim = n_features + embedding_dim
    stack = []
    for li in range(layers):
        stack.append(nn.init_lstm_layer(rng, input_dim if li == 0 else hidden,
                                        hidden))
    return RankModelParams(
        embedding=nn.init_embedding(rng, len(car_ids), embedding_dim),
        layers=stack,
        head=nn.init_gaussian_head(rng, hidden),
        car_ids=list(car_ids),
    )


def params_dict(model: RankModelParams) -> dict:
    out = {"embedding": model.embedding.table}
    for li, layer in enumerate(model.layers):
        out[f"lstm{li}.W_x"] = layer.W_x
        out[f"lstm{li}.W_h"] = layer.W_h
        out[f"lstm{li}.b"] = layer.b
    out["head.W_mu"] = model.head.W_mu
    out["head.b_mu"] = model.head.b_mu
    out["head.W_sigma"] = model.head.W_sigma
    out["head.b_sigma"] = model.head.b_sigma
    return out


def parameter_count(model: RankModelParams) -> int:
    return nn.parameter_count(params_dict(model))


def clone_params(model: RankModelParams) -> RankModelParams:
    return RankModelParams(
        embedding=nn.EmbeddingTable(model.embedding.table.copy()),
        layers=[nn.LstmLayerParams(l.W_x.copy(), l.W_h.copy(), l.b.copy())
                for l in model.layers],
        head=nn.GaussianHeadParams(model.head.W_mu.copy(), model.head.b_mu.copy(),
                                   model.head.W_sigma.copy(),
                                   model.head.b_sigma.copy()),
        car_ids=list(model.car_ids),
    )


def _input_seq(model, X, car_rows):
    """Per-step (batch, features+embedding) inputs."""
    B, T, F = X.shape
    emb = nn.embedding_lookup(model.embedding, car_rows)
    return [np.ascontiguousarray(np.concatenate([X[:, t, :], emb], axis=1))
            for t in range(T)]


def forward_batch(model: RankModelParams, X, Z, W, car_rows, C, k):
    """Weighted decoder NLL for one teacher-forced batch.

    Returns (nll_sum, n_terms, cache); the training loss is
    nll_sum / n_terms.
    """
    B, T, F = X.shape
    if T != C + k:
        raise ShapeError(f"forward_batch: window length {T} != C+k = {C + k}")
    x_seq = _input_seq(model, X, car_rows)
    h_top, caches, _ = nn.lstm_stack_forward(model.layers, x_seq)
    h_dec = np.concatenate(h_top[C:], axis=0)           # (k*B, hidden)
    mu, sigma, head_cache = nn.gaussian_head(model.head, h_dec)
    z_dec = np.concatenate([Z[:, C + j] for j in range(k)]).reshape(-1, 1)
    w_dec = np.concatenate([W[:, j] for j in range(k)]).reshape(-1, 1)
    nll = nn.gaussian_nll(z_dec, mu, sigma, w_dec)
    cache = {
        "x_seq": x_seq, "caches": caches, "head_cache": head_cache,
        "mu": mu, "sigma": sigma, "z_dec": z_dec, "w_dec": w_dec,
        "B": B, "C": C, "k": k, "F": F, "car_rows": car_rows,
    }
    return nll, B * k, cache


def backward_batch(model: RankModelParams, cache) -> dict:
    """Gradients of nll_sum / n_terms for every parameter array."""
    B, C, k, F = cache["B"], cache["C"], cache["k"], cache["F"]
    norm = 1.0 / (B * k)
    dmu, dsigma = nn.gaussian_nll_grad(cache["z_dec"], cache["mu"],
                                       cache["sigma"], cache["w_dec"])
    dmu *= norm
    dsigma *= norm
    dh_dec, head_grads = nn.gaussian_head_backward(model.head,
                                                   cache["head_cache"],
                                                   dmu, dsigma)
    T = C + k
    hidden = model.hidden
    zero = np.zeros((B, hidden))
    dh_top = [zero] * C + [np.ascontiguousarray(dh_dec[j * B:(j + 1) * B])
                           for j in range(k)]
    layer_grads, dx_seq = nn.lstm_stack_backward(model.layers,
                                                 cache["caches"], dh_top)
    demb_steps = sum(dx[:, F:] for dx in dx_seq)
    demb = nn.embedding_grad(model.embedding, cache["car_rows"], demb_steps)

    grads = {"embedding": demb}
    for li, g in enumerate(layer_grads):
        grads[f"lstm{li}.W_x"] = g["W_x"]
        grads[f"lstm{li}.W_h"] = g["W_h"]
        grads[f"lstm{li}.b"] = g["b"]
    for name, g in head_grads.items():
        grads[f"head.{name}"] = g
    return grads


def encode(model: RankModelParams, X, car_rows):
    """Run the stack over observed history; returns final per-layer states."""
    x_seq = _input_seq(model, X, car_rows)
    _, _, states = nn.lstm_stack_forward(model.layers, x_seq)
    return states


def decode_step(model: RankModelParams, x_t, states):
    """One forecasting step: advance every layer and emit (mu, sigma)."""
    inp = x_t
    new_states = []
    for layer, state in zip(model.layers, states):
        state, _ = nn.lstm_cell_forward(layer, inp, state)
        new_states.append(state)
        inp = state.h
    mu, sigma, _ = nn.gaussian_head(model.head, inp)
    return new_states, mu, sigma


def copy_states(states):
    return [nn.LstmState(s.h.copy(), s.c.copy()) for s in states]
