"""Learnable building blocks: stacked LSTM, Gaussian head, MLP, embedding.

Everything is built from the dense kernels so the op-class walltime
accounting stays closed, and every forward has a matching hand-derived
backward (full BPTT for the LSTM stack). Gradients are verified against
central finite differences in the test suite.

Shapes follow the batch-rows convention: activations are (batch, dim),
weights are (in_dim, out_dim), biases are (1, out_dim). LSTM gate
columns are ordered input, forget, cell-candidate, output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .errors import DomainError, ShapeError

LOG_2PI = math.log(2.0 * math.pi)


def xavier_uniform(rng, fan_in, fan_out, shape):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# LSTM


@dataclass
class LstmLayerParams:
    W_x: np.ndarray  # (input_dim, 4*hidden)
    W_h: np.ndarray  # (hidden, 4*hidden)
    b: np.ndarray    # (1, 4*hidden)

    @property
    def hidden(self):
        return self.W_h.shape[0]

    @property
    def input_dim(self):
        return self.W_x.shape[0]


@dataclass
class LstmState:
    h: np.ndarray  # (batch, hidden)
    c: np.ndarray  # (batch, hidden)


def init_lstm_layer(rng, input_dim, hidden) -> LstmLayerParams:
    """Xavier-uniform weights; forget-gate bias starts at 1.0."""
    W_x = xavier_uniform(rng, input_dim, 4 * hidden, (input_dim, 4 * hidden))
    W_h = xavier_uniform(rng, hidden, 4 * hidden, (hidden, 4 * hidden))
    b = np.zeros((1, 4 * hidden))
    b[0, hidden:2 * hidden] = 1.0
    return LstmLayerParams(W_x, W_h, b)


def zero_state(batch, hidden) -> LstmState:
    return LstmState(np.zeros((batch, hidden)), np.zeros((batch, hidden)))


@dataclass
class LstmCellCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c_new: np.ndarray
    tanh_c: np.ndarray


def lstm_cell_forward(params: LstmLayerParams, x_t, state: LstmState):
    """One LSTM step: returns the new state and the backprop cache."""
    H = params.hidden
    if x_t.shape[1] != params.input_dim:
        raise ShapeError(
            f"lstm_cell_forward: input dim {x_t.shape[1]} != {params.input_dim}")
    if state.h.shape != (x_t.shape[0], H):
        raise ShapeError(
            f"lstm_cell_forward: state shape {state.h.shape} does not match "
            f"batch {x_t.shape[0]}, hidden {H}")
    a = K.add(K.matmul(x_t, params.W_x), K.matmul(state.h, params.W_h))
    a = K.add_bias_rows(a, params.b)
    i_f = K.sigmoid(a[:, :2 * H])
    g = K.tanh(a[:, 2 * H:3 * H])
    o = K.sigmoid(a[:, 3 * H:])
    i = i_f[:, :H]
    f = i_f[:, H:]
    c_new = K.add(K.hadamard(f, state.c), K.hadamard(i, g))
    tanh_c = K.tanh(c_new)
    h_new = K.hadamard(o, tanh_c)
    cache = LstmCellCache(x_t, state.h, state.c, i, f, g, o, c_new, tanh_c)
    return LstmState(h_new, c_new), cache


def _cell_backward_core(cache: LstmCellCache, dh, dc_next):
    """Elementwise part of the cell backward.

    Returns the pre-activation gradient dA (batch, 4*hidden) and the
    gradient w.r.t. the incoming cell state.
    """
    do = K.hadamard(dh, cache.tanh_c)
    dtanh_c = K.hadamard(dh, cache.o)
    dc = K.add(dc_next, K.hadamard(dtanh_c, K.tanh_grad(cache.tanh_c)))
    di = K.hadamard(dc, cache.g)
    df = K.hadamard(dc, cache.c_prev)
    dg = K.hadamard(dc, cache.i)
    dc_prev = K.hadamard(dc, cache.f)
    B = dh.shape[0]
    H = dh.shape[1]
    dA = np.empty((B, 4 * H))
    K.hadamard(di, K.sigmoid_grad(cache.i), out=dA[:, :H])
    K.hadamard(df, K.sigmoid_grad(cache.f), out=dA[:, H:2 * H])
    K.hadamard(dg, K.tanh_grad(cache.g), out=dA[:, 2 * H:3 * H])
    K.hadamard(do, K.sigmoid_grad(cache.o), out=dA[:, 3 * H:])
    return dA, dc_prev


def lstm_cell_backward(params: LstmLayerParams, cache: LstmCellCache, dh,
                       dc_next=None):
    """Gradients of one step given dL/dh_new (and optional dL/dc_new)."""
    if dc_next is None:
        dc_next = np.zeros_like(dh)
    dA, dc_prev = _cell_backward_core(cache, dh, dc_next)
    dx = K.matmul(dA, np.ascontiguousarray(params.W_x.T))
    dh_prev = K.matmul(dA, np.ascontiguousarray(params.W_h.T))
    dW_x = K.matmul(np.ascontiguousarray(cache.x.T), dA)
    dW_h = K.matmul(np.ascontiguousarray(cache.h_prev.T), dA)
    db = K.col_sum(dA)
    return dx, dh_prev, dc_prev, {"W_x": dW_x, "W_h": dW_h, "b": db}


def lstm_stack_forward(layers, x_seq, init_states=None):
    """Run a layer stack over a sequence.

    x_seq is a list of (batch, input_dim) matrices, one per step. Layer
    l consumes layer l-1's hidden sequence. Returns the top layer's
    hidden sequence and the caches needed for BPTT.
    """
    if len(x_seq) < 1:
        raise ShapeError("lstm_stack_forward: empty sequence")
    batch = x_seq[0].shape[0]
    if init_states is None:
        init_states = [zero_state(batch, layer.hidden) for layer in layers]
    caches = [[] for _ in layers]
    states = list(init_states)
    seq = x_seq
    for li, layer in enumerate(layers):
        out_seq = []
        state = states[li]
        for x_t in seq:
            state, cache = lstm_cell_forward(layer, x_t, state)
            caches[li].append(cache)
            out_seq.append(state.h)
        states[li] = state
        seq = out_seq
    return seq, caches, states


def lstm_stack_backward(layers, caches, dh_top_seq):
    """Full BPTT through the stack.

    dh_top_seq holds dL/dh for the top layer at every step (zeros where
    the loss does not touch a step). Returns per-layer parameter
    gradients and the gradient w.r.t. the input sequence.
    """
    T = len(dh_top_seq)
    grads = []
    dh_inject = dh_top_seq
    for li in range(len(layers) - 1, -1, -1):
        layer = layers[li]
        W_xT = np.ascontiguousarray(layer.W_x.T)
        W_hT = np.ascontiguousarray(layer.W_h.T)
        dW_x = np.zeros_like(layer.W_x)
        dW_h = np.zeros_like(layer.W_h)
        db = np.zeros_like(layer.b)
        batch = dh_inject[0].shape[0]
        dh_next = np.zeros((batch, layer.hidden))
        dc_next = np.zeros((batch, layer.hidden))
        dx_seq = [None] * T
        for t in range(T - 1, -1, -1):
            cache = caches[li][t]
            dh = K.add(dh_inject[t], dh_next)
            dA, dc_next = _cell_backward_core(cache, dh, dc_next)
            dh_next = K.matmul(dA, W_hT)
            dx_seq[t] = K.matmul(dA, W_xT)
            np.add(dW_x, K.matmul(np.ascontiguousarray(cache.x.T), dA), out=dW_x)
            np.add(dW_h, K.matmul(np.ascontiguousarray(cache.h_prev.T), dA), out=dW_h)
            np.add(db, K.col_sum(dA), out=db)
        grads.append({"W_x": dW_x, "W_h": dW_h, "b": db})
        dh_inject = dx_seq
    grads.reverse()
    return grads, dh_inject


# ---------------------------------------------------------------------------
# Gaussian output head


@dataclass
class GaussianHeadParams:
    W_mu: np.ndarray     # (hidden, 1)
    b_mu: np.ndarray     # (1, 1)
    W_sigma: np.ndarray  # (hidden, 1)
    b_sigma: np.ndarray  # (1, 1)


def init_gaussian_head(rng, hidden) -> GaussianHeadParams:
    return GaussianHeadParams(
        W_mu=xavier_uniform(rng, hidden, 1, (hidden, 1)),
        b_mu=np.zeros((1, 1)),
        W_sigma=xavier_uniform(rng, hidden, 1, (hidden, 1)),
        b_sigma=np.zeros((1, 1)),
    )


@dataclass
class GaussianHeadCache:
    h: np.ndarray
    sig_a: np.ndarray  # sigmoid of the sigma pre-activation (softplus')


def gaussian_head(head: GaussianHeadParams, h):
    """mu affine in h; sigma through softplus, so sigma > 0 always."""
    mu = K.add_bias_rows(K.matmul(h, head.W_mu), head.b_mu)
    a_sigma = K.add_bias_rows(K.matmul(h, head.W_sigma), head.b_sigma)
    sigma = K.softplus(a_sigma)
    cache = GaussianHeadCache(h, K.sigmoid(a_sigma))
    return mu, sigma, cache


def gaussian_head_backward(head: GaussianHeadParams, cache, dmu, dsigma):
    da_sigma = K.hadamard(dsigma, cache.sig_a)
    hT = np.ascontiguousarray(cache.h.T)
    grads = {
        "W_mu": K.matmul(hT, dmu),
        "b_mu": K.col_sum(dmu),
        "W_sigma": K.matmul(hT, da_sigma),
        "b_sigma": K.col_sum(da_sigma),
    }
    dh = K.add(
        K.matmul(dmu, np.ascontiguousarray(head.W_mu.T)),
        K.matmul(da_sigma, np.ascontiguousarray(head.W_sigma.T)),
    )
    return dh, grads


# ---------------------------------------------------------------------------
# Gaussian negative log-likelihood


def _nll_validate(z, mu, sigma, weights):
    if z.shape != mu.shape or mu.shape != sigma.shape:
        raise ShapeError(
            f"gaussian_nll: z {z.shape}, mu {mu.shape}, sigma {sigma.shape} differ")
    if weights is not None and weights.shape != z.shape:
        raise ShapeError(
            f"gaussian_nll: weights {weights.shape} != z {z.shape}")
    if np.any(sigma <= 0.0):
        raise DomainError("gaussian_nll: sigma must be strictly positive")


def gaussian_nll(z, mu, sigma, weights=None):
    """Weighted sum of 0.5*ln(2*pi) + ln(sigma) + (z-mu)^2 / (2*sigma^2)."""
    _nll_validate(z, mu, sigma, weights)
    resid = z - mu
    terms = 0.5 * LOG_2PI + np.log(sigma) + resid * resid / (2.0 * sigma * sigma)
    if weights is not None:
        terms = terms * weights
    return float(np.sum(terms))


def gaussian_nll_grad(z, mu, sigma, weights=None):
    """d(nll)/dmu and d(nll)/dsigma, with the same weighting."""
    _nll_validate(z, mu, sigma, weights)
    resid = mu - z
    var = sigma * sigma
    dmu = resid / var
    dsigma = 1.0 / sigma - (resid * resid) / (var * sigma)
    if weights is not None:
        dmu = dmu * weights
        dsigma = dsigma * weights
    return dmu, dsigma


# ---------------------------------------------------------------------------
# MLP with Gaussian head


@dataclass
class MlpParams:
    weights: list   # per hidden layer: (in, out)
    biases: list    # per hidden layer: (1, out)
    head: GaussianHeadParams

    @property
    def input_dim(self):
        return self.weights[0].shape[0]


def init_mlp(rng, input_dim, hidden_sizes=(10, 5, 5)) -> MlpParams:
    weights, biases = [], []
    fan_in = input_dim
    for size in hidden_sizes:
        weights.append(xavier_uniform(rng, fan_in, size, (fan_in, size)))
        biases.append(np.zeros((1, size)))
        fan_in = size
    return MlpParams(weights, biases, init_gaussian_head(rng, fan_in))


def mlp_forward(params: MlpParams, x):
    """tanh hidden layers, Gaussian head on the last one."""
    hs = []
    h = x
    for W, b in zip(params.weights, params.biases):
        h = K.tanh(K.add_bias_rows(K.matmul(h, W), b))
        hs.append(h)
    mu, sigma, head_cache = gaussian_head(params.head, h)
    return mu, sigma, (x, hs, head_cache)


def mlp_backward(params: MlpParams, cache, dmu, dsigma):
    x, hs, head_cache = cache
    dh, head_grads = gaussian_head_backward(params.head, head_cache, dmu, dsigma)
    grads = {f"head.{k}": v for k, v in head_grads.items()}
    for li in range(len(params.weights) - 1, -1, -1):
        da = K.hadamard(dh, K.tanh_grad(hs[li]))
        below = hs[li - 1] if li > 0 else x
        grads[f"layer{li}.W"] = K.matmul(np.ascontiguousarray(below.T), da)
        grads[f"layer{li}.b"] = K.col_sum(da)
        dh = K.matmul(da, np.ascontiguousarray(params.weights[li].T))
    return dh, grads


def mlp_params_dict(params: MlpParams):
    out = {}
    for li, (W, b) in enumerate(zip(params.weights, params.biases)):
        out[f"layer{li}.W"] = W
        out[f"layer{li}.b"] = b
    out["head.W_mu"] = params.head.W_mu
    out["head.b_mu"] = params.head.b_mu
    out["head.W_sigma"] = params.head.W_sigma
    out["head.b_sigma"] = params.head.b_sigma
    return out


# ---------------------------------------------------------------------------
# Embedding


@dataclass
class EmbeddingTable:
    table: np.ndarray  # (num_ids, dim)

    @property
    def num_ids(self):
        return self.table.shape[0]

    @property
    def dim(self):
        return self.table.shape[1]


def init_embedding(rng, num_ids, dim) -> EmbeddingTable:
    return EmbeddingTable(xavier_uniform(rng, num_ids, dim, (num_ids, dim)))


def embedding_lookup(emb: EmbeddingTable, ids):
    ids = np.asarray(ids)
    if ids.size and int(ids.max()) >= emb.num_ids:
        raise ShapeError(
            f"embedding_lookup: id {int(ids.max())} >= table size {emb.num_ids}")
    return emb.table[ids]


def embedding_grad(emb: EmbeddingTable, ids, dout):
    """Scatter-add gradients into the rows that were looked up."""
    dtable = np.zeros_like(emb.table)
    np.add.at(dtable, np.asarray(ids), dout)
    return dtable


def parameter_count(params_dict) -> int:
    return int(sum(a.size for a in params_dict.values()))
