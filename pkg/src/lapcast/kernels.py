"""Validated, profiled dense kernels — the substrate everything computes on.

A "matrix" here is a 2-D float64 numpy array (row-major by default). The
public functions validate shapes, attribute walltime to their op class
when profiling is on, and dispatch elementwise work to the active
backend lane (see :mod:`lapcast.backend`). Matrix multiplication uses
numpy's BLAS in both lanes; a hand loop cannot beat dgemm, so the lanes
only diverge on elementwise ops.

``out`` buffers must not alias input operands.
"""

from __future__ import annotations

from time import perf_counter_ns

import numpy as np

from . import _kernels_numpy as _np_impl
from . import backend, profiling
from .errors import ShapeError

_numba_impl = None


def _impl():
    global _numba_impl
    if backend.get_backend() == "numpy":
        return _np_impl
    if _numba_impl is None:
        from . import _kernels_numba

        _numba_impl = _kernels_numba
    return _numba_impl


def _check(x, name):
    if not isinstance(x, np.ndarray) or x.ndim != 2 or x.dtype != np.float64:
        raise ShapeError(f"{name}: expected a 2-D float64 array, got "
                         f"{type(x).__name__}"
                         + (f" with shape {x.shape}, dtype {x.dtype}"
                            if isinstance(x, np.ndarray) else ""))
    return x


def _out_for(shape, out):
    if out is None:
        return np.empty(shape)
    if out.shape != shape:
        raise ShapeError(f"out: expected shape {shape}, got {out.shape}")
    return out


def matmul(a, b, out=None):
    """c[i,j] = sum_p a[i,p] * b[p,j]; BLAS-backed in both lanes."""
    _check(a, "a")
    _check(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} x {b.shape}")
    out = _out_for((a.shape[0], b.shape[1]), out)
    if profiling._enabled:
        t0 = perf_counter_ns()
        np.matmul(a, b, out=out)
        profiling.record(profiling.MATMUL, perf_counter_ns() - t0)
        return out
    return np.matmul(a, b, out=out)


def _binary(name, op_class, a, b, out):
    _check(a, "a")
    _check(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shape mismatch {a.shape} vs {b.shape}")
    out = _out_for(a.shape, out)
    fn = getattr(_impl(), name)
    if profiling._enabled:
        t0 = perf_counter_ns()
        fn(a, b, out)
        profiling.record(op_class, perf_counter_ns() - t0)
        return out
    return fn(a, b, out)


def _unary(name, op_class, a, out):
    _check(a, "x")
    out = _out_for(a.shape, out)
    fn = getattr(_impl(), name)
    if profiling._enabled:
        t0 = perf_counter_ns()
        fn(a, out)
        profiling.record(op_class, perf_counter_ns() - t0)
        return out
    return fn(a, out)


def add(a, b, out=None):
    return _binary("add", profiling.ADD, a, b, out)


def sub(a, b, out=None):
    return _binary("sub", profiling.ADD, a, b, out)


def hadamard(a, b, out=None):
    return _binary("hadamard", profiling.MUL, a, b, out)


def scale(a, s, out=None):
    _check(a, "a")
    out = _out_for(a.shape, out)
    fn = _impl().scale
    s = float(s)
    if profiling._enabled:
        t0 = perf_counter_ns()
        fn(a, s, out)
        profiling.record(profiling.MUL, perf_counter_ns() - t0)
        return out
    return fn(a, s, out)


def add_bias_rows(a, bias, out=None):
    """Broadcast-add a (1 x n) bias row to every row of a (m x n) matrix."""
    _check(a, "a")
    _check(bias, "bias")
    if bias.shape != (1, a.shape[1]):
        raise ShapeError(
            f"add_bias_rows: bias must be (1, {a.shape[1]}), got {bias.shape}")
    out = _out_for(a.shape, out)
    fn = _impl().add_bias_rows
    if profiling._enabled:
        t0 = perf_counter_ns()
        fn(a, bias, out)
        profiling.record(profiling.ADD, perf_counter_ns() - t0)
        return out
    return fn(a, bias, out)


def sigmoid(x, out=None):
    """Elementwise 1 / (1 + exp(-x))."""
    return _unary("sigmoid", profiling.SIGMOID, x, out)


def sigmoid_grad(s, out=None):
    """s * (1 - s), taking the already-activated sigmoid output."""
    return _unary("sigmoid_grad", profiling.SIGMOID, s, out)


def tanh(x, out=None):
    return _unary("tanh", profiling.TANH, x, out)


def tanh_grad(t, out=None):
    """1 - t^2, taking the already-activated tanh output."""
    return _unary("tanh_grad", profiling.TANH, t, out)


def softplus(x, out=None):
    """Elementwise ln(1 + exp(x)) in the overflow-safe branch form."""
    return _unary("softplus", profiling.SIGMOID, x, out)


def col_sum(a, out=None):
    """Column sums as a (1 x n) row (bias gradients)."""
    _check(a, "a")
    out = _out_for((1, a.shape[1]), out)
    fn = _impl().col_sum
    if profiling._enabled:
        t0 = perf_counter_ns()
        fn(a, out)
        profiling.record(profiling.ADD, perf_counter_ns() - t0)
        return out
    return fn(a, out)
