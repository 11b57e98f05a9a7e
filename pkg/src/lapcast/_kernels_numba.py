"""Numba-compiled elementwise kernels (default lane).

Serial @njit loops over 2-D operands of any stride layout; each call
writes into a caller-provided ``out``. Single-pass bodies avoid the
temporaries the numpy lane materializes, which is where this lane wins.
Compilation is cached on disk so only the first process pays for it.
"""

from __future__ import annotations

import math

from numba import njit

_JIT = dict(cache=True, fastmath=False, nogil=True)


@njit(**_JIT)
def add(a, b, out):
    m, n = a.shape
    for i in range(m):
        for j in range(n):
            out[i, j] = a[i, j] + b[i, j]
    return out


@njit(**_JIT)
def sub(a, b, out):
    m, n = a.shape
    for i in range(m):
        for j in range(n):
            out[i, j] = a[i, j] - b[i, j]
    return out


@njit(**_JIT)
def hadamard(a, b, out):
    m, n = a.shape
    for i in range(m):
        for j in range(n):
            out[i, j] = a[i, j] * b[i, j]
    return out


@njit(**_JIT)
def scale(a, s, out):
    m, n = a.shape
    for i in range(m):
        for j in range(n):
            out[i, j] = a[i, j] * s
    return out


@njit(**_JIT)
def add_bias_rows(a, bias, out):
    m, n = a.shape
    for i in range(m):
        for j in range(n):
            out[i, j] = a[i, j] + bias[0, j]
    return out


@njit(**_JIT)
def sigmoid(a, out):
    m, n = a.shape
    for i in range(m):
        for j in range(n):
            x = a[i, j]
            if x >= 0.0:
                t = math.exp(-x)
                out[i, j] = 1.0 / (1.0 + t)
            else:
                t = math.exp(x)
                out[i, j] = t / (1.0 + t)
    return out


@njit(**_JIT)
def sigmoid_grad(s, out):
    m, n = s.shape
    for i in range(m):
        for j in range(n):
            v = s[i, j]
            out[i, j] = v - v * v
    return out


@njit(**_JIT)
def tanh(a, out):
    m, n = a.shape
    for i in range(m):
        for j in range(n):
            out[i, j] = math.tanh(a[i, j])
    return out


@njit(**_JIT)
def tanh_grad(t, out):
    m, n = t.shape
    for i in range(m):
        for j in range(n):
            v = t[i, j]
            out[i, j] = 1.0 - v * v
    return out


@njit(**_JIT)
def softplus(a, out):
    m, n = a.shape
    for i in range(m):
        for j in range(n):
            x = a[i, j]
            out[i, j] = max(x, 0.0) + math.log1p(math.exp(-abs(x)))
    return out


@njit(**_JIT)
def col_sum(a, out):
    m, n = a.shape
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += a[i, j]
        out[0, j] = acc
    return out
