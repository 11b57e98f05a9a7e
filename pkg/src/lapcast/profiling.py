"""Per-op-class walltime accounting for the dense kernels.

Every kernel call is attributed to one of five op classes (MatMul, Mul,
Add, Sigmoid, Tanh); everything that is not a kernel (batch assembly,
Python glue, the optimizer) lands in Other. Training code brackets each
step with ``step_scope`` so the report can express each class as a share
of total instrumented walltime; Other picks up the residual.

Accumulation is per-thread on monotonic clocks and merged at report
time, so instrumentation never serializes compute. When profiling is
disabled every hook is a single branch.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from time import perf_counter_ns

MATMUL = "MatMul"
MUL = "Mul"
ADD = "Add"
SIGMOID = "Sigmoid"
TANH = "Tanh"
OTHER = "Other"

KERNEL_CLASSES = (MATMUL, MUL, ADD, SIGMOID, TANH)
ALL_CLASSES = KERNEL_CLASSES + (OTHER,)

_TOTAL = "_total"

_enabled = False
_registry_lock = threading.Lock()
_registry: list[dict] = []
_local = threading.local()


def _accumulators() -> dict:
    acc = getattr(_local, "acc", None)
    if acc is None:
        acc = {cls: [0, 0] for cls in ALL_CLASSES + (_TOTAL,)}
        _local.acc = acc
        with _registry_lock:
            _registry.append(acc)
    return acc


def enable() -> None:
    global _enabled
    _enabled = True


def disable() -> None:
    global _enabled
    _enabled = False


def is_enabled() -> bool:
    return _enabled


def reset() -> None:
    with _registry_lock:
        for acc in _registry:
            for cell in acc.values():
                cell[0] = 0
                cell[1] = 0


def record(op_class: str, elapsed_ns: int) -> None:
    cell = _accumulators()[op_class]
    cell[0] += elapsed_ns
    cell[1] += 1


@contextmanager
def profile_scope(op_class: str):
    """Attribute the wrapped region's walltime to ``op_class``."""
    if not _enabled:
        yield
        return
    t0 = perf_counter_ns()
    try:
        yield
    finally:
        record(op_class, perf_counter_ns() - t0)


@contextmanager
def step_scope():
    """Mark one full training step; its walltime defines 100%."""
    if not _enabled:
        yield
        return
    t0 = perf_counter_ns()
    try:
        yield
    finally:
        record(_TOTAL, perf_counter_ns() - t0)


def _merged() -> dict:
    merged = {cls: [0, 0] for cls in ALL_CLASSES + (_TOTAL,)}
    with _registry_lock:
        for acc in _registry:
            for cls, cell in acc.items():
                merged[cls][0] += cell[0]
                merged[cls][1] += cell[1]
    return merged


def report() -> dict:
    """Merge all threads into ``{op_class: {walltime_ns, calls, pct}}``.

    Other = explicitly tagged Other scopes plus the part of the stepped
    walltime not covered by any kernel class, so percentages always sum
    to 100.
    """
    merged = _merged()
    tagged_ns = sum(merged[cls][0] for cls in ALL_CLASSES)
    total_ns = max(merged[_TOTAL][0], tagged_ns)
    residual = total_ns - tagged_ns

    out = {}
    for cls in KERNEL_CLASSES:
        ns, calls = merged[cls]
        out[cls] = {
            "walltime_ns": ns,
            "calls": calls,
            "pct": 100.0 * ns / total_ns if total_ns else 0.0,
        }
    other_ns = merged[OTHER][0] + residual
    other_calls = merged[OTHER][1] + merged[_TOTAL][1]
    out[OTHER] = {
        "walltime_ns": other_ns,
        "calls": other_calls,
        "pct": 100.0 * other_ns / total_ns if total_ns else 0.0,
    }
    return out
