"""Compute-lane selection for the dense kernels.

Two lanes exist: "numba" (elementwise kernels compiled with @njit) and
"numpy" (plain vectorized numpy). Matrix multiplication goes through
numpy's BLAS in both lanes; the lanes differ only in the elementwise
kernels. The lane is picked at import time from the LAPCAST_BACKEND
environment variable and can be switched programmatically, which the
lane-comparison benchmark relies on.

Results are deterministic within a lane; across lanes the transcendental
kernels may differ in the last few ulps (numpy's SIMD libm vs numba's
scalar libm).
"""

from __future__ import annotations

import os
from contextlib import contextmanager

from .errors import ConfigError

ENV_VAR = "LAPCAST_BACKEND"
_VALID = ("numba", "numpy")

_backend = None  # resolved lazily so importing the package never compiles


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _resolve_default() -> str:
    env = os.environ.get(ENV_VAR, "").strip().lower()
    if env:
        if env not in _VALID:
            raise ConfigError(
                f"{ENV_VAR}={env!r}: expected one of {', '.join(_VALID)}"
            )
        if env == "numba" and not _numba_available():
            raise ConfigError(f"{ENV_VAR}=numba but numba is not importable")
        return env
    return "numba" if _numba_available() else "numpy"


def get_backend() -> str:
    global _backend
    if _backend is None:
        _backend = _resolve_default()
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in _VALID:
        raise ConfigError(f"unknown backend {name!r}: expected one of {', '.join(_VALID)}")
    if name == "numba" and not _numba_available():
        raise ConfigError("backend 'numba' requested but numba is not importable")
    _backend = name


@contextmanager
def use_backend(name: str):
    previous = get_backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
