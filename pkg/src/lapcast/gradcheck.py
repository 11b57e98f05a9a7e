"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: int
    entries_checked: int
    per_param: dict = field(default_factory=dict)

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def finite_diff_check(params: dict, loss_fn, grads: dict, eps: float = 1e-5,
                      max_entries: int = 2000, seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients against (f(x+eps) - f(x-eps)) / 2 eps.

    ``loss_fn`` is a zero-argument closure that recomputes the loss from
    the (mutated in place) parameter arrays, so the check exercises the
    exact forward the gradients claim to differentiate. Above
    ``max_entries`` total parameters, a seeded random subset of entries
    is checked instead of every one.
    """
    entries = [(name, idx) for name, arr in sorted(params.items())
               for idx in range(arr.size)]
    if len(entries) > max_entries:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(entries), size=max_entries, replace=False)
        entries = [entries[int(p)] for p in picks]

    worst = -1.0
    worst_param = ""
    worst_index = -1
    per_param: dict = {}
    for name, idx in entries:
        arr = params[name]
        flat = arr.reshape(-1)
        original = flat[idx]
        flat[idx] = original + eps
        f_plus = loss_fn()
        flat[idx] = original - eps
        f_minus = loss_fn()
        flat[idx] = original
        numeric = (f_plus - f_minus) / (2.0 * eps)
        analytic = grads[name].reshape(-1)[idx]
        err = relative_error(analytic, numeric)
        per_param[name] = max(per_param.get(name, 0.0), err)
        if err > worst:
            worst, worst_param, worst_index = err, name, idx
    return GradCheckReport(worst, worst_param, worst_index, len(entries), per_param)
