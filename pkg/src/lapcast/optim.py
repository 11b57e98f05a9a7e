"""ADAM optimizer and the plateau learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """Standard bias-corrected ADAM update, applied in place."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(
                f"adam_step: grad {name} shape {g.shape} != param {theta.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        theta -= state.lr * update


@dataclass
class PlateauLr:
    """Halve the learning rate after `patience` non-improving epochs;
    signal stop once the rate decays below `floor`."""

    lr: float = 1e-3
    factor: float = 0.5
    patience: int = 10
    floor: float = 1e-6
    best: float = float("inf")
    bad_epochs: int = 0

    def observe(self, loss: float) -> tuple[float, bool]:
        """Feed one epoch's validation loss; returns (lr, should_stop)."""
        if loss < self.best:
            self.best = loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
        return self.lr, self.lr < self.floor
