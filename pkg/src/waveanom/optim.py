"""Parameter update rules: SGD with momentum, Adam, RMSProp.

Updates are deterministic: the same seed, parameters and gradient stream
give bit-identical trajectories. Weight decay enters as an L2 gradient term
g + l2 * p for every rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .tensor import Tensor

RULES = ("sgd_momentum", "adam", "rmsprop")


@dataclass
class OptimizerState:
    """One update rule plus its per-parameter moment buffers."""

    rule: str = "sgd_momentum"
    learning_rate: float = 0.005
    momentum: float = 0.6
    l2: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rho: float = 0.9
    step_count: int = 0
    slots: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"unknown optimizer rule {self.rule!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")

    def step(self, params: list[Tensor]):
        """Apply one update in place; params[i].grad must be populated."""
        self.step_count += 1
        for i, p in enumerate(params):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise NumericalError(
                    f"non-finite gradient for parameter {i} at step {self.step_count}")
            g = g + self.l2 * p.data
            if self.rule == "sgd_momentum":
                v = self.slots.setdefault(i, np.zeros_like(p.data))
                v *= self.momentum
                v -= self.learning_rate * g
                p.data = p.data + v
            elif self.rule == "adam":
                if i not in self.slots:
                    self.slots[i] = (np.zeros_like(p.data), np.zeros_like(p.data))
                m, v = self.slots[i]
                m += (1 - self.beta1) * (g - m)
                v += (1 - self.beta2) * (g * g - v)
                mhat = m / (1 - self.beta1 ** self.step_count)
                vhat = v / (1 - self.beta2 ** self.step_count)
                p.data = p.data - self.learning_rate * mhat / (np.sqrt(vhat) + self.eps)
            else:  # rmsprop
                s = self.slots.setdefault(i, np.zeros_like(p.data))
                s += (1 - self.rho) * (g * g - s)
                p.data = p.data - self.learning_rate * g / (np.sqrt(s) + self.eps)


def optimizer_step(state: OptimizerState, params: list[Tensor], grads: list[np.ndarray]):
    """Functional form: assign grads, update, return the params."""
    for p, g in zip(params, grads):
        p.grad = np.asarray(g, dtype=np.float64)
    state.step(params)
    return params
