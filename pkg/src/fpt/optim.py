"""Adam optimizer (bias-corrected, Kingma & Ba defaults)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_parameter(cls, param: Parameter, **hypers) -> "AdamState":
        return cls(m=np.zeros_like(param.value), v=np.zeros_like(param.value), **hypers)


def adam_step(param: Parameter, state: AdamState):
    """One in-place Adam update of param.value; increments state.step_count."""
    if state.lr < 0 or not (0 <= state.beta1 < 1) or not (0 <= state.beta2 < 1) or state.epsilon <= 0:
        raise ValueError("adam_step: invalid hyperparameters")
    g = param.grad
    if not np.all(np.isfinite(g)):
        raise ValueError(f"adam_step: non-finite gradient for parameter '{param.name}'")
    state.step_count += 1
    t = state.step_count
    dt = param.value.dtype.type
    b1, b2 = dt(state.beta1), dt(state.beta2)
    state.m = b1 * state.m + (dt(1) - b1) * g
    state.v = b2 * state.v + (dt(1) - b2) * (g * g)
    m_hat = state.m / (dt(1) - dt(state.beta1 ** t))
    v_hat = state.v / (dt(1) - dt(state.beta2 ** t))
    param.value -= dt(state.lr) * m_hat / (np.sqrt(v_hat) + dt(state.epsilon))
    return param, state


@dataclass
class Adam:
    """Per-parameter AdamState keyed by parameter name."""

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    states: dict = field(default_factory=dict)

    def step(self, parameters):
        for p in parameters:
            st = self.states.get(p.name)
            if st is None:
                st = AdamState.for_parameter(p, lr=self.lr, beta1=self.beta1,
                                             beta2=self.beta2, epsilon=self.epsilon)
                self.states[p.name] = st
            adam_step(p, st)
