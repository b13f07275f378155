"""Bias-corrected Adam over a named parameter set."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from hmtl.autodiff.tensor import Tensor
from hmtl.errors import DimensionError, NumericError


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping, grads: Mapping[str, np.ndarray], state: AdamState) -> AdamState:
    """Update ``params`` (name -> Tensor or ndarray) in place from ``grads``.

    ``weight_decay`` is classic L2: it is added to the gradient before the
    moment updates. Missing moment buffers are created as zeros.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        data = p.data if isinstance(p, Tensor) else p
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != data.shape:
            raise DimensionError(f"gradient for {name!r} has shape {g.shape}, parameter {data.shape}")
        if state.weight_decay:
            g = g + state.weight_decay * data
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(data)
            state.v[name] = np.zeros_like(data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return state
