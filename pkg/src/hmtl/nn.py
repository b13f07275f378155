"""Parameter initialisation and small layer helpers."""

from __future__ import annotations

import numpy as np

from hmtl.autodiff import Tensor, dropout, elementwise_map, linear


def uniform_param(rng: np.random.Generator, shape, fan_in: int, name: str) -> Tensor:
    """Leaf parameter drawn from ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, shape), requires_grad=True, name=name)


def init_mlp(rng, params: dict, prefix: str, widths) -> None:
    """Dense stack ``widths[0] -> widths[1] -> ... -> widths[-1]``."""
    for k, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:])):
        params[f"{prefix}.{k}.W"] = uniform_param(rng, (n_in, n_out), n_in, f"{prefix}.{k}.W")
        params[f"{prefix}.{k}.b"] = uniform_param(rng, (n_out,), n_in, f"{prefix}.{k}.b")


def mlp(x, params: dict, prefix: str, n_layers: int, hidden: str = "tanh", out: str | None = None):
    """Apply a dense stack: ``hidden`` between layers, ``out`` (or nothing) at the end."""
    h = x
    for k in range(n_layers):
        h = linear(h, params[f"{prefix}.{k}.W"], params[f"{prefix}.{k}.b"])
        if k < n_layers - 1:
            h = elementwise_map(h, hidden)
        elif out is not None:
            h = elementwise_map(h, out)
    return h


__all__ = ["dropout", "init_mlp", "mlp", "uniform_param"]
