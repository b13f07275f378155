"""Differentiable operations on :class:`~hmtl.autodiff.tensor.Tensor`.

Every function accepts tensors or plain arrays; plain arrays are treated as
constants. Gradient rules are written out by hand next to each forward.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from hmtl import kernels
from hmtl.autodiff.tensor import Tensor, as_array, record
from hmtl.errors import ConfigurationError, DimensionError


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a, b, opname):
    try:
        return np.broadcast_shapes(np.shape(a), np.shape(b))
    except ValueError:
        raise DimensionError(
            f"{opname}: shapes {np.shape(a)} and {np.shape(b)} do not broadcast"
        ) from None


def add(a, b) -> Tensor:
    ad, bd = as_array(a), as_array(b)
    _check_broadcast(ad, bd, "add")
    out = Tensor(ad + bd)
    record((a, b), (out,), lambda g: (_unbroadcast(g[0], ad.shape), _unbroadcast(g[0], bd.shape)))
    return out


def sub(a, b) -> Tensor:
    ad, bd = as_array(a), as_array(b)
    _check_broadcast(ad, bd, "sub")
    out = Tensor(ad - bd)
    record((a, b), (out,), lambda g: (_unbroadcast(g[0], ad.shape), _unbroadcast(-g[0], bd.shape)))
    return out


def mul(a, b) -> Tensor:
    ad, bd = as_array(a), as_array(b)
    _check_broadcast(ad, bd, "mul")
    out = Tensor(ad * bd)
    record(
        (a, b),
        (out,),
        lambda g: (_unbroadcast(g[0] * bd, ad.shape), _unbroadcast(g[0] * ad, bd.shape)),
    )
    return out


def neg(a) -> Tensor:
    out = Tensor(-as_array(a))
    record((a,), (out,), lambda g: (-g[0],))
    return out


def matmul(a, b) -> Tensor:
    """2-D matrix product ``(r, k) @ (k, c)``."""
    ad, bd = as_array(a), as_array(b)
    if ad.ndim != 2 or bd.ndim != 2 or ad.shape[1] != bd.shape[0]:
        raise DimensionError(f"matmul: cannot multiply shapes {ad.shape} and {bd.shape}")
    out = Tensor(ad @ bd)
    record((a, b), (out,), lambda g: (g[0] @ bd.T, ad.T @ g[0]))
    return out


def linear(x, w, b=None) -> Tensor:
    """``x @ w + b`` over the last axis of ``x`` (leading axes are flattened)."""
    xd, wd = as_array(x), as_array(w)
    if xd.shape[-1] != wd.shape[0]:
        raise DimensionError(f"linear: cannot multiply shapes {xd.shape} and {wd.shape}")
    lead = xd.shape[:-1]
    x2 = xd.reshape(-1, xd.shape[-1])
    y = x2 @ wd
    if b is not None:
        y = y + as_array(b)
    out = Tensor(y.reshape(lead + (wd.shape[1],)))

    def backward(g):
        g2 = g[0].reshape(-1, wd.shape[1])
        gx = (g2 @ wd.T).reshape(xd.shape)
        gw = x2.T @ g2
        gb = g2.sum(axis=0) if b is not None else None
        return gx, gw, gb

    record((x, w, b), (out,), backward)
    return out


def affine(terms: Sequence[tuple], bias) -> Tensor:
    """``sum_i x_i @ W_i + bias`` for 2-D ``x_i``; one tape node for all terms."""
    xs = [as_array(x) for x, _ in terms]
    ws = [as_array(w) for _, w in terms]
    for xd, wd in zip(xs, ws):
        if xd.ndim != 2 or xd.shape[1] != wd.shape[0]:
            raise DimensionError(f"affine: cannot multiply shapes {xd.shape} and {wd.shape}")
    y = xs[0] @ ws[0]
    for xd, wd in zip(xs[1:], ws[1:]):
        y += xd @ wd
    y += as_array(bias)
    out = Tensor(y)
    inputs = [t for pair in terms for t in pair] + [bias]

    def backward(g):
        g0 = g[0]
        res = []
        for xd, wd in zip(xs, ws):
            res.append(g0 @ wd.T)
            res.append(xd.T @ g0)
        res.append(g0.sum(axis=0))
        return res

    record(inputs, (out,), backward)
    return out


def _sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


MAP_KINDS = ("sigmoid", "tanh", "relu", "exp", "neg-relu-exp")
DECAY_CAP = 700.0


def elementwise_map(x, kind: str) -> Tensor:
    """Apply a scalar nonlinearity element-wise.

    ``neg-relu-exp`` is ``exp(-min(max(0, x), 700))``, the temporal-decay
    squashing; the cap keeps it strictly positive in float64.
    """
    xd = as_array(x)
    if kind == "sigmoid":
        y = _sigmoid(xd)
        rule = lambda g: (g[0] * y * (1.0 - y),)
    elif kind == "tanh":
        y = np.tanh(xd)
        rule = lambda g: (g[0] * (1.0 - y * y),)
    elif kind == "relu":
        y = np.maximum(xd, 0.0)
        rule = lambda g: (g[0] * (xd > 0),)
    elif kind == "exp":
        y = np.exp(xd)
        rule = lambda g: (g[0] * y,)
    elif kind == "neg-relu-exp":
        # capped so the result never underflows to 0 (exp(-700) ~ 1e-304)
        z = np.clip(xd, 0.0, DECAY_CAP)
        y = np.exp(-z)
        rule = lambda g: (-g[0] * y * ((xd > 0) & (xd < DECAY_CAP)),)
    else:
        raise ConfigurationError(f"unknown elementwise kind {kind!r}; expected one of {MAP_KINDS}")
    out = Tensor(y)
    record((x,), (out,), rule)
    return out


def sigmoid(x) -> Tensor:
    return elementwise_map(x, "sigmoid")


def tanh(x) -> Tensor:
    return elementwise_map(x, "tanh")


def total(x) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    xd = as_array(x)
    out = Tensor(xd.sum())
    record((x,), (out,), lambda g: (np.full_like(xd, g[0]),))
    return out


def mean(x) -> Tensor:
    xd = as_array(x)
    n = xd.size
    out = Tensor(xd.mean())
    record((x,), (out,), lambda g: (np.full_like(xd, g[0] / n),))
    return out


def scale(x, c: float) -> Tensor:
    return mul(x, np.float64(c))


def reshape(x, shape) -> Tensor:
    xd = as_array(x)
    out = Tensor(xd.reshape(shape))
    record((x,), (out,), lambda g: (g[0].reshape(xd.shape),))
    return out


def concat(xs: Sequence, axis: int = -1) -> Tensor:
    arrs = [as_array(x) for x in xs]
    try:
        y = np.concatenate(arrs, axis=axis)
    except ValueError:
        raise DimensionError(f"concat: incompatible shapes {[a.shape for a in arrs]}") from None
    out = Tensor(y)
    bounds = np.cumsum([a.shape[axis] for a in arrs])[:-1]
    record(tuple(xs), (out,), lambda g: tuple(np.split(g[0], bounds, axis=axis)))
    return out


def stack(xs: Sequence, axis: int = 1) -> Tensor:
    arrs = [as_array(x) for x in xs]
    out = Tensor(np.stack(arrs, axis=axis))
    n = len(arrs)
    record(
        tuple(xs),
        (out,),
        lambda g: tuple(np.take(g[0], i, axis=axis) for i in range(n)),
    )
    return out


def take_time(x, index: np.ndarray) -> Tensor:
    """Gather along axis 1 per row: ``out[b, t] = x[b, index[b, t]]``.

    ``index`` must be a permutation of ``range(T)`` in every row.
    """
    xd = as_array(x)
    idx = np.asarray(index)
    gather = idx.reshape(idx.shape + (1,) * (xd.ndim - 2))
    out = Tensor(np.take_along_axis(xd, gather, axis=1))

    def backward(g):
        gx = np.zeros_like(xd)
        np.put_along_axis(gx, gather, g[0], axis=1)
        return (gx,)

    record((x,), (out,), backward)
    return out


def repeat_time(x, steps: int) -> Tensor:
    """``(B, E) -> (B, steps, E)`` by replication."""
    xd = as_array(x)
    out = Tensor(np.repeat(xd[:, None, :], steps, axis=1))
    record((x,), (out,), lambda g: (g[0].sum(axis=1),))
    return out


def masked_fill(observed, mask, estimate) -> Tensor:
    """``mask * observed + (1 - mask) * estimate`` with constant ``observed``/``mask``.

    Observed positions are copied verbatim (``np.where``), so pass-through is
    exact rather than subject to ``1*x + 0*e`` rounding.
    """
    od, md, ed = as_array(observed), as_array(mask), as_array(estimate)
    keep = md > 0.5
    out = Tensor(np.where(keep, od, ed))
    record((observed, mask, estimate), (out,), lambda g: (None, None, np.where(keep, 0.0, g[0])))
    return out


def lstm_cell(gates, c_prev) -> tuple[Tensor, Tensor]:
    """Fused LSTM cell: ``(h, c)`` from gate pre-activations ``[i|f|o|g]``."""
    gd, cd = as_array(gates), as_array(c_prev)
    if gd.ndim != 2 or cd.ndim != 2 or gd.shape != (cd.shape[0], 4 * cd.shape[1]):
        raise DimensionError(f"lstm_cell: gates {gd.shape} incompatible with cell {cd.shape}")
    h, c, act, tc = kernels.lstm_cell_forward(gd, cd)
    h_t, c_t = Tensor(h), Tensor(c)

    def backward(g):
        dgates, dc_prev = kernels.lstm_cell_backward(g[0], g[1], cd, act, tc)
        return dgates, dc_prev

    record((gates, c_prev), (h_t, c_t), backward)
    return h_t, c_t


def dropout(x, rate: float, mode: str, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity in ``eval`` mode or when ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ConfigurationError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x if isinstance(x, Tensor) else Tensor(x)
    if rng is None:
        raise ConfigurationError("train-mode dropout needs an rng")
    xd = as_array(x)
    keep = (rng.random(xd.shape) >= rate) / (1.0 - rate)
    out = Tensor(xd * keep)
    record((x,), (out,), lambda g: (g[0] * keep,))
    return out


def column(x, j: int) -> Tensor:
    """``x[..., j]`` (drops the last axis)."""
    xd = as_array(x)
    out = Tensor(xd[..., j])

    def backward(g):
        gx = np.zeros_like(xd)
        gx[..., j] = g[0]
        return (gx,)

    record((x,), (out,), backward)
    return out
