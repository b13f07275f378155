"""Stacked LSTM encoder with temporal-decay imputation at the input layer.

Per step (one direction): the previous layer-1 hidden state is decayed by
``exp(-relu(W delta + b))``, a linear history regression estimates the
current inputs from it, unobserved inputs are replaced by the estimate, and
``[completed, mask]`` feeds the LSTM stack. The bidirectional variant runs a
second, independently parameterised pass over the per-row reversed sequence
and averages the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hmtl.autodiff import (
    Tensor,
    add,
    affine,
    elementwise_map,
    linear,
    loss_mse_masked,
    lstm_cell,
    masked_fill,
    mul,
    scale,
    stack,
    take_time,
)
from hmtl.nn import uniform_param


@dataclass
class ImputerOutput:
    hidden: Tensor  # (B, T, H) top layer
    completed: Tensor  # (B, T, d)
    estimates: Tensor  # (B, T, d)
    imp_loss: Tensor  # scalar


def init_rits_params(rng: np.random.Generator, params: dict, prefix: str, d: int, widths) -> None:
    """Register one direction's parameters under ``prefix``."""
    h1 = widths[0]
    params[f"{prefix}.decay.W"] = uniform_param(rng, (d, h1), d, f"{prefix}.decay.W")
    params[f"{prefix}.decay.b"] = uniform_param(rng, (h1,), d, f"{prefix}.decay.b")
    params[f"{prefix}.hist.W"] = uniform_param(rng, (h1, d), h1, f"{prefix}.hist.W")
    params[f"{prefix}.hist.b"] = uniform_param(rng, (d,), h1, f"{prefix}.hist.b")
    n_in = d
    for k, H in enumerate(widths):
        p = f"{prefix}.l{k}"
        params[f"{p}.Wx"] = uniform_param(rng, (n_in, 4 * H), n_in, f"{p}.Wx")
        if k == 0:
            params[f"{p}.Wm"] = uniform_param(rng, (d, 4 * H), d, f"{p}.Wm")
        params[f"{p}.U"] = uniform_param(rng, (H, 4 * H), H, f"{p}.U")
        params[f"{p}.b"] = uniform_param(rng, (4 * H,), H, f"{p}.b")
        n_in = H


def decay_factor(delta, W, b) -> Tensor:
    """``exp(-max(0, delta @ W + b))``; always in ``(0, 1]``."""
    return elementwise_map(linear(delta, W, b), "neg-relu-exp")


def lstm_step(x, h, c, Wx, U, b, extra=()):
    """One LSTM step; ``extra`` holds additional ``(input, weight)`` terms."""
    gates = affine([(x, Wx), *extra, (h, U)], b)
    return lstm_cell(gates, c)


def rits_pass(x, mask, delta, params: dict, prefix: str, n_layers: int) -> ImputerOutput:
    """One direction over ``(B, T, d)`` arrays; returns per-step outputs and the loss.

    The imputation loss is the mean squared error between inputs and
    estimates over observed entries (0 when nothing is observed).
    """
    x = np.asarray(x, dtype=float)
    mask = np.asarray(mask, dtype=float)
    delta = np.asarray(delta, dtype=float)
    B, T, _ = x.shape
    widths = [params[f"{prefix}.l{k}.U"].shape[0] for k in range(n_layers)]
    hs = [np.zeros((B, H)) for H in widths]
    cs = [np.zeros((B, H)) for H in widths]
    tops, completed, estimates = [], [], []
    for t in range(T):
        gamma = decay_factor(delta[:, t], params[f"{prefix}.decay.W"], params[f"{prefix}.decay.b"])
        hs[0] = mul(hs[0], gamma)
        est = linear(hs[0], params[f"{prefix}.hist.W"], params[f"{prefix}.hist.b"])
        xc = masked_fill(x[:, t], mask[:, t], est)
        p0 = f"{prefix}.l0"
        hs[0], cs[0] = lstm_step(
            xc, hs[0], cs[0], params[f"{p0}.Wx"], params[f"{p0}.U"], params[f"{p0}.b"],
            extra=[(mask[:, t], params[f"{p0}.Wm"])],
        )
        for k in range(1, n_layers):
            pk = f"{prefix}.l{k}"
            hs[k], cs[k] = lstm_step(hs[k - 1], hs[k], cs[k], params[f"{pk}.Wx"], params[f"{pk}.U"], params[f"{pk}.b"])
        tops.append(hs[-1])
        completed.append(xc)
        estimates.append(est)
    est_all = stack(estimates, axis=1)
    return ImputerOutput(
        hidden=stack(tops, axis=1),
        completed=stack(completed, axis=1),
        estimates=est_all,
        imp_loss=loss_mse_masked(est_all, x, mask),
    )


def birits_impute(series, rev_index, time_mask, params: dict, prefix: str, n_layers: int) -> ImputerOutput:
    """Bidirectional imputation for one modality of a :class:`~hmtl.data.Batch`.

    Loss is the mean of both directions' losses plus the mean squared
    difference between their estimates over valid timesteps.
    """
    fwd = rits_pass(series.x, series.mask, series.delta, params, f"{prefix}.fwd", n_layers)
    bwd = rits_pass(series.x_rev, series.mask_rev, series.delta_rev, params, f"{prefix}.bwd", n_layers)
    hidden_b = take_time(bwd.hidden, rev_index)
    est_b = take_time(bwd.estimates, rev_index)
    comp_b = take_time(bwd.completed, rev_index)
    hidden = scale(add(fwd.hidden, hidden_b), 0.5)
    mean_est = scale(add(fwd.completed, comp_b), 0.5)
    completed = masked_fill(series.x, series.mask, mean_est)
    valid = np.broadcast_to(np.asarray(time_mask, dtype=float)[:, :, None], series.x.shape)
    consistency = loss_mse_masked(fwd.estimates, est_b, valid)
    imp_loss = add(scale(add(fwd.imp_loss, bwd.imp_loss), 0.5), consistency)
    return ImputerOutput(hidden, completed, scale(add(fwd.estimates, est_b), 0.5), imp_loss)
