"""Pure-numpy fused LSTM cell, used when the compiled extension is absent.

Gate pre-activations are laid out as ``[input | forget | output | candidate]``
along the last axis, each block ``H`` wide.
"""

import numpy as np


def _sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def lstm_cell_forward(gates, c_prev):
    H = c_prev.shape[1]
    act = np.empty_like(gates)
    act[:, : 3 * H] = _sigmoid(gates[:, : 3 * H])
    act[:, 3 * H :] = np.tanh(gates[:, 3 * H :])
    i = act[:, :H]
    f = act[:, H : 2 * H]
    o = act[:, 2 * H : 3 * H]
    g = act[:, 3 * H :]
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, act, tc


def lstm_cell_backward(dh, dc, c_prev, act, tc):
    H = c_prev.shape[1]
    i = act[:, :H]
    f = act[:, H : 2 * H]
    o = act[:, 2 * H : 3 * H]
    g = act[:, 3 * H :]
    dc_total = dc + dh * o * (1.0 - tc * tc)
    dgates = np.empty_like(act)
    dgates[:, :H] = dc_total * g * i * (1.0 - i)
    dgates[:, H : 2 * H] = dc_total * c_prev * f * (1.0 - f)
    dgates[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
    dgates[:, 3 * H :] = dc_total * i * (1.0 - g * g)
    dc_prev = dc_total * f
    return dgates, dc_prev
