"""Masked losses. Both return a scalar tensor and return 0 for an empty mask."""

import numpy as np

from hmtl.autodiff.tensor import Tensor, as_array, record
from hmtl.errors import DimensionError

PROB_EPS = 1e-7


def _check_shapes(name, *arrays):
    shapes = [a.shape for a in arrays]
    if any(s != shapes[0] for s in shapes[1:]):
        raise DimensionError(f"{name}: shape mismatch {shapes}")


def loss_bce_masked(p, y, mask) -> Tensor:
    """Mean binary cross-entropy over entries where ``mask == 1``.

    Probabilities are clamped to ``[1e-7, 1 - 1e-7]``; clamped entries pass
    no gradient.
    """
    pd, yd, md = as_array(p), as_array(y), as_array(mask)
    _check_shapes("loss_bce_masked", pd, yd, md)
    n = md.sum()
    if n == 0:
        out = Tensor(0.0)
        record((p,), (out,), lambda g: (np.zeros_like(pd),))
        return out
    pc = np.clip(pd, PROB_EPS, 1.0 - PROB_EPS)
    terms = -(yd * np.log(pc) + (1.0 - yd) * np.log(1.0 - pc))
    out = Tensor((terms * md).sum() / n)
    inside = (pd > PROB_EPS) & (pd < 1.0 - PROB_EPS)

    def backward(g):
        dp = (-(yd / pc) + (1.0 - yd) / (1.0 - pc)) * md / n
        return (g[0] * dp * inside,)

    record((p,), (out,), backward)
    return out


def loss_mse_masked(pred, target, mask) -> Tensor:
    """Mean of ``(pred - target)**2`` over entries where ``mask == 1``."""
    pd, td, md = as_array(pred), as_array(target), as_array(mask)
    _check_shapes("loss_mse_masked", pd, td, md)
    n = md.sum()
    if n == 0:
        out = Tensor(0.0)
        record((pred, target), (out,), lambda g: (np.zeros_like(pd), np.zeros_like(td)))
        return out
    diff = np.where(md > 0, pd - td, 0.0)
    out = Tensor((diff * diff).sum() / n)

    def backward(g):
        d = g[0] * 2.0 * diff / n
        return d, -d

    record((pred, target), (out,), backward)
    return out
