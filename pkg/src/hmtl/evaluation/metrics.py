"""Pure metric functions on pooled visit-level predictions."""

from __future__ import annotations

import numpy as np

from hmtl.errors import DimensionError, UndefinedMetricError


def _pair(scores, labels):
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if s.shape != y.shape:
        raise DimensionError(f"scores {s.shape} and labels {y.shape} differ in length")
    return s, y > 0.5


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    # boundaries of tie groups in sorted order
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], len(x)]
    avg = (starts + ends + 1) / 2.0  # mean of 1-based ranks start+1..end
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auroc(scores, labels) -> float:
    """P(random positive outranks random negative), ties counting one half."""
    s, y = _pair(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(f"AUROC needs both classes (got {n_pos} positive, {n_neg} negative)")
    r = _average_ranks(s)
    u = r[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Average precision: mean of precision@rank over the positives.

    Scores are sorted descending; tied scores keep their input order.
    """
    s, y = _pair(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC needs at least one positive")
    order = np.argsort(-s, kind="stable")
    hits = y[order]
    precision = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return float(precision[hits].sum() / n_pos)


def regression_mse(pred, target, mask) -> np.ndarray:
    """Per-column masked MSE; the last axis indexes composite domains."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(target, dtype=float)
    m = np.asarray(mask, dtype=bool)
    if not (p.shape == t.shape == m.shape):
        raise DimensionError(f"regression_mse: shapes {p.shape}, {t.shape}, {m.shape} differ")
    p2 = p.reshape(-1, p.shape[-1]) if p.ndim > 1 else p[:, None]
    t2 = t.reshape(p2.shape)
    m2 = m.reshape(p2.shape)
    n = m2.sum(axis=0)
    if np.any(n == 0):
        raise UndefinedMetricError(f"regression_mse: no observed targets in column(s) {np.flatnonzero(n == 0).tolist()}")
    d = np.where(m2, p2 - t2, 0.0)
    out = (d * d).sum(axis=0) / n
    return out if p.ndim > 1 else out[:1]
