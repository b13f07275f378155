"""Participant-level pivot bootstrap, Wilcoxon signed-rank and BH adjustment."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from hmtl.errors import ConfigurationError, FittingError, UndefinedMetricError
from hmtl.evaluation.metrics import _average_ranks


def resample_rng(seed: int, b: int) -> np.random.Generator:
    """Stream for resample ``b``; independent of scheduling order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(b)]))


def resample_indices(n: int, B: int, seed: int, metric_ok=None, max_factor: int = 10) -> list[np.ndarray]:
    """``B`` subject index draws; draws rejected by ``metric_ok`` are redrawn.

    Resample ``b`` draws from its own stream, so the result does not depend
    on which other resamples were rejected. Raises once ``max_factor * B``
    draws in total have been spent.
    """
    if B < 1:
        raise ConfigurationError(f"bootstrap needs B >= 1, got {B}")
    if n < 1:
        raise ConfigurationError("bootstrap needs at least one subject")
    out = []
    spent = 0
    for b in range(B):
        rng = resample_rng(seed, b)
        while True:
            spent += 1
            if spent > max_factor * B:
                raise FittingError(f"bootstrap redraw budget ({max_factor * B} draws) exhausted")
            idx = rng.integers(0, n, size=n)
            if metric_ok is None or metric_ok(idx):
                break
        out.append(idx)
    return out


def _defined(metric_fn):
    def ok(idx):
        try:
            metric_fn(idx)
        except UndefinedMetricError:
            return False
        return True

    return ok


@dataclass
class BootstrapResult:
    point: float
    lower: float
    upper: float
    samples: np.ndarray  # (B,) metric per resample, in resample order


def pivot_interval(point: float, samples, alpha: float = 0.05) -> tuple[float, float]:
    q_lo, q_hi = np.percentile(np.asarray(samples, dtype=float), [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return 2 * point - q_hi, 2 * point - q_lo


def pivot_bootstrap_ci(metric_fn, n_subjects: int, B: int = 200, alpha: float = 0.05, seed: int = 0,
                       threads: int = 1, indices: list | None = None) -> BootstrapResult:
    """Pivot CI of ``metric_fn(subject_index_array)``.

    ``metric_fn`` receives an integer array of subject positions (with
    repeats) and must raise :class:`UndefinedMetricError` when the metric is
    undefined for that draw. Pass ``indices`` to share draws across models.
    """
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha must be in (0, 1), got {alpha}")
    point = metric_fn(np.arange(n_subjects))
    if indices is None:
        indices = resample_indices(n_subjects, B, seed, _defined(metric_fn))
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            samples = np.array(list(ex.map(metric_fn, indices)), dtype=float)
    else:
        samples = np.array([metric_fn(i) for i in indices], dtype=float)
    lo, hi = pivot_interval(point, samples, alpha)
    return BootstrapResult(float(point), float(lo), float(hi), samples)


@dataclass
class WilcoxonResult:
    p: float
    statistic: float
    n: int
    degenerate: bool
    method: str


def _exact_p(ranks2: np.ndarray, w2: int) -> float:
    """Two-sided exact p for doubled-rank statistic ``w2`` (sum of positive ranks x2)."""
    total = int(ranks2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in ranks2:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: len(counts) - r]
        counts = counts + shifted
    probs = counts / counts.sum()
    lo = min(w2, total - w2)
    p = 2.0 * probs[: lo + 1].sum()
    return min(1.0, p)


def wilcoxon_signed_rank(x, y=None, exact_max: int = 20) -> WilcoxonResult:
    """Two-sided paired signed-rank test; zero differences are dropped.

    Exact null distribution for ``n <= exact_max`` (ties handled through
    average ranks), otherwise the normal approximation with tie-corrected
    variance and a 0.5 continuity correction.
    """
    d = np.asarray(x, dtype=float) - (0.0 if y is None else np.asarray(y, dtype=float))
    if d.ndim != 1 or len(d) == 0:
        raise ConfigurationError("wilcoxon needs a non-empty 1-D sample")
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(1.0, 0.0, 0, True, "degenerate")
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= exact_max:
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        p = _exact_p(ranks2, int(round(2 * w_plus)))
        return WilcoxonResult(p, w_plus, n, False, "exact")
    mu = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - (tie_counts**3 - tie_counts).sum() / 48.0
    if var <= 0:
        return WilcoxonResult(1.0, w_plus, n, True, "degenerate")
    z = (abs(w_plus - mu) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    p = math.erfc(z / math.sqrt(2.0))
    return WilcoxonResult(min(1.0, p), w_plus, n, False, "normal")


def bh_adjust(pvals) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(pvals, dtype=float)
    if p.ndim != 1:
        raise ConfigurationError("bh_adjust expects a 1-D sequence")
    if np.any(np.isnan(p)) or np.any((p < 0) | (p > 1)):
        raise ConfigurationError("p-values must lie in [0, 1]")
    m = len(p)
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    q = p[order] * m / np.arange(1, m + 1)
    q = np.minimum.accumulate(q[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(q, 1.0)
    return out
