"""Independent reference implementations used as test oracles.

Each one is written from the textbook definition and shares no code with
the package, so agreement is evidence rather than tautology.
"""

from itertools import product

import numpy as np


def central_difference(f, x: np.ndarray, index, step: float = 1e-5) -> float:
    """d f / d x[index] by the symmetric difference quotient; ``x`` restored afterwards."""
    old = x[index]
    x[index] = old + step
    up = f()
    x[index] = old - step
    down = f()
    x[index] = old
    return (up - down) / (2 * step)


def rel_error(a: float, b: float, floor: float = 1e-7) -> float:
    # floor keeps exact-zero gradients from dividing by zero
    return abs(a - b) / max(abs(a), abs(b), floor)


def label_oracle(raw_diagnoses):
    """Next-visit progression labels from a raw diagnosis list (None = missing).

    Transcribed step by step from the published rule: fill each missing
    diagnosis from the previous visit; keep visits up to and including the
    first AD; label a visit 1 when the following visit is AD. The visit after
    the last one is taken to carry the last diagnosis. Fewer than two kept
    visits yields None.
    """
    filled = []
    previous = None
    for d in raw_diagnoses:
        if d is None:
            d = previous
        filled.append(d)
        previous = d
    kept = []
    for d in filled:
        kept.append(d)
        if d == "AD":
            break
    if len(kept) < 2:
        return None
    labels = []
    for t in range(len(kept)):
        following = kept[t + 1] if t + 1 < len(kept) else kept[-1]
        labels.append(1 if following == "AD" else 0)
    return labels


def diagnosis_patterns(max_len: int = 6):
    """Every sequence over {MCI, AD, missing} with an MCI baseline, length 1..max_len."""
    for n in range(1, max_len + 1):
        for tail in product(["MCI", "AD", None], repeat=n - 1):
            yield ["MCI", *tail]


def auroc_pairwise(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else (0.5 if p == q else 0.0)
    return wins / (len(pos) * len(neg))


def average_precision_loop(scores, labels) -> float:
    """Mean over positives of precision at that positive's rank (descending, stable)."""
    order = sorted(range(len(scores)), key=lambda i: -scores[i])  # sorted() is stable
    hits = 0
    total = 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i] == 1:
            hits += 1
            total += hits / rank
    return total / hits


def _avg_ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def wilcoxon_enumeration(diffs) -> float:
    """Two-sided p by enumerating all 2**n sign assignments of the ranks."""
    d = [x for x in diffs if x != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = _avg_ranks([abs(x) for x in d])
    w_obs = sum(r for r, x in zip(ranks, d) if x > 0)
    centre = sum(ranks) / 2
    extreme = 0
    for signs in product((0, 1), repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        if abs(w - centre) >= abs(w_obs - centre) - 1e-12:
            extreme += 1
    return extreme / 2**n


def bh_stepup(pvals):
    """q_(i) = min over j >= i of m p_(j) / j, capped at 1, in input order."""
    m = len(pvals)
    order = sorted(range(m), key=lambda i: pvals[i])
    q_sorted = [0.0] * m
    for pos in range(m):
        q_sorted[pos] = min(min(m * pvals[order[j]] / (j + 1) for j in range(pos, m)), 1.0)
    out = [0.0] * m
    for pos, i in enumerate(order):
        out[i] = q_sorted[pos]
    return out
