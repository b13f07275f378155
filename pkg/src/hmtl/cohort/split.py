from __future__ import annotations

import numpy as np

from hmtl.cohort.types import Cohort
from hmtl.errors import ConfigurationError


def split_sizes(n: int, ratios=(75, 15, 10)) -> tuple[int, int, int]:
    """Fold sizes: test rounds up, validation rounds down, train takes the rest.

    This reproduces 634 -> (475, 95, 64) and 10 -> (8, 1, 1).
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigurationError(f"split ratios must be three positive numbers, got {ratios}")
    if sum(ratios) != 100:
        raise ConfigurationError(f"split ratios must sum to 100, got {sum(ratios)}")
    _, r_val, r_test = ratios
    n_test = -(-n * r_test // 100)
    n_val = n * r_val // 100
    return n - n_val - n_test, n_val, n_test


def split_cohort(cohort: Cohort, ratios=(75, 15, 10), seed: int = 0):
    """Subject-level shuffled partition into (train, val, test) cohorts."""
    n_train, n_val, _ = split_sizes(len(cohort), ratios)
    order = np.random.default_rng(seed).permutation(len(cohort))
    subjects = cohort.subjects
    train = Cohort([subjects[i] for i in order[:n_train]])
    val = Cohort([subjects[i] for i in order[n_train : n_train + n_val]])
    test = Cohort([subjects[i] for i in order[n_train + n_val :]])
    return train, val, test
