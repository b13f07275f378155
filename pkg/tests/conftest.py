import dataclasses
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hmtl.cohort import SynthConfig, generate_synthetic_cohort, select_cohort, split_cohort  # noqa: E402
from hmtl.data import prepare_cohort  # noqa: E402
from hmtl.model import ModelConfig  # noqa: E402
from hmtl.preprocess import fit_scaler  # noqa: E402


def tiny_config(**overrides) -> ModelConfig:
    base = dict(lstm_layers=3, lstm_width=4, head_widths=(4, 4, 4), clinical_widths=(4, 4), dropout=0.5, seed=0)
    base.update(overrides)
    return ModelConfig(**base)


def truncate(item, T: int):
    """Copy of a SubjectArrays cut to its first ``T`` timesteps (last aux target censored)."""
    T = min(T, item.T)
    fields = {}
    for f in dataclasses.fields(item):
        v = getattr(item, f.name)
        if isinstance(v, np.ndarray) and v.ndim >= 1 and f.name != "clinical":
            v = v[:T].copy()
        fields[f.name] = v
    out = type(item)(**fields)
    out.aux_mask[T - 1] = 0.0
    out.aux[T - 1] = 0.0
    out.aux_z[T - 1] = np.nan
    return out


@pytest.fixture(scope="session")
def small_cohort():
    return select_cohort(generate_synthetic_cohort(SynthConfig(n_subjects=60, seed=11)))


@pytest.fixture(scope="session")
def small_items(small_cohort):
    train, val, test = split_cohort(small_cohort, seed=3)
    scaler = fit_scaler(train)
    return {
        "scaler": scaler,
        "train": prepare_cohort(train, scaler),
        "val": prepare_cohort(val, scaler),
        "test": prepare_cohort(test, scaler),
    }


@pytest.fixture
def tiny_items(small_items):
    """A handful of subjects of different lengths, each cut to T <= 3."""
    items = small_items["train"][:5]
    return [truncate(it, T) for it, T in zip(items, (2, 3, 2, 3, 3))]
