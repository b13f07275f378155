from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hmtl.cohort.schema import (
    CLINICAL_COLUMNS,
    MONTH_STEP,
    N_COGNITION,
    N_COMPOSITES,
    N_IMAGING,
)
from hmtl.errors import IngestionError


def _nan_vector(n):
    return np.full(n, np.nan)


@dataclass
class Visit:
    """One 6-month grid visit. Unobserved values are stored as NaN."""

    month: int
    diagnosis: str | None = None
    imaging: np.ndarray = field(default_factory=lambda: _nan_vector(N_IMAGING))
    cognition: np.ndarray = field(default_factory=lambda: _nan_vector(N_COGNITION))
    composites: np.ndarray = field(default_factory=lambda: _nan_vector(N_COMPOSITES))

    def __post_init__(self):
        # months past MAX_MONTH are representable; classify_and_trim drops them
        if self.month % MONTH_STEP != 0 or self.month < 0:
            raise IngestionError(f"visit month {self.month} is not on the 6-month grid")
        self.imaging = np.asarray(self.imaging, dtype=np.float64)
        self.cognition = np.asarray(self.cognition, dtype=np.float64)
        self.composites = np.asarray(self.composites, dtype=np.float64)

    @property
    def imaging_mask(self) -> np.ndarray:
        return ~np.isnan(self.imaging)

    @property
    def cognition_mask(self) -> np.ndarray:
        return ~np.isnan(self.cognition)

    @property
    def composite_mask(self) -> np.ndarray:
        return ~np.isnan(self.composites)

    def __eq__(self, other):
        if not isinstance(other, Visit):
            return NotImplemented
        return (
            self.month == other.month
            and self.diagnosis == other.diagnosis
            and np.array_equal(self.imaging, other.imaging, equal_nan=True)
            and np.array_equal(self.cognition, other.cognition, equal_nan=True)
            and np.array_equal(self.composites, other.composites, equal_nan=True)
        )


@dataclass
class Subject:
    id: str
    clinical: dict
    icv: float
    visits: list[Visit]
    group: str | None = None
    reason: str = ""

    def __post_init__(self):
        missing = [c for c in CLINICAL_COLUMNS if c not in self.clinical]
        if missing:
            raise IngestionError(f"subject {self.id}: clinical fields missing: {missing}")

    @property
    def months(self) -> list[int]:
        return [v.month for v in self.visits]

    def __eq__(self, other):
        if not isinstance(other, Subject):
            return NotImplemented
        return (
            self.id == other.id
            and self.group == other.group
            and self.reason == other.reason
            and _same_clinical(self.clinical, other.clinical)
            and (self.icv == other.icv or (np.isnan(self.icv) and np.isnan(other.icv)))
            and self.visits == other.visits
        )


def _same_clinical(a, b):
    if a.keys() != b.keys():
        return False
    for k in a:
        x, y = a[k], b[k]
        if isinstance(x, float) and isinstance(y, float) and np.isnan(x) and np.isnan(y):
            continue
        if x != y:
            return False
    return True


@dataclass
class Cohort:
    subjects: list[Subject]

    def __len__(self):
        return len(self.subjects)

    def __iter__(self):
        return iter(self.subjects)

    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    def by_id(self) -> dict[str, Subject]:
        return {s.id: s for s in self.subjects}

    def included(self) -> "Cohort":
        return Cohort([s for s in self.subjects if s.group in ("pMCI", "sMCI")])

    def subset(self, ids) -> "Cohort":
        lookup = self.by_id()
        return Cohort([lookup[i] for i in ids])


@dataclass
class LabeledSequence:
    """Per-timestep targets for one subject.

    ``aux_targets`` holds next-visit composites on the Z scale, ordered
    (memory, executive, language, visual-spatial); NaN where unavailable.
    """

    subject_id: str
    months: np.ndarray
    y: np.ndarray
    y_mask: np.ndarray
    aux_targets: np.ndarray
    aux_mask: np.ndarray

    @property
    def T(self) -> int:
        return len(self.y)
