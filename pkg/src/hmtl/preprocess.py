"""Feature transforms fitted on the training fold and applied everywhere else.

Continuous time-series features (ICV-normalised ROI volumes and cognitive
scores) and the continuous clinical fields are clipped to training
percentiles and min-max scaled. Composite scores use fixed domain ranges.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass

import numpy as np

from hmtl.cohort.schema import (
    CLINICAL_COLUMNS,
    COGNITION_COLUMNS,
    COMORBIDITY_COLUMNS,
    COMPOSITE_DOMAINS,
    CONTINUOUS_CLINICAL,
    IMAGING_COLUMNS,
)
from hmtl.cohort.types import Cohort
from hmtl.errors import ConfigurationError, FittingError, IngestionError, UsageError

log = logging.getLogger(__name__)

SCALED_FEATURES = IMAGING_COLUMNS + COGNITION_COLUMNS + CONTINUOUS_CLINICAL

COMPOSITE_RANGES = {
    "memory": (-3.0, 3.0),
    "executive": (-3.0, 3.0),
    "language": (-3.0, 3.0),
    "visuospatial": (-3.0, 1.0),
}
_LO = np.array([COMPOSITE_RANGES[d][0] for d in COMPOSITE_DOMAINS])
_HI = np.array([COMPOSITE_RANGES[d][1] for d in COMPOSITE_DOMAINS])


def fingerprint(names) -> str:
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ScalerParams:
    names: tuple
    p1: np.ndarray
    p99: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.names)

    def to_json(self) -> str:
        return json.dumps(
            {
                "fingerprint": self.fingerprint,
                "names": list(self.names),
                "p1": self.p1.tolist(),
                "p99": self.p99.tolist(),
                "min": self.lo.tolist(),
                "max": self.hi.tolist(),
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "ScalerParams":
        d = json.loads(text)
        params = cls(
            tuple(d["names"]),
            np.array(d["p1"], dtype=float),
            np.array(d["p99"], dtype=float),
            np.array(d["min"], dtype=float),
            np.array(d["max"], dtype=float),
        )
        if params.fingerprint != d["fingerprint"]:
            raise IngestionError("scaler file fingerprint does not match its feature list")
        return params

    def __eq__(self, other):
        if not isinstance(other, ScalerParams):
            return NotImplemented
        return self.names == other.names and all(
            np.array_equal(a, b)
            for a, b in [(self.p1, other.p1), (self.p99, other.p99), (self.lo, other.lo), (self.hi, other.hi)]
        )


def icv_normalize(volumes, icv: float) -> np.ndarray:
    if not icv > 0:
        raise IngestionError(f"intracranial volume must be positive, got {icv}")
    return np.asarray(volumes, dtype=float) / icv


def fit_scaler_arrays(values: np.ndarray, names) -> ScalerParams:
    """Fit clip bounds and min/max from a ``(rows, features)`` array (NaN = unobserved)."""
    values = np.asarray(values, dtype=float)
    names = tuple(names)
    if values.ndim != 2 or values.shape[1] != len(names):
        raise UsageError(f"expected (rows, {len(names)}) values, got {values.shape}")
    p1 = np.empty(len(names))
    p99 = np.empty(len(names))
    lo = np.empty(len(names))
    hi = np.empty(len(names))
    for j, name in enumerate(names):
        col = values[:, j]
        col = col[~np.isnan(col)]
        if col.size == 0:
            raise FittingError(f"feature {name!r} has no observed training values")
        a, b = np.percentile(col, [1.0, 99.0])
        clipped = np.clip(col, a, b)
        p1[j], p99[j] = a, b
        lo[j], hi[j] = clipped.min(), clipped.max()
    return ScalerParams(names, p1, p99, lo, hi)


def encode_clinical(clinical: dict) -> np.ndarray:
    """18 raw numeric slots: age, sex (M=1, F=0), six vitals, ten 0/1 comorbidities."""
    out = np.empty(len(CLINICAL_COLUMNS))
    for j, col in enumerate(CLINICAL_COLUMNS):
        val = clinical[col]
        if col == "sex":
            if val not in ("M", "F"):
                raise IngestionError(f"unknown sex category {val!r}; expected 'M' or 'F'")
            out[j] = 1.0 if val == "M" else 0.0
        elif col in COMORBIDITY_COLUMNS:
            if val not in (0, 1, 0.0, 1.0, True, False):
                raise IngestionError(f"comorbidity {col!r} must be binary, got {val!r}")
            out[j] = float(val)
        else:
            try:
                out[j] = float(val)
            except (TypeError, ValueError):
                raise IngestionError(f"clinical field {col!r} is not numeric: {val!r}") from None
    return out


def _cohort_feature_rows(cohort: Cohort) -> np.ndarray:
    rows = []
    for s in cohort:
        clin = encode_clinical(s.clinical)
        cont = np.array([clin[CLINICAL_COLUMNS.index(c)] for c in CONTINUOUS_CLINICAL])
        for k, v in enumerate(s.visits):
            img = icv_normalize(v.imaging, s.icv)
            # clinical values are baseline-only: contribute one row per subject
            rows.append(np.concatenate([img, v.cognition, cont if k == 0 else np.full(cont.size, np.nan)]))
    if not rows:
        return np.empty((0, len(SCALED_FEATURES)))
    return np.vstack(rows)


def fit_scaler(train: Cohort) -> ScalerParams:
    """Fit on the training fold only (percentile clip, then min/max)."""
    return fit_scaler_arrays(_cohort_feature_rows(train), SCALED_FEATURES)


def apply_scaler(features, masks, params: ScalerParams, names=None) -> np.ndarray:
    """Clip to ``[p1, p99]`` then map to ``[0, 1]``; unobserved entries pass through.

    ``features`` has the scaled features on its last axis, in ``names`` order
    (default: the params' own order). Constant features map to 0.
    """
    if names is not None and fingerprint(names) != params.fingerprint:
        raise UsageError("feature ordering does not match the fitted scaler")
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != len(params.names):
        raise UsageError(f"expected {len(params.names)} features on the last axis, got {x.shape[-1]}")
    m = np.asarray(masks, dtype=bool)
    span = params.hi - params.lo
    safe = np.where(span > 0, span, 1.0)
    scaled = (np.clip(x, params.p1, params.p99) - params.lo) / safe
    scaled = np.where(span > 0, scaled, 0.0)
    # clip() is monotone so scaled lies in [0, 1] up to rounding at the ends
    scaled = np.clip(scaled, 0.0, 1.0)
    return np.where(m, scaled, x)


def scaler_slices(params: ScalerParams) -> dict[str, ScalerParams]:
    """Split combined params into per-block params (imaging, cognition, clinical)."""
    blocks = {
        "imaging": IMAGING_COLUMNS,
        "cognition": COGNITION_COLUMNS,
        "clinical": CONTINUOUS_CLINICAL,
    }
    out = {}
    for key, cols in blocks.items():
        idx = [params.names.index(c) for c in cols]
        out[key] = ScalerParams(tuple(cols), params.p1[idx], params.p99[idx], params.lo[idx], params.hi[idx])
    return out


def _domain_bounds(domain):
    if isinstance(domain, str):
        if domain not in COMPOSITE_RANGES:
            raise ConfigurationError(f"unknown composite domain {domain!r}")
        return COMPOSITE_RANGES[domain]
    return _LO, _HI


def composite_unit_scale(z, domain=None, warn: bool = True):
    """Map Z-scale composites into ``[0, 1]`` using the domain's fixed range.

    ``domain=None`` treats the last axis as the four domains in canonical
    order. Out-of-range values are clamped and counted in a warning.
    """
    lo, hi = _domain_bounds(domain)
    z = np.asarray(z, dtype=float)
    u = (z - lo) / (np.asarray(hi) - lo)
    outside = (u < 0) | (u > 1)
    n_out = int(np.count_nonzero(outside & ~np.isnan(u)))
    if n_out and warn:
        log.warning("clamped %d composite value(s) outside the domain range", n_out)
    u = np.clip(u, 0.0, 1.0)
    return float(u) if u.ndim == 0 else u


def composite_from_unit(u, domain=None):
    lo, hi = _domain_bounds(domain)
    z = np.asarray(u, dtype=float) * (np.asarray(hi) - lo) + lo
    return float(z) if z.ndim == 0 else z


def compute_time_gaps(masks, months) -> np.ndarray:
    """Time since each feature was last observed, in months (first step 0)."""
    m = np.asarray(masks, dtype=bool)
    months = np.asarray(months, dtype=float)
    vector = m.ndim == 1
    if vector:
        m = m[:, None]
    T = len(months)
    if m.shape[0] != T:
        raise UsageError(f"mask has {m.shape[0]} steps but {T} months were given")
    if T > 1 and np.any(np.diff(months) <= 0):
        raise UsageError(f"months must be strictly increasing, got {months.tolist()}")
    delta = np.zeros(m.shape)
    for t in range(1, T):
        gap = months[t] - months[t - 1]
        delta[t] = np.where(m[t - 1], gap, delta[t - 1] + gap)
    return delta[:, 0] if vector else delta
