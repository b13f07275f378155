"""Model-ready per-subject arrays and padded mini-batches."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from hmtl.cohort.labels import build_labels
from hmtl.cohort.schema import CLINICAL_COLUMNS, COMPOSITE_DOMAINS, CONTINUOUS_CLINICAL
from hmtl.cohort.types import Cohort, Subject
from hmtl.preprocess import (
    COMPOSITE_RANGES,
    ScalerParams,
    apply_scaler,
    composite_from_unit,
    composite_unit_scale,
    compute_time_gaps,
    encode_clinical,
    icv_normalize,
    scaler_slices,
)

_CONT_IDX = [CLINICAL_COLUMNS.index(c) for c in CONTINUOUS_CLINICAL]
_COMP_LO = np.array([COMPOSITE_RANGES[d][0] for d in COMPOSITE_DOMAINS], dtype=float)
_COMP_HI = np.array([COMPOSITE_RANGES[d][1] for d in COMPOSITE_DOMAINS], dtype=float)

log = logging.getLogger(__name__)


@dataclass
class SubjectArrays:
    id: str
    months: np.ndarray
    imaging: np.ndarray  # (T, 90), scaled, 0 where unobserved
    imaging_mask: np.ndarray  # (T, 90) 0/1
    cognition: np.ndarray
    cognition_mask: np.ndarray
    clinical: np.ndarray  # (18,)
    y: np.ndarray
    y_mask: np.ndarray
    aux: np.ndarray  # (T, 4) unit scale, 0 where masked
    aux_mask: np.ndarray
    aux_z: np.ndarray  # (T, 4) clamped Z scale, NaN where masked

    @property
    def T(self) -> int:
        return len(self.months)


def prepare_subject(subject: Subject, scaler: ScalerParams, clamp_counts: list | None = None) -> SubjectArrays | None:
    """Scaled, masked arrays for one selected subject (None if it has < 2 visits).

    Out-of-range composite targets are clamped; their count is appended to
    ``clamp_counts`` when given, otherwise logged here.
    """
    labels = build_labels(subject)
    if labels is None:
        return None
    blocks = scaler_slices(scaler)
    img_raw = np.vstack([icv_normalize(v.imaging, subject.icv) for v in subject.visits])
    cog_raw = np.vstack([v.cognition for v in subject.visits])
    img_mask = ~np.isnan(img_raw)
    cog_mask = ~np.isnan(cog_raw)
    img = np.nan_to_num(apply_scaler(img_raw, img_mask, blocks["imaging"]), nan=0.0)
    cog = np.nan_to_num(apply_scaler(cog_raw, cog_mask, blocks["cognition"]), nan=0.0)
    clin = encode_clinical(subject.clinical)
    clin[_CONT_IDX] = apply_scaler(clin[_CONT_IDX], np.ones(len(_CONT_IDX), bool), blocks["clinical"])
    raw = np.nan_to_num(labels.aux_targets)
    aux_unit = np.where(labels.aux_mask, composite_unit_scale(raw, warn=False), 0.0)
    n_clamped = int(np.count_nonzero(labels.aux_mask & ((raw < _COMP_LO) | (raw > _COMP_HI))))
    if clamp_counts is not None:
        clamp_counts.append(n_clamped)
    elif n_clamped:
        log.warning("%s: clamped %d composite value(s) outside the domain range", subject.id, n_clamped)
    aux_z = np.where(labels.aux_mask, composite_from_unit(aux_unit), np.nan)
    return SubjectArrays(
        id=subject.id,
        months=labels.months,
        imaging=img,
        imaging_mask=img_mask.astype(float),
        cognition=cog,
        cognition_mask=cog_mask.astype(float),
        clinical=clin,
        y=labels.y,
        y_mask=labels.y_mask.astype(float),
        aux=aux_unit,
        aux_mask=labels.aux_mask.astype(float),
        aux_z=aux_z,
    )


def prepare_cohort(cohort: Cohort, scaler: ScalerParams) -> list[SubjectArrays]:
    out, counts = [], []
    for s in cohort:
        arr = prepare_subject(s, scaler, counts)
        if arr is not None:
            out.append(arr)
    if sum(counts):
        log.warning("clamped %d composite target(s) outside the domain range in %d subject(s)",
                    sum(counts), sum(1 for c in counts if c))
    return out


@dataclass
class SeriesBatch:
    """One time-series modality, padded, in forward and per-row reversed order."""

    x: np.ndarray
    mask: np.ndarray
    delta: np.ndarray
    x_rev: np.ndarray
    mask_rev: np.ndarray
    delta_rev: np.ndarray


@dataclass
class Batch:
    ids: list
    lengths: np.ndarray
    time_mask: np.ndarray  # (B, T)
    rev_index: np.ndarray  # (B, T) per-row reversal of the valid prefix
    series: dict  # modality -> SeriesBatch
    clinical: np.ndarray
    y: np.ndarray
    y_mask: np.ndarray
    aux: np.ndarray
    aux_mask: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.time_mask.shape


def reversal_index(lengths, T: int) -> np.ndarray:
    idx = np.tile(np.arange(T), (len(lengths), 1))
    for b, L in enumerate(lengths):
        idx[b, :L] = np.arange(L - 1, -1, -1)
    return idx


def _series(items, attr, T, lengths, months_list):
    B = len(items)
    d = getattr(items[0], attr).shape[1]
    x = np.zeros((B, T, d))
    m = np.zeros((B, T, d))
    delta = np.zeros((B, T, d))
    delta_rev = np.zeros((B, T, d))
    for b, (it, L, months) in enumerate(zip(items, lengths, months_list)):
        x[b, :L] = getattr(it, attr)
        m[b, :L] = getattr(it, attr + "_mask")
        delta[b, :L] = compute_time_gaps(m[b, :L], months)
        rev_months = months[-1] - months[::-1]
        delta_rev[b, :L] = compute_time_gaps(m[b, :L][::-1], rev_months)
    rev = reversal_index(lengths, T)
    g = rev[:, :, None]
    return SeriesBatch(
        x, m, delta, np.take_along_axis(x, g, axis=1), np.take_along_axis(m, g, axis=1), delta_rev
    )


def collate(items: list[SubjectArrays], pad_to: int | None = None) -> Batch:
    """Pad to the longest sequence (or ``pad_to``); padding carries all-false masks."""
    lengths = np.array([it.T for it in items])
    T = int(max(lengths.max(), pad_to or 0))
    B = len(items)
    time_mask = np.zeros((B, T))
    y = np.zeros((B, T))
    y_mask = np.zeros((B, T))
    aux = np.zeros((B, T, 4))
    aux_mask = np.zeros((B, T, 4))
    for b, (it, L) in enumerate(zip(items, lengths)):
        time_mask[b, :L] = 1.0
        y[b, :L] = it.y
        y_mask[b, :L] = it.y_mask
        aux[b, :L] = it.aux
        aux_mask[b, :L] = it.aux_mask
    months = [it.months.astype(float) for it in items]
    return Batch(
        ids=[it.id for it in items],
        lengths=lengths,
        time_mask=time_mask,
        rev_index=reversal_index(lengths, T),
        series={
            "imaging": _series(items, "imaging", T, lengths, months),
            "cognition": _series(items, "cognition", T, lengths, months),
        },
        clinical=np.vstack([it.clinical for it in items]),
        y=y,
        y_mask=y_mask,
        aux=aux,
        aux_mask=aux_mask,
    )
