"""Cohort selection (inclusion, pMCI/sMCI classification) and label construction."""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from hmtl.cohort.schema import CLINICAL_COLUMNS, DIAGNOSIS_ALIASES, MAX_MONTH, N_COMPOSITES
from hmtl.cohort.types import Cohort, LabeledSequence, Subject, Visit
from hmtl.errors import IngestionError

log = logging.getLogger(__name__)


def normalize_diagnosis(token: str | None) -> str | None:
    """Map raw diagnosis tokens onto CN/MCI/AD; EMCI and LMCI collapse to MCI."""
    if token is None or token == "":
        return None
    try:
        return DIAGNOSIS_ALIASES[token.strip().upper()]
    except KeyError:
        raise IngestionError(f"unknown diagnosis {token!r}") from None


def forward_fill_diagnosis(visits: list[Visit]) -> list[Visit]:
    """Replace each missing diagnosis with the most recent recorded one."""
    if not visits or visits[0].diagnosis is None:
        raise IngestionError("baseline diagnosis is missing; cannot forward fill")
    out = []
    last = None
    for v in visits:
        if v.diagnosis is None:
            out.append(dataclasses.replace(v, diagnosis=last))
        else:
            last = v.diagnosis
            out.append(v)
    return out


def classify_and_trim(subject: Subject) -> Subject:
    """Assign pMCI / sMCI / excluded and drop visits outside the analysis window.

    Expects forward-filled diagnoses. pMCI keeps visits up to and including
    the first AD visit within 60 months; sMCI keeps visits up to month 60.
    """
    months = subject.months
    if any(b <= a for a, b in zip(months, months[1:])):
        raise IngestionError(f"subject {subject.id}: visit months not strictly increasing: {months}")
    visits = subject.visits
    if not visits or visits[0].month != 0:
        return dataclasses.replace(subject, group="excluded", reason="no baseline visit")
    if visits[0].diagnosis != "MCI":
        return dataclasses.replace(subject, group="excluded", reason="baseline diagnosis is not MCI")
    if any(v.diagnosis == "CN" for v in visits[1:]):
        return dataclasses.replace(subject, group="excluded", reason="reverted to CN")
    window = [v for v in visits if v.month <= MAX_MONTH]
    for k, v in enumerate(window):
        if v.diagnosis == "AD":
            return dataclasses.replace(subject, visits=window[: k + 1], group="pMCI", reason="")
    return dataclasses.replace(subject, visits=window, group="sMCI", reason="")


def baseline_exclusion(subject: Subject) -> str:
    """Reason the subject fails the baseline data-availability rule, or ``""``."""
    if not subject.visits or subject.visits[0].month != 0:
        return "no baseline visit"
    base = subject.visits[0]
    if not base.imaging_mask.any():
        return "baseline imaging missing"
    if not base.cognition_mask.any():
        return "baseline cognition missing"
    for col in CLINICAL_COLUMNS:
        val = subject.clinical[col]
        if val is None or (isinstance(val, float) and np.isnan(val)):
            return f"baseline clinical value {col!r} missing"
    if not np.isfinite(subject.icv) or subject.icv <= 0:
        return "intracranial volume missing or non-positive"
    return ""


def select_subject(subject: Subject) -> Subject:
    reason = baseline_exclusion(subject)
    if reason:
        return dataclasses.replace(subject, group="excluded", reason=reason)
    if subject.visits[0].diagnosis is None:
        return dataclasses.replace(subject, group="excluded", reason="baseline diagnosis missing")
    filled = dataclasses.replace(subject, visits=forward_fill_diagnosis(subject.visits))
    return classify_and_trim(filled)


def select_cohort(cohort: Cohort) -> Cohort:
    """Apply inclusion/exclusion rules; excluded subjects stay in with a reason."""
    out = []
    for s in cohort:
        sel = select_subject(s)
        if sel.group == "excluded":
            log.info("excluding subject %s: %s", s.id, sel.reason)
        out.append(sel)
    return Cohort(out)


def build_labels(subject: Subject) -> LabeledSequence | None:
    """Per-timestep next-visit targets for a classified subject.

    ``y[t]`` is 1 when the (forward-filled) diagnosis at visit ``t + 1`` is
    AD; past the last retained visit the diagnosis is carried forward, so the
    progression visit itself is labelled 1 and a stable final visit 0.
    Returns ``None`` (with a warning) for fewer than two visits.
    """
    visits = subject.visits
    T = len(visits)
    if T < 2:
        log.warning("dropping subject %s: %d visit(s) after trimming", subject.id, T)
        return None
    diagnoses = [v.diagnosis for v in visits]
    y = np.array([1.0 if diagnoses[min(t + 1, T - 1)] == "AD" else 0.0 for t in range(T)])
    aux = np.full((T, N_COMPOSITES), np.nan)
    for t in range(T - 1):
        aux[t] = visits[t + 1].composites
    return LabeledSequence(
        subject_id=subject.id,
        months=np.array([v.month for v in visits]),
        y=y,
        y_mask=np.ones(T, dtype=bool),
        aux_targets=aux,
        aux_mask=~np.isnan(aux),
    )
