"""Delimited-text cohort files: ``subjects.csv`` and ``visits.csv``.

Both are UTF-8 CSV with a header row; an empty cell means unobserved.
Floats are written with ``repr`` so a write/read cycle is lossless.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from hmtl.cohort.labels import normalize_diagnosis, select_cohort
from hmtl.cohort.schema import (
    CLINICAL_COLUMNS,
    COGNITION_COLUMNS,
    COMPOSITE_COLUMNS,
    GROUPS,
    IMAGING_COLUMNS,
)
from hmtl.cohort.types import Cohort, Subject, Visit
from hmtl.errors import IngestionError

SUBJECTS_FILE = "subjects.csv"
VISITS_FILE = "visits.csv"
SUBJECT_HEADER = ["id", "group", "reason"] + CLINICAL_COLUMNS + ["icv"]
VISIT_HEADER = ["id", "month", "diagnosis"] + IMAGING_COLUMNS + COGNITION_COLUMNS + COMPOSITE_COLUMNS


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def write_cohort(cohort: Cohort, directory) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / SUBJECTS_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUBJECT_HEADER)
        for s in cohort:
            w.writerow(
                [s.id, s.group or "", s.reason]
                + [_fmt(s.clinical[c]) for c in CLINICAL_COLUMNS]
                + [_fmt(s.icv)]
            )
    with open(out / VISITS_FILE, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VISIT_HEADER)
        for s in cohort:
            for v in s.visits:
                w.writerow(
                    [s.id, str(v.month), v.diagnosis or ""]
                    + [_fmt(x) for x in v.imaging]
                    + [_fmt(x) for x in v.cognition]
                    + [_fmt(x) for x in v.composites]
                )


def _parse_float(cell: str, where: str) -> float:
    if cell == "":
        return np.nan
    try:
        return float(cell)
    except ValueError:
        raise IngestionError(f"{where}: cannot parse {cell!r} as a number") from None


def _rows(path: Path, required: list[str]):
    if not path.exists():
        raise IngestionError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise IngestionError(f"{path}: header is missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                raise IngestionError(f"{path}:{lineno}: wrong number of cells")
            yield lineno, row


def _parse_subject(path, lineno, row) -> Subject:
    group = row["group"] or None
    if group is not None and group not in GROUPS:
        raise IngestionError(f"{path}:{lineno}: column 'group': unknown group {group!r}")
    clinical = {}
    for col in CLINICAL_COLUMNS:
        cell = row[col]
        if col == "sex":
            clinical[col] = cell if cell != "" else None
        else:
            clinical[col] = _parse_float(cell, f"{path}:{lineno}: column {col!r}")
    icv = _parse_float(row["icv"], f"{path}:{lineno}: column 'icv'")
    return Subject(row["id"], clinical, icv, [], group=group, reason=row.get("reason", "") or "")


def _parse_visit(path, lineno, row) -> Visit:
    where = f"{path}:{lineno}"
    try:
        month = int(row["month"])
    except ValueError:
        raise IngestionError(f"{where}: column 'month': not an integer: {row['month']!r}") from None
    try:
        diagnosis = normalize_diagnosis(row["diagnosis"])
    except IngestionError as exc:
        raise IngestionError(f"{where}: column 'diagnosis': {exc}") from None
    imaging = [_parse_float(row[c], f"{where}: column {c!r}") for c in IMAGING_COLUMNS]
    cognition = [_parse_float(row[c], f"{where}: column {c!r}") for c in COGNITION_COLUMNS]
    composites = [_parse_float(row[c], f"{where}: column {c!r}") for c in COMPOSITE_COLUMNS]
    try:
        return Visit(month, diagnosis, imaging, cognition, composites)
    except IngestionError as exc:
        raise IngestionError(f"{where}: column 'month': {exc}") from None


def read_cohort(directory, select: bool = False) -> Cohort:
    """Read a cohort directory; with ``select=True`` also apply cohort selection."""
    base = Path(directory)
    subjects: dict[str, Subject] = {}
    spath = base / SUBJECTS_FILE
    for lineno, row in _rows(spath, SUBJECT_HEADER[:2] + CLINICAL_COLUMNS + ["icv"]):
        s = _parse_subject(spath, lineno, row)
        if s.id in subjects:
            raise IngestionError(f"{spath}:{lineno}: column 'id': duplicate subject {s.id!r}")
        subjects[s.id] = s
    vpath = base / VISITS_FILE
    for lineno, row in _rows(vpath, VISIT_HEADER):
        sid = row["id"]
        if sid not in subjects:
            raise IngestionError(f"{vpath}:{lineno}: column 'id': unknown subject {sid!r}")
        subjects[sid].visits.append(_parse_visit(vpath, lineno, row))
    cohort = Cohort(list(subjects.values()))
    return select_cohort(cohort) if select else cohort
