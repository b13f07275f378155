"""Per-timestep explanation traces: risk, forecast composites and relevance weights.

Relevance values are exported exactly as the sigmoid produced them. They are
not re-normalised per trajectory, so feeding the exported composites and
weights back through :func:`hmtl.model.main_head` reproduces the risk column.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hmtl.cohort.schema import COMPOSITE_DOMAINS
from hmtl.cohort.types import Cohort
from hmtl.data import SubjectArrays, prepare_subject
from hmtl.errors import ConfigurationError
from hmtl.model import ModelConfig, predict
from hmtl.preprocess import ScalerParams, composite_from_unit

log = logging.getLogger(__name__)

TRACE_HEADER = (
    ["subject_id", "month", "risk"]
    + [f"pred_{d}" for d in COMPOSITE_DOMAINS]
    + [f"true_{d}" for d in COMPOSITE_DOMAINS]
    + [f"relevance_{d}" for d in COMPOSITE_DOMAINS]
    + ["label"]
)
PLOT_HEADER = ["subject_id", "month", "series", "domain", "value"]


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "" if np.isnan(x) else repr(x)


@dataclass
class ExplanationTrace:
    subject_id: str
    rows: list  # dicts keyed by TRACE_HEADER

    def __len__(self) -> int:
        return len(self.rows)


def build_traces(items: list[SubjectArrays], params: dict, config: ModelConfig) -> list[ExplanationTrace]:
    """Eval-mode forward for each subject, one row per labelled timestep."""
    traces = []
    for item, p in zip(items, predict(items, params, config)):
        rows = []
        for t, month in enumerate(item.months):
            row = {"subject_id": item.id, "month": int(month)}
            row["risk"] = None if p.risk is None else p.risk[t]
            for c, d in enumerate(COMPOSITE_DOMAINS):
                k = config.aux_domains.index(d) if d in config.aux_domains else None
                row[f"pred_{d}"] = None if k is None else float(composite_from_unit(p.aux[t, k], d))
                row[f"true_{d}"] = item.aux_z[t, c] if item.aux_mask[t, c] > 0.5 else None
                row[f"relevance_{d}"] = None if p.relevance is None else p.relevance[t, c]
            row["label"] = int(item.y[t]) if item.y_mask[t] > 0.5 else None
            rows.append(row)
        traces.append(ExplanationTrace(item.id, rows))
    return traces


def _write_rows(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in rows:
            w.writerow([r["subject_id"], r["month"]] + [_fmt(r[k]) if k != "label" else ("" if r[k] is None else r[k])
                                                     for k in TRACE_HEADER[2:]])


def plot_records(trace: ExplanationTrace) -> list[tuple]:
    """Long format: one record per (timestep, series, domain)."""
    out = []
    for r in trace.rows:
        if r["risk"] is not None:
            out.append((r["subject_id"], r["month"], "risk", "", r["risk"]))
        for series in ("pred", "true", "relevance"):
            for d in COMPOSITE_DOMAINS:
                out.append((r["subject_id"], r["month"], series, d, r[f"{series}_{d}"]))
    return out


def export_explanations(params: dict, config: ModelConfig, scaler: ScalerParams, cohort: Cohort,
                        subject_ids, out_dir) -> list[Path]:
    """Write ``trace_<id>.csv`` per subject plus ``traces.csv`` and ``trace_plot.csv``.

    ``subject_ids`` may be ``None`` or ``"all"`` for every subject in the cohort.
    """
    known = cohort.ids()
    if subject_ids is None or subject_ids == "all":
        wanted = known
    else:
        wanted = list(subject_ids)
        known_set = set(known)
        missing = [s for s in wanted if s not in known_set]
        if missing:
            raise ConfigurationError(f"unknown subject id(s) {missing}; known ids: {', '.join(known)}")
    lookup = cohort.by_id()
    items, clamped = [], []
    for sid in wanted:
        item = prepare_subject(lookup[sid], scaler, clamped)
        if item is None:
            raise ConfigurationError(f"subject {sid} has fewer than two visits and cannot be explained")
        items.append(item)
    if sum(clamped):
        log.warning("clamped %d composite target(s) outside the domain range", sum(clamped))
    traces = build_traces(items, params, config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for tr in traces:
        path = out / f"trace_{tr.subject_id}.csv"
        _write_rows(path, tr.rows)
        written.append(path)
    combined = out / "traces.csv"
    _write_rows(combined, [r for tr in traces for r in tr.rows])
    plot = out / "trace_plot.csv"
    with open(plot, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_HEADER)
        for tr in traces:
            for rec in plot_records(tr):
                w.writerow(list(rec[:4]) + [_fmt(rec[4])])
    return written + [combined, plot]


def read_trace(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
