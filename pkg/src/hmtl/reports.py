"""Delimited-text and JSON writers for evaluation reports, ablations and training history."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from hmtl.cohort.schema import COMPOSITE_DOMAINS

HISTORY_HEADER = ["epoch", "train_loss", "val_loss", "main_loss", "aux_loss", "imp_loss"]
MSE_KEYS = [f"mse_{d}" for d in COMPOSITE_DOMAINS]


def _num(x, digits=6) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def _ci_cells(m) -> list[str]:
    if m is None:
        return ["", "", ""]
    return [_num(m["point"]), _num(m["lower"]), _num(m["upper"])]


def _csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_history(history: list[dict], path) -> None:
    _csv(Path(path), HISTORY_HEADER, [[r["epoch"]] + [repr(float(r[k])) for k in HISTORY_HEADER[1:]] for r in history])


def comparison_rows(report) -> list[list[str]]:
    """Progression table: one row per model; the proposed row shows '-' for p-values."""
    d = report.to_dict() if hasattr(report, "to_dict") else report
    proposed = d["meta"]["proposed"]
    pvals = {(c["model"], c["metric"]): c for c in d["comparisons"]}
    rows = []
    for m in d["models"]:
        row = [m["name"]]
        for key in ("auroc", "auprc"):
            row += _ci_cells(m["metrics"].get(key))
            if m["name"] == proposed:
                row += ["-", "-"]
            else:
                c = pvals.get((m["name"], key))
                row += ["", ""] if c is None else [_num(c["p_raw"], 6), _num(c["p_adj"], 6)]
        rows.append(row)
    return rows


COMPARISON_HEADER = [
    "model",
    "auroc", "auroc_lower", "auroc_upper", "auroc_p", "auroc_p_fdr",
    "auprc", "auprc_lower", "auprc_upper", "auprc_p", "auprc_p_fdr",
]
MSE_HEADER = ["model"] + [f"{k}{s}" for k in MSE_KEYS for s in ("", "_lower", "_upper")]


def write_eval_report(report, out_dir) -> list[Path]:
    """``report.json``, ``progression.csv`` (AUROC/AUPRC with p-values) and ``composites.csv`` (Z-scale MSE)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    d = report.to_dict()
    write_json(out / "report.json", d)
    _csv(out / "progression.csv", COMPARISON_HEADER, comparison_rows(d))
    mse_rows = []
    for m in d["models"]:
        row = [m["name"]]
        for k in MSE_KEYS:
            row += _ci_cells(m["metrics"].get(k))
        mse_rows.append(row)
    _csv(out / "composites.csv", MSE_HEADER, mse_rows)
    return [out / "report.json", out / "progression.csv", out / "composites.csv"]


ABLATION_HEADER = (
    ["modalities"]
    + [f"{k}{s}" for k in ("auroc", "auprc") for s in ("", "_lower", "_upper")]
    + MSE_HEADER[1:]
)


def write_ablation(rows: list[dict], out_dir, meta: dict | None = None) -> list[Path]:
    """One row per modality subset with every metric and its interval."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = []
    for r in rows:
        line = ["+".join(r["modalities"])]
        for k in ("auroc", "auprc") + tuple(MSE_KEYS):
            line += _ci_cells(r["metrics"].get(k))
        table.append(line)
    _csv(out / "ablation.csv", ABLATION_HEADER, table)
    write_json(out / "ablation.json", {"meta": meta or {}, "rows": rows})
    return [out / "ablation.csv", out / "ablation.json"]
