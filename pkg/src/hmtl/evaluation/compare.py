"""Model comparison on a shared test split and the modality ablation grid."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from hmtl.cohort.schema import COMPOSITE_DOMAINS, MODALITIES
from hmtl.data import SubjectArrays
from hmtl.errors import ConfigurationError, UndefinedMetricError
from hmtl.evaluation.metrics import auprc, auroc, regression_mse
from hmtl.evaluation.stats import bh_adjust, pivot_bootstrap_ci, resample_indices, wilcoxon_signed_rank
from hmtl.model import ModelConfig, predict
from hmtl.preprocess import composite_from_unit, composite_unit_scale

log = logging.getLogger(__name__)


@dataclass
class ModelEval:
    """Visit-level predictions of one model, grouped by test subject."""

    name: str
    config: ModelConfig
    ids: list
    risk: list  # per subject (T,) or None
    y: list
    y_mask: list
    aux_z: list  # per subject (T, 4) predicted Z, NaN for domains the model lacks
    target_z: list  # (T, 4) observed Z targets, NaN when unobserved

    def _pool(self, idx, arrays):
        return np.concatenate([arrays[i] for i in idx], axis=0)

    def risk_metric(self, fn):
        if self.risk[0] is None:
            return None

        def metric(idx):
            m = self._pool(idx, self.y_mask) > 0.5
            return fn(self._pool(idx, self.risk)[m], self._pool(idx, self.y)[m])

        return metric

    def mse_metric(self, c: int, unit: bool = False):
        """Masked MSE for domain ``c`` on the Z scale, or on [0, 1] when ``unit``."""
        if np.all(np.isnan(self.aux_z[0][:, c])):
            return None
        domain = COMPOSITE_DOMAINS[c]
        conv = (lambda z: composite_unit_scale(z, domain, warn=False)) if unit else (lambda z: z)

        def metric(idx):
            t = self._pool(idx, self.target_z)[:, c]
            mask = ~np.isnan(t)
            pred = conv(self._pool(idx, self.aux_z)[:, c])
            return float(regression_mse(pred, conv(np.nan_to_num(t)), mask)[0])

        return metric


def evaluate_model(name: str, items: list[SubjectArrays], params: dict, config: ModelConfig) -> ModelEval:
    preds = predict(items, params, config)
    aux_z = []
    for p in preds:
        z = np.full((len(p.months), 4), np.nan)
        if p.aux is not None:
            for k, d in enumerate(config.aux_domains):
                c = COMPOSITE_DOMAINS.index(d)
                z[:, c] = composite_from_unit(p.aux[:, k], d)
        aux_z.append(z)
    return ModelEval(
        name=name,
        config=config,
        ids=[it.id for it in items],
        risk=[p.risk for p in preds],
        y=[it.y for it in items],
        y_mask=[it.y_mask for it in items],
        aux_z=aux_z,
        target_z=[it.aux_z for it in items],
    )


def _same_test_set(evals: list[ModelEval]) -> None:
    ref = evals[0]
    for e in evals[1:]:
        if e.ids != ref.ids or any(
            not np.array_equal(a, b) for a, b in zip(e.y_mask, ref.y_mask)
        ) or any(not np.array_equal(a, b) for a, b in zip(e.y, ref.y)):
            raise ConfigurationError(f"model {e.name!r} was evaluated on a different test set than {ref.name!r}")


def _labels_ok(ref: ModelEval):
    # only domains observed somewhere in the full test set must stay observed
    needed = (~np.isnan(np.concatenate(ref.target_z))).any(axis=0)

    def ok(idx):
        m = np.concatenate([ref.y_mask[i] for i in idx]) > 0.5
        y = np.concatenate([ref.y[i] for i in idx])[m] > 0.5
        if y.all() or not y.any():
            return False
        t = np.concatenate([ref.target_z[i] for i in idx])
        return bool(np.all((~np.isnan(t)).any(axis=0)[needed]))

    return ok


METRICS = (
    ("auroc", "auprc")
    + tuple(f"mse_{d}" for d in COMPOSITE_DOMAINS)
    + tuple(f"mse_unit_{d}" for d in COMPOSITE_DOMAINS)
)


@dataclass
class EvalReport:
    models: list = field(default_factory=list)  # dicts: name, config, metrics {metric: {point, lower, upper}}
    comparisons: list = field(default_factory=list)  # dicts: model, metric, p_raw, p_adj, degenerate, method
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"meta": self.meta, "models": self.models, "comparisons": self.comparisons}


def _metric_fns(e: ModelEval) -> dict:
    fns = {"auroc": e.risk_metric(auroc), "auprc": e.risk_metric(auprc)}
    for c, d in enumerate(COMPOSITE_DOMAINS):
        fns[f"mse_{d}"] = e.mse_metric(c)
    for c, d in enumerate(COMPOSITE_DOMAINS):
        fns[f"mse_unit_{d}"] = e.mse_metric(c, unit=True)
    return fns


def compare_models(evals: list[ModelEval], B: int = 200, seed: int = 0, proposed: str | None = None,
                   alpha: float = 0.05, threads: int = 1) -> EvalReport:
    """Metrics with pivot CIs for every model, and paired tests against ``proposed``.

    All models share the same bootstrap draws, so resample ``b`` scores every
    model on the same participants; the Wilcoxon test pairs those values.
    """
    if not evals:
        raise ConfigurationError("nothing to compare")
    _same_test_set(evals)
    names = [e.name for e in evals]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"model names must be unique, got {names}")
    proposed = proposed or names[-1]
    if proposed not in names:
        raise ConfigurationError(f"proposed model {proposed!r} not among {names}")
    n = len(evals[0].ids)
    indices = resample_indices(n, B, seed, _labels_ok(evals[0]))
    report = EvalReport(meta={
        "seed": seed,
        "B": B,
        "alpha": alpha,
        "n_test_subjects": n,
        "n_test_visits": int(sum(m.sum() for m in evals[0].y_mask)),
        "proposed": proposed,
        "wilcoxon_pairing": "bootstrap resamples (shared indices)",
    })
    samples = {}
    for e in evals:
        metrics = {}
        for key, fn in _metric_fns(e).items():
            if fn is None:
                metrics[key] = None
                continue
            r = pivot_bootstrap_ci(fn, n, alpha=alpha, indices=indices, threads=threads)
            metrics[key] = {"point": r.point, "lower": r.lower, "upper": r.upper}
            samples[(e.name, key)] = r.samples
        report.models.append({"name": e.name, "config": e.config.to_dict(), "metrics": metrics})
    for key in ("auroc", "auprc"):
        if (proposed, key) not in samples:
            continue
        rows = []
        for e in evals:
            if e.name == proposed or (e.name, key) not in samples:
                continue
            w = wilcoxon_signed_rank(samples[(proposed, key)], samples[(e.name, key)])
            rows.append({"model": e.name, "metric": key, "p_raw": w.p, "degenerate": w.degenerate, "method": w.method})
        if rows:
            adj = bh_adjust([r["p_raw"] for r in rows])
            for r, q in zip(rows, adj):
                r["p_adj"] = float(q)
        report.comparisons.extend(rows)
    return report


def modality_subsets() -> list[tuple]:
    """All 7 non-empty subsets in a fixed order (singles, pairs, all three)."""
    return [c for k in (1, 2, 3) for c in itertools.combinations(MODALITIES, k)]


def run_ablation(base: ModelConfig, train_items, val_items, test_items, train_config, subsets=None,
                 B: int = 200, seed: int = 0, progress=None) -> list[dict]:
    """Train and evaluate one model per modality subset with identical seeds and splits."""
    from hmtl.training import train_model

    subsets = modality_subsets() if subsets is None else [tuple(s) for s in subsets]
    rows = []
    for subset in subsets:
        cfg = ModelConfig.from_dict({**base.to_dict(), "modalities": list(subset)})
        result = train_model(train_items, val_items, cfg, train_config)
        e = evaluate_model("+".join(cfg.modalities), test_items, result.params, cfg)
        rep = compare_models([e], B=B, seed=seed)
        row = {"modalities": list(cfg.modalities), "config": cfg.to_dict(), "metrics": rep.models[0]["metrics"]}
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows
