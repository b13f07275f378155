"""Cross-sectional logistic-regression comparator.

Each visit is scored on its own: current imaging and cognition values (0 where
unobserved) with their observation flags, plus the clinical vector. There is no
recurrence and no imputation, so it shows what the sequence model adds.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from hmtl.autodiff import AdamState, Tape, Tensor, adam_step, column, linear, loss_bce_masked, sigmoid
from hmtl.data import SubjectArrays
from hmtl.errors import ConfigurationError
from hmtl.evaluation.compare import ModelEval


@dataclass
class LogisticConfig:
    epochs: int = 300
    lr: float = 0.05
    l2: float = 1e-3
    seed: int = 0
    mode: str = "logistic"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LogisticModel:
    config: LogisticConfig
    W: np.ndarray  # (F, 1)
    b: np.ndarray  # (1,)


def visit_features(item: SubjectArrays) -> np.ndarray:
    """``(T, F)`` design matrix for one subject."""
    T = item.T
    clin = np.broadcast_to(item.clinical, (T, item.clinical.size))
    return np.hstack([item.imaging, item.imaging_mask, item.cognition, item.cognition_mask, clin])


def _stack(items):
    X = np.vstack([visit_features(it) for it in items])
    y = np.concatenate([it.y for it in items])
    m = np.concatenate([it.y_mask for it in items])
    return X, y, m


def fit_logistic(items: list[SubjectArrays], config: LogisticConfig | None = None) -> LogisticModel:
    """Full-batch Adam on the masked visit-level cross-entropy plus an L2 penalty."""
    config = config or LogisticConfig()
    if not items:
        raise ConfigurationError("training split is empty")
    X, y, m = _stack(items)
    rng = np.random.default_rng(config.seed)
    params = {
        "W": Tensor(rng.normal(scale=0.01, size=(X.shape[1], 1)), requires_grad=True),
        "b": Tensor(np.zeros(1), requires_grad=True),
    }
    state = AdamState(lr=config.lr, weight_decay=config.l2)
    for _ in range(config.epochs):
        with Tape() as tape:
            p = column(sigmoid(linear(X, params["W"], params["b"])), 0)
            loss = loss_bce_masked(p, y, m)
        gW, gb = tape.gradients(loss, [params["W"], params["b"]])
        adam_step(params, {"W": gW, "b": gb}, state)
    return LogisticModel(config, params["W"].data.copy(), params["b"].data.copy())


def predict_logistic(model: LogisticModel, items: list[SubjectArrays]) -> list[np.ndarray]:
    out = []
    for it in items:
        z = visit_features(it) @ model.W[:, 0] + model.b[0]
        out.append(1.0 / (1.0 + np.exp(-z)))
    return out


def evaluate_logistic(name: str, items: list[SubjectArrays], model: LogisticModel) -> ModelEval:
    """Wrap predictions for :func:`hmtl.evaluation.compare_models` (no composite forecasts)."""
    return ModelEval(
        name=name,
        config=model.config,
        ids=[it.id for it in items],
        risk=predict_logistic(model, items),
        y=[it.y for it in items],
        y_mask=[it.y_mask for it in items],
        aux_z=[np.full((it.T, 4), np.nan) for it in items],
        target_z=[it.aux_z for it in items],
    )
