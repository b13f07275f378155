"""Multimodal hierarchical multi-task network and its baseline wirings.

Modes:

``hierarchical``
    auxiliary head (4 next-visit composites) and relevance head both read the
    joint embedding; risk = sigmoid(w . (aux * relevance) + b).
``parallel_mt``
    auxiliary head and an independent main head, both on the embedding.
``single_task``
    only the head for ``single_task_target`` (progression or one composite).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from hmtl.autodiff import (
    Tensor,
    concat,
    dropout,
    elementwise_map,
    linear,
    mul,
    repeat_time,
    reshape,
)
from hmtl.cohort.schema import COMPOSITE_DOMAINS, MODALITIES
from hmtl.data import Batch, SubjectArrays, collate
from hmtl.errors import ConfigurationError, DimensionError, UsageError
from hmtl.imputer import birits_impute, init_rits_params
from hmtl.nn import init_mlp, mlp

MODES = ("hierarchical", "parallel_mt", "single_task")
TARGETS = ("progression",) + COMPOSITE_DOMAINS


@dataclass
class ModelConfig:
    modalities: tuple = MODALITIES
    mode: str = "hierarchical"
    single_task_target: str = "progression"
    lstm_layers: int = 3
    lstm_width: int = 128
    head_widths: tuple = (256, 12, 64)
    clinical_widths: tuple = (64, 64)
    dropout: float = 0.5
    n_imaging: int = 90
    n_cognition: int = 13
    n_clinical: int = 18
    seed: int = 0

    def __post_init__(self):
        mods = tuple(self.modalities)
        if not mods:
            raise ConfigurationError("at least one modality must be active")
        unknown = [m for m in mods if m not in MODALITIES]
        if unknown:
            raise ConfigurationError(f"unknown modalities {unknown}; choose from {MODALITIES}")
        self.modalities = tuple(m for m in MODALITIES if m in mods)
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.single_task_target not in TARGETS:
            raise ConfigurationError(f"unknown single-task target {self.single_task_target!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        self.head_widths = tuple(int(w) for w in self.head_widths)
        self.clinical_widths = tuple(int(w) for w in self.clinical_widths)
        if self.lstm_layers < 1 or self.lstm_width < 1 or min(self.head_widths + self.clinical_widths) < 1:
            raise ConfigurationError("layer counts and widths must be positive")

    @property
    def has_main(self) -> bool:
        return self.mode != "single_task" or self.single_task_target == "progression"

    @property
    def aux_domains(self) -> tuple:
        if self.mode == "single_task":
            t = self.single_task_target
            return () if t == "progression" else (t,)
        return COMPOSITE_DOMAINS

    @property
    def embedding_width(self) -> int:
        widths = {
            "imaging": self.lstm_width,
            "cognition": self.lstm_width,
            "clinical": self.clinical_widths[-1],
        }
        return sum(widths[m] for m in self.modalities)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modalities"] = list(self.modalities)
        d["head_widths"] = list(self.head_widths)
        d["clinical_widths"] = list(self.clinical_widths)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown model config keys {sorted(extra)}")
        return cls(**d)


@dataclass
class ModelOutput:
    risk: Tensor | None  # (B, T)
    aux: Tensor | None  # (B, T, k)
    relevance: Tensor | None  # (B, T, 4)
    imp_losses: dict = field(default_factory=dict)
    completed: dict = field(default_factory=dict)


def init_params(config: ModelConfig, seed: int | None = None) -> dict:
    """All learnable tensors, keyed by dotted name, drawn from one seeded stream."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    params: dict = {}
    widths = [config.lstm_width] * config.lstm_layers
    dims = {"imaging": config.n_imaging, "cognition": config.n_cognition}
    for mod in ("imaging", "cognition"):
        if mod in config.modalities:
            init_rits_params(rng, params, f"{mod}.fwd", dims[mod], widths)
            init_rits_params(rng, params, f"{mod}.bwd", dims[mod], widths)
    if "clinical" in config.modalities:
        init_mlp(rng, params, "clinical", (config.n_clinical,) + config.clinical_widths)
    E = config.embedding_width
    head = (E,) + config.head_widths
    if config.aux_domains:
        init_mlp(rng, params, "aux", head + (len(config.aux_domains),))
    if config.mode == "hierarchical":
        init_mlp(rng, params, "rel", head + (4,))
        init_mlp(rng, params, "main", (4, 1))
    elif config.has_main:
        init_mlp(rng, params, "main", head + (1,))
    return params


def embed_clinical(clinical, params: dict, config: ModelConfig, steps: int) -> Tensor:
    """Two tanh dense layers on the 18 clinical slots, replicated over ``steps``."""
    x = np.asarray(clinical, dtype=float) if not isinstance(clinical, Tensor) else clinical
    if x.shape[-1] != config.n_clinical:
        raise DimensionError(f"clinical input has width {x.shape[-1]}, expected {config.n_clinical}")
    e = mlp(x, params, "clinical", len(config.clinical_widths), hidden="tanh", out="tanh")
    return repeat_time(e, steps)


def joint_embedding(branches: dict, config: ModelConfig) -> Tensor:
    """Concatenate active branches in canonical (imaging, cognition, clinical) order."""
    extra = [k for k in branches if k not in config.modalities]
    if extra:
        raise ConfigurationError(f"inputs supplied for inactive modalities {extra}")
    missing = [m for m in config.modalities if m not in branches]
    if missing:
        raise ConfigurationError(f"no input for active modalities {missing}")
    return concat([branches[m] for m in config.modalities], axis=-1)


def aux_head(flat, params: dict, config: ModelConfig) -> Tensor:
    return mlp(flat, params, "aux", len(config.head_widths) + 1, hidden="tanh", out="sigmoid")


def relevance_head(flat, params: dict, config: ModelConfig) -> Tensor:
    return mlp(flat, params, "rel", len(config.head_widths) + 1, hidden="tanh", out="sigmoid")


def main_head(aux, relevance, params: dict, config: ModelConfig | None = None) -> Tensor:
    """Progression risk from the relevance-weighted composites (hierarchical mode)."""
    if config is not None and config.mode != "hierarchical":
        raise UsageError(f"main_head combines composites only in hierarchical mode, not {config.mode!r}")
    weighted = mul(aux, relevance)
    lead = weighted.shape[:-1]
    flat = reshape(weighted, (-1, 4))
    p = elementwise_map(linear(flat, params["main.0.W"], params["main.0.b"]), "sigmoid")
    return reshape(p, lead)


def forward(batch: Batch, params: dict, config: ModelConfig, mode: str = "eval", rng=None) -> ModelOutput:
    """Full network on a padded batch. Records on the active tape, if any."""
    B, T = batch.shape
    branches = {}
    imp, completed = {}, {}
    for mod in ("imaging", "cognition"):
        if mod in config.modalities:
            if mod not in batch.series:
                raise ConfigurationError(f"batch has no {mod} data but the modality is active")
            out = birits_impute(batch.series[mod], batch.rev_index, batch.time_mask, params, mod, config.lstm_layers)
            branches[mod] = out.hidden
            imp[mod] = out.imp_loss
            completed[mod] = out.completed
    if "clinical" in config.modalities:
        if batch.clinical is None:
            raise ConfigurationError("batch has no clinical data but the modality is active")
        branches["clinical"] = embed_clinical(batch.clinical, params, config, T)
    joint = joint_embedding(branches, config)
    flat = reshape(joint, (B * T, config.embedding_width))
    flat = dropout(flat, config.dropout, mode, rng)

    risk = aux = rel = None
    if config.aux_domains:
        aux = aux_head(flat, params, config)
    if config.mode == "hierarchical":
        rel = relevance_head(flat, params, config)
        risk = main_head(aux, rel, params)
    elif config.has_main:
        risk = mlp(flat, params, "main", len(config.head_widths) + 1, hidden="tanh", out="sigmoid")
    if risk is not None:
        risk = reshape(risk, (B, T))
    if aux is not None:
        aux = reshape(aux, (B, T, len(config.aux_domains)))
    if rel is not None:
        rel = reshape(rel, (B, T, 4))
    return ModelOutput(risk, aux, rel, imp, completed)


@dataclass
class SubjectPrediction:
    id: str
    months: np.ndarray
    risk: np.ndarray | None  # (T,)
    aux: np.ndarray | None  # (T, k) unit scale
    relevance: np.ndarray | None  # (T, 4)
    imp_loss: float


def forward_subject(item: SubjectArrays, params: dict, config: ModelConfig, mode: str = "eval", rng=None) -> SubjectPrediction:
    return predict([item], params, config, mode=mode, rng=rng)[0]


def predict(items: list[SubjectArrays], params: dict, config: ModelConfig, batch_size: int = 128, mode: str = "eval", rng=None) -> list[SubjectPrediction]:
    """Per-subject outputs trimmed to each subject's own length."""
    preds = []
    for start in range(0, len(items), batch_size):
        chunk = items[start : start + batch_size]
        batch = collate(chunk)
        out = forward(batch, params, config, mode=mode, rng=rng)
        imp = float(sum(v.item() for v in out.imp_losses.values()))
        for b, it in enumerate(chunk):
            L = it.T
            preds.append(
                SubjectPrediction(
                    id=it.id,
                    months=it.months,
                    risk=None if out.risk is None else out.risk.data[b, :L].copy(),
                    aux=None if out.aux is None else out.aux.data[b, :L].copy(),
                    relevance=None if out.relevance is None else out.relevance.data[b, :L].copy(),
                    imp_loss=imp,
                )
            )
    return preds
