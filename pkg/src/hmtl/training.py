"""Joint objective, mini-batch training loop and checkpoint files."""

from __future__ import annotations

import io
import json
import logging
import os
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hmtl.autodiff import AdamState, Tape, Tensor, add, adam_step, column, loss_bce_masked, loss_mse_masked, scale
from hmtl.cohort.schema import COMPOSITE_DOMAINS
from hmtl.data import Batch, SubjectArrays, collate
from hmtl.errors import CheckpointError, ConfigurationError, DimensionError
from hmtl.model import ModelConfig, ModelOutput, forward, init_params
from hmtl.preprocess import ScalerParams

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = "hmtl-checkpoint/1"


@dataclass
class LossWeights:
    lambda_main: float = 1.0
    lambda_aux: float = 0.8
    lambda_imp: float = 0.05

    def __post_init__(self):
        w = (self.lambda_main, self.lambda_aux, self.lambda_imp)
        if any(x < 0 for x in w) or not any(x > 0 for x in w):
            raise ConfigurationError(f"loss weights must be >= 0 with at least one > 0, got {w}")


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 128
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    seed: int = 0
    patience: int | None = None
    loss_weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if isinstance(self.loss_weights, dict):
            self.loss_weights = LossWeights(**self.loss_weights)
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if self.patience is not None and self.patience < 1:
            raise ConfigurationError("patience must be >= 1 when set")

    def to_dict(self) -> dict:
        return asdict(self)


def joint_loss(out: ModelOutput, batch: Batch, weights: LossWeights, config: ModelConfig):
    """Weighted sum of BCE (risk), per-domain MSEs (summed) and imputation losses.

    Returns the scalar tensor and a dict of the unweighted component values.
    """
    B, T = batch.shape
    terms = []
    parts = {"main": 0.0, "aux": 0.0, "imp": 0.0}
    if out.risk is not None:
        if out.risk.shape != (B, T):
            raise DimensionError(f"risk has shape {out.risk.shape}, labels {(B, T)}")
        main = loss_bce_masked(out.risk, batch.y, batch.y_mask)
        parts["main"] = main.item()
        terms.append(scale(main, weights.lambda_main))
    if out.aux is not None:
        aux_total = None
        for k, domain in enumerate(config.aux_domains):
            c = COMPOSITE_DOMAINS.index(domain)
            term = loss_mse_masked(column(out.aux, k), batch.aux[..., c], batch.aux_mask[..., c])
            aux_total = term if aux_total is None else add(aux_total, term)
        parts["aux"] = aux_total.item()
        terms.append(scale(aux_total, weights.lambda_aux))
    if out.imp_losses:
        imp_total = None
        for v in out.imp_losses.values():
            imp_total = v if imp_total is None else add(imp_total, v)
        parts["imp"] = imp_total.item()
        terms.append(scale(imp_total, weights.lambda_imp))
    total = terms[0]
    for t in terms[1:]:
        total = add(total, t)
    return total, parts


def batch_gradients(batch: Batch, params: dict, config: ModelConfig, weights: LossWeights, mode="train", rng=None):
    """Loss value, components and ``{name: gradient}`` for one batch."""
    with Tape() as tape:
        out = forward(batch, params, config, mode=mode, rng=rng)
        loss, parts = joint_loss(out, batch, weights, config)
    names = list(params)
    grads = tape.gradients(loss, [params[n] for n in names])
    return loss.item(), parts, dict(zip(names, grads))


def evaluate_loss(items: list[SubjectArrays], params, config, weights, batch_size=128) -> float:
    """Joint loss in eval mode, averaged over batches weighted by subject count."""
    if not items:
        return float("nan")
    total = 0.0
    for start in range(0, len(items), batch_size):
        chunk = items[start : start + batch_size]
        out = forward(collate(chunk), params, config, mode="eval")
        loss, _ = joint_loss(out, collate(chunk), weights, config)
        total += loss.item() * len(chunk)
    return total / len(items)


@dataclass
class TrainResult:
    params: dict
    history: list
    best_epoch: int


def _snapshot(params):
    return {k: v.data.copy() for k, v in params.items()}


def train_model(
    train: list[SubjectArrays],
    val: list[SubjectArrays],
    model_config: ModelConfig,
    train_config: TrainConfig,
    params: dict | None = None,
    progress=None,
) -> TrainResult:
    """Adam over shuffled subject-level mini-batches.

    Final parameters come from the last epoch, or from the best validation
    epoch when ``patience`` is set. ``progress(epoch, row)`` is called after
    each epoch if given.
    """
    if not train:
        raise ConfigurationError("training split is empty")
    if params is None:
        params = init_params(model_config)
    shuffle_seq, dropout_seq = np.random.SeedSequence(train_config.seed).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    state = AdamState(
        lr=train_config.lr,
        beta1=train_config.beta1,
        beta2=train_config.beta2,
        weight_decay=train_config.weight_decay,
    )
    weights = train_config.loss_weights
    history = []
    best = (np.inf, 0, None)
    stale = 0
    for epoch in range(1, train_config.epochs + 1):
        order = shuffle_rng.permutation(len(train))
        sums = {"loss": 0.0, "main": 0.0, "aux": 0.0, "imp": 0.0}
        for start in range(0, len(train), train_config.batch_size):
            chunk = [train[i] for i in order[start : start + train_config.batch_size]]
            loss, parts, grads = batch_gradients(collate(chunk), params, model_config, weights, rng=dropout_rng)
            adam_step(params, grads, state)
            frac = len(chunk) / len(train)
            sums["loss"] += loss * frac
            for k in parts:
                sums[k] += parts[k] * frac
        val_loss = evaluate_loss(val, params, model_config, weights) if val else float("nan")
        row = {
            "epoch": epoch,
            "train_loss": sums["loss"],
            "val_loss": val_loss,
            "main_loss": sums["main"],
            "aux_loss": sums["aux"],
            "imp_loss": sums["imp"],
        }
        history.append(row)
        if progress is not None:
            progress(epoch, row)
        if train_config.patience is not None and val:
            if val_loss < best[0]:
                best = (val_loss, epoch, _snapshot(params))
                stale = 0
            else:
                stale += 1
                if stale >= train_config.patience:
                    log.info("early stop at epoch %d (best %d)", epoch, best[1])
                    break
    best_epoch = history[-1]["epoch"]
    if train_config.patience is not None and best[2] is not None:
        for k, arr in best[2].items():
            params[k].data[...] = arr
        best_epoch = best[1]
    return TrainResult(params, history, best_epoch)


# checkpoints ---------------------------------------------------------------

_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def _zip_write(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_STORED
    zf.writestr(info, payload)


def save_checkpoint(path, params: dict, config: ModelConfig, scaler: ScalerParams | None = None, seed: int | None = None, extra: dict | None = None) -> None:
    """Write config, every parameter tensor, scaler and seed to one zip file.

    Written to a temporary name and renamed, so readers never see a partial file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "seed": seed,
        "params": list(params),
        "extra": extra or {},
    }
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w") as zf:
        _zip_write(zf, "meta.json", json.dumps(meta, indent=1, sort_keys=True).encode("utf-8"))
        if scaler is not None:
            _zip_write(zf, "scaler.json", scaler.to_json().encode("utf-8"))
        for name, t in params.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(t.data), allow_pickle=False)
            _zip_write(zf, f"params/{name}.npy", buf.getvalue())
    os.replace(tmp, path)


@dataclass
class Checkpoint:
    params: dict
    config: ModelConfig
    scaler: ScalerParams | None
    seed: int | None
    extra: dict


def load_checkpoint(path) -> Checkpoint:
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json").decode("utf-8"))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(
                    f"{path}: checkpoint version {meta.get('version')!r} is incompatible with {CHECKPOINT_VERSION!r}"
                )
            config = ModelConfig.from_dict(meta["config"])
            scaler = None
            if "scaler.json" in zf.namelist():
                scaler = ScalerParams.from_json(zf.read("scaler.json").decode("utf-8"))
            params = {}
            for name in meta["params"]:
                arr = np.lib.format.read_array(io.BytesIO(zf.read(f"params/{name}.npy")), allow_pickle=False)
                params[name] = Tensor(arr, requires_grad=True, name=name)
    except CheckpointError:
        raise
    except (OSError, KeyError, ValueError, zipfile.BadZipFile, EOFError) as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint ({exc})") from None
    expected = set(init_params_names(config))
    if set(params) != expected:
        raise CheckpointError(f"{path}: parameter set does not match its model config")
    return Checkpoint(params, config, scaler, meta.get("seed"), meta.get("extra", {}))


def init_params_names(config: ModelConfig) -> list[str]:
    small = ModelConfig(**{**config.to_dict(), "lstm_width": 1, "head_widths": [1] * len(config.head_widths),
                           "clinical_widths": [1] * len(config.clinical_widths)})
    return list(init_params(small))
