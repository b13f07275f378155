import dataclasses
import math

import numpy as np
import pytest

from hmtl.autodiff import PROB_EPS, Tensor, loss_bce_masked, loss_mse_masked
from hmtl.data import collate
from hmtl.errors import CheckpointError, ConfigurationError, DimensionError
from hmtl.model import ModelOutput, forward, init_params, predict
from hmtl.training import (
    LossWeights,
    TrainConfig,
    joint_loss,
    load_checkpoint,
    save_checkpoint,
    train_model,
)
from conftest import tiny_config, truncate


def one_step_batch(item):
    batch = collate([truncate(item, 1)])
    batch.y[...] = 1.0
    batch.y_mask[...] = 1.0
    batch.aux[...] = np.array([0.2, 0.4, 0.6, 0.8])
    batch.aux_mask[...] = 1.0
    return batch


def test_loss_weights_validation():
    assert dataclasses.astuple(LossWeights()) == (1.0, 0.8, 0.05)
    with pytest.raises(ConfigurationError):
        LossWeights(0, 0, 0)
    with pytest.raises(ConfigurationError):
        LossWeights(-1, 1, 1)
    with pytest.raises(ConfigurationError):
        TrainConfig(epochs=0)
    assert TrainConfig(loss_weights={"lambda_main": 2, "lambda_aux": 0, "lambda_imp": 0}).loss_weights.lambda_main == 2


def test_joint_loss_single_step_is_ln2(small_items):
    batch = one_step_batch(small_items["train"][0])
    out = ModelOutput(Tensor(np.array([[0.5]])), Tensor(batch.aux.copy()), None, {"imaging": Tensor(0.0)})
    loss, parts = joint_loss(out, batch, LossWeights(), tiny_config())
    assert loss.item() == pytest.approx(math.log(2), abs=1e-15)
    assert parts == {"main": pytest.approx(math.log(2), abs=1e-15), "aux": 0.0, "imp": 0.0}


def test_joint_loss_perfect_prediction_is_zero(small_items):
    batch = one_step_batch(small_items["train"][0])
    out = ModelOutput(Tensor(np.array([[1.0]])), Tensor(batch.aux.copy()), None, {"imaging": Tensor(0.0)})
    # probabilities are clipped away from 0/1, so "zero" means at the clip floor
    loss = joint_loss(out, batch, LossWeights(), tiny_config())[0].item()
    assert loss == pytest.approx(-math.log(1 - PROB_EPS), rel=1e-9)


def test_joint_loss_decomposition(tiny_items):
    cfg = tiny_config(dropout=0.0)
    batch = collate(tiny_items)
    out = forward(batch, init_params(cfg), cfg)
    w = LossWeights(0.7, 1.3, 0.25)
    loss, parts = joint_loss(out, batch, w, cfg)
    bce = loss_bce_masked(out.risk.data, batch.y, batch.y_mask).item()
    aux = sum(
        loss_mse_masked(out.aux.data[..., c], batch.aux[..., c], batch.aux_mask[..., c]).item() for c in range(4)
    )
    imp = sum(v.item() for v in out.imp_losses.values())
    assert loss.item() == pytest.approx(0.7 * bce + 1.3 * aux + 0.25 * imp, abs=1e-12)
    assert parts["main"] == pytest.approx(bce, abs=1e-12) and parts["aux"] == pytest.approx(aux, abs=1e-12)
    only_main = joint_loss(out, batch, LossWeights(1, 0, 0), cfg)[0].item()
    assert only_main == pytest.approx(bce, abs=1e-12)


def test_joint_loss_shape_mismatch(tiny_items):
    batch = collate(tiny_items)
    out = ModelOutput(Tensor(np.zeros((2, 2))), None, None)
    with pytest.raises(DimensionError):
        joint_loss(out, batch, LossWeights(), tiny_config())


def test_empty_training_split():
    with pytest.raises(ConfigurationError):
        train_model([], [], tiny_config(), TrainConfig(epochs=1))


def _train(items, epochs=2, seed=0, **kw):
    cfg = tiny_config(lstm_layers=1, lstm_width=6)
    return cfg, train_model(items["train"][:16], items["val"][:6], cfg, TrainConfig(epochs=epochs, batch_size=8, seed=seed, **kw))


def test_training_is_deterministic(small_items):
    _, a = _train(small_items)
    _, b = _train(small_items)
    assert all(np.array_equal(a.params[k].data, b.params[k].data) for k in a.params)
    assert a.history == b.history
    _, c = _train(small_items, seed=1)
    assert any(not np.array_equal(a.params[k].data, c.params[k].data) for k in a.params)
    assert [r["epoch"] for r in a.history] == [1, 2]
    assert set(a.history[0]) == {"epoch", "train_loss", "val_loss", "main_loss", "aux_loss", "imp_loss"}


def test_training_loss_decreases_by_epoch_50(small_items):
    cfg = tiny_config(lstm_layers=1, lstm_width=8, head_widths=(8, 4, 8), dropout=0.0)
    res = train_model(small_items["train"], [], cfg, TrainConfig(epochs=50, batch_size=32, lr=0.003))
    assert res.history[-1]["train_loss"] < res.history[0]["train_loss"]


def test_patience_restores_best_epoch(small_items):
    _, res = _train(small_items, epochs=6, patience=1, lr=0.05)
    vals = [r["val_loss"] for r in res.history]
    assert res.best_epoch == 1 + int(np.argmin(vals))


def test_checkpoint_roundtrip(tmp_path, small_items):
    cfg, res = _train(small_items, epochs=1)
    path = tmp_path / "m.hmtl"
    save_checkpoint(path, res.params, cfg, scaler=small_items["scaler"], seed=42, extra={"note": "x"})
    ck = load_checkpoint(path)
    assert ck.config == cfg and ck.seed == 42 and ck.extra == {"note": "x"}
    assert ck.scaler == small_items["scaler"]
    assert list(ck.params) == list(res.params)
    assert all(np.array_equal(ck.params[k].data, res.params[k].data) for k in res.params)
    before = predict(small_items["test"], res.params, cfg)
    after = predict(small_items["test"], ck.params, ck.config)
    assert all(np.array_equal(a.risk, b.risk) and np.array_equal(a.aux, b.aux) for a, b in zip(before, after))
    # identical content gives identical bytes
    save_checkpoint(tmp_path / "again.hmtl", ck.params, ck.config, scaler=ck.scaler, seed=42, extra={"note": "x"})
    assert (tmp_path / "again.hmtl").read_bytes() == path.read_bytes()


def test_truncated_and_foreign_checkpoints(tmp_path, small_items):
    cfg = tiny_config()
    path = tmp_path / "m.hmtl"
    save_checkpoint(path, init_params(cfg), cfg)
    data = path.read_bytes()
    bad = tmp_path / "cut.hmtl"
    bad.write_bytes(data[: len(data) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    (tmp_path / "junk.hmtl").write_text("not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "junk.hmtl")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.hmtl")


def test_checkpoint_version_mismatch(tmp_path, monkeypatch):
    import hmtl.training as tr

    cfg = tiny_config()
    monkeypatch.setattr(tr, "CHECKPOINT_VERSION", "hmtl-checkpoint/0")
    save_checkpoint(tmp_path / "old.hmtl", init_params(cfg), cfg)
    monkeypatch.undo()
    with pytest.raises(CheckpointError, match="incompatible"):
        load_checkpoint(tmp_path / "old.hmtl")


def test_checkpoint_param_set_must_match_config(tmp_path):
    cfg = tiny_config()
    params = init_params(cfg)
    params.pop("main.0.b")
    save_checkpoint(tmp_path / "m.hmtl", params, cfg)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "m.hmtl")


def _moving_average_nonincreasing(losses, window=10):
    avg = np.convolve(losses, np.ones(window) / window, mode="valid")
    return bool(np.all(np.diff(avg) <= 0))


@pytest.mark.slow
def test_training_loss_trend_across_seeds():
    from hmtl.cohort import SynthConfig, generate_synthetic_cohort, select_cohort, split_cohort
    from hmtl.data import prepare_cohort
    from hmtl.preprocess import fit_scaler

    cohort = select_cohort(generate_synthetic_cohort(SynthConfig(n_subjects=160, seed=5)))
    train, _, _ = split_cohort(cohort, seed=5)
    items = prepare_cohort(train, fit_scaler(train))
    cfg = tiny_config(lstm_layers=1, lstm_width=16, head_widths=(16, 8, 16), clinical_widths=(8, 8))
    ok = 0
    for seed in range(5):
        res = train_model(items, [], dataclasses.replace(cfg, seed=seed), TrainConfig(epochs=100, batch_size=32, seed=seed))
        ok += _moving_average_nonincreasing([r["train_loss"] for r in res.history])
    assert ok >= 4
