import numpy as np
import pytest

from hmtl.autodiff import Tensor
from hmtl.data import collate
from hmtl.errors import ConfigurationError, UsageError
from hmtl.model import ModelConfig, forward, init_params, joint_embedding, main_head, predict
from hmtl.training import LossWeights, batch_gradients
from conftest import tiny_config
from oracles import central_difference, rel_error


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def test_default_embedding_width():
    cfg = ModelConfig()
    assert cfg.embedding_width == 320
    assert ModelConfig(modalities=("clinical",)).embedding_width == 64
    assert ModelConfig(modalities=("clinical", "imaging")).modalities == ("imaging", "clinical")


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ModelConfig(modalities=())
    with pytest.raises(ConfigurationError):
        ModelConfig(modalities=("pet",))
    with pytest.raises(ConfigurationError):
        ModelConfig(mode="joint")
    with pytest.raises(ConfigurationError):
        ModelConfig(dropout=1.0)
    with pytest.raises(ConfigurationError):
        ModelConfig.from_dict({"lstm_width": 4, "bogus": 1})
    cfg = tiny_config()
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_main_head_zero_weights_gives_half():
    params = {"main.0.W": Tensor(np.zeros((4, 1))), "main.0.b": Tensor(np.zeros(1))}
    rng = np.random.default_rng(0)
    out = main_head(Tensor(rng.uniform(size=(2, 3, 4))), Tensor(rng.uniform(size=(2, 3, 4))), params)
    assert out.shape == (2, 3) and np.all(out.data == 0.5)


def test_main_head_rejects_non_hierarchical():
    params = {"main.0.W": Tensor(np.zeros((4, 1))), "main.0.b": Tensor(np.zeros(1))}
    with pytest.raises(UsageError):
        main_head(Tensor(np.zeros((1, 1, 4))), Tensor(np.zeros((1, 1, 4))), params, tiny_config(mode="parallel_mt"))


def test_joint_embedding_checks_modalities():
    cfg = tiny_config(modalities=("imaging",))
    with pytest.raises(ConfigurationError):
        joint_embedding({"imaging": np.zeros((1, 1, 4)), "clinical": np.zeros((1, 1, 4))}, cfg)
    with pytest.raises(ConfigurationError):
        joint_embedding({}, cfg)


@pytest.mark.parametrize(
    "mode,target,risk,aux_k,rel",
    [
        ("hierarchical", "progression", True, 4, True),
        ("parallel_mt", "progression", True, 4, False),
        ("single_task", "progression", True, 0, False),
        ("single_task", "memory", False, 1, False),
    ],
)
def test_output_shapes_per_mode(tiny_items, mode, target, risk, aux_k, rel):
    cfg = tiny_config(mode=mode, single_task_target=target)
    batch = collate(tiny_items)
    out = forward(batch, init_params(cfg), cfg)
    B, T = batch.shape
    assert (out.risk is not None) == risk and (out.relevance is not None) == rel
    if risk:
        assert out.risk.shape == (B, T) and np.all((out.risk.data > 0) & (out.risk.data < 1))
    if aux_k:
        assert out.aux.shape == (B, T, aux_k)
    else:
        assert out.aux is None
    assert set(out.imp_losses) == {"imaging", "cognition"}


def test_hierarchical_risk_is_function_of_aux_and_relevance(tiny_items):
    cfg = tiny_config(dropout=0.0)
    params = init_params(cfg)
    out = forward(collate(tiny_items), params, cfg)
    z = (out.aux.data * out.relevance.data) @ params["main.0.W"].data[:, 0] + params["main.0.b"].data[0]
    assert np.max(np.abs(out.risk.data - sigmoid(z))) < 1e-14
    # the main head owns exactly five parameters
    assert sorted(k for k in params if k.startswith("main.")) == ["main.0.W", "main.0.b"]
    assert params["main.0.W"].shape == (4, 1)


def test_parallel_risk_ignores_aux_head(tiny_items):
    cfg = tiny_config(mode="parallel_mt")
    params = init_params(cfg)
    batch = collate(tiny_items)
    before = forward(batch, params, cfg).risk.data.copy()
    for k in params:
        if k.startswith("aux."):
            params[k].data[...] = np.random.default_rng(1).normal(size=params[k].shape)
    assert np.array_equal(forward(batch, params, cfg).risk.data, before)


def test_batch_composition_invariance(tiny_items):
    cfg = tiny_config()
    params = init_params(cfg)
    together = predict(tiny_items, params, cfg)
    for item, p in zip(tiny_items, together):
        alone = predict([item], params, cfg)[0]
        assert np.max(np.abs(alone.risk - p.risk)) < 1e-12
        assert np.max(np.abs(alone.aux - p.aux)) < 1e-12


def test_dropout_modes(tiny_items):
    cfg = tiny_config(dropout=0.5)
    params = init_params(cfg)
    batch = collate(tiny_items)
    a = forward(batch, params, cfg, mode="eval").risk.data
    assert np.array_equal(a, forward(batch, params, cfg, mode="eval").risk.data)
    t1 = forward(batch, params, cfg, mode="train", rng=np.random.default_rng(0)).risk.data
    t2 = forward(batch, params, cfg, mode="train", rng=np.random.default_rng(0)).risk.data
    assert np.array_equal(t1, t2) and not np.array_equal(t1, a)
    with pytest.raises(ConfigurationError):
        forward(batch, params, cfg, mode="train")


def test_init_is_seeded():
    a, b = init_params(tiny_config(seed=4)), init_params(tiny_config(seed=4))
    c = init_params(tiny_config(seed=5))
    assert all(np.array_equal(a[k].data, b[k].data) for k in a)
    assert any(not np.array_equal(a[k].data, c[k].data) for k in a)


@pytest.mark.parametrize("mode", ["hierarchical", "parallel_mt"])
def test_end_to_end_gradient_matches_finite_difference(tiny_items, mode):
    cfg = tiny_config(mode=mode, dropout=0.0, lstm_layers=2)
    params = init_params(cfg)
    batch = collate(tiny_items[:3])
    weights = LossWeights(1.0, 0.8, 0.05)
    _, _, grads = batch_gradients(batch, params, cfg, weights, mode="eval")
    rng = np.random.default_rng(9)
    checked = 0
    for name in sorted(params):
        arr = params[name].data
        for _ in range(2):
            idx = tuple(int(rng.integers(n)) for n in arr.shape)

            def f():
                return batch_gradients(batch, params, cfg, weights, mode="eval")[0]

            num = central_difference(f, arr, idx)
            assert rel_error(grads[name][idx], num, floor=1e-4) < 1e-5, (name, idx, grads[name][idx], num)
            checked += 1
    assert checked == 2 * len(params)
