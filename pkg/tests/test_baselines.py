import numpy as np
import pytest

from hmtl.baselines import LogisticConfig, evaluate_logistic, fit_logistic, predict_logistic, visit_features
from hmtl.errors import ConfigurationError
from hmtl.evaluation import auroc, compare_models


def test_feature_layout(small_items):
    it = small_items["train"][0]
    X = visit_features(it)
    assert X.shape == (it.T, 90 * 2 + 13 * 2 + 18)
    assert np.array_equal(X[:, -18:], np.tile(it.clinical, (it.T, 1)))


def test_logistic_learns_training_signal(small_items):
    model = fit_logistic(small_items["train"], LogisticConfig(epochs=200, seed=1))
    risk = predict_logistic(model, small_items["train"])
    assert all(np.all((r > 0) & (r < 1)) for r in risk)
    m = np.concatenate([it.y_mask for it in small_items["train"]]) > 0
    y = np.concatenate([it.y for it in small_items["train"]])[m]
    assert auroc(np.concatenate(risk)[m], y) > 0.8


def test_logistic_is_deterministic_and_comparable(small_items):
    a = fit_logistic(small_items["train"], LogisticConfig(epochs=20, seed=3))
    b = fit_logistic(small_items["train"], LogisticConfig(epochs=20, seed=3))
    assert np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b)
    e = evaluate_logistic("logistic", small_items["test"], a)
    rep = compare_models([e], B=10).to_dict()
    assert rep["models"][0]["config"]["mode"] == "logistic"
    assert rep["models"][0]["metrics"]["mse_memory"] is None


def test_logistic_rejects_empty_split():
    with pytest.raises(ConfigurationError):
        fit_logistic([])
