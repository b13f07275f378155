import numpy as np
import pytest

from hmtl.errors import ConfigurationError, DimensionError, FittingError, UndefinedMetricError
from hmtl.evaluation import (
    ModelEval,
    auprc,
    auroc,
    bh_adjust,
    compare_models,
    modality_subsets,
    pivot_bootstrap_ci,
    regression_mse,
    resample_indices,
    run_ablation,
    wilcoxon_signed_rank,
)
from hmtl.model import ModelConfig
from hmtl.training import TrainConfig
from conftest import tiny_config
from oracles import auroc_pairwise, average_precision_loop, wilcoxon_enumeration


def test_auroc_examples():
    assert auroc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0
    assert auroc([0.9, 0.2, 0.8, 0.1], [1, 0, 0, 1]) == 0.5
    assert auroc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.2], [1, 1])
    with pytest.raises(DimensionError):
        auroc([0.1, 0.2], [1])


def test_auroc_permutation_invariant():
    rng = np.random.default_rng(0)
    s, y = rng.uniform(size=50).round(1), rng.integers(0, 2, size=50)
    p = rng.permutation(50)
    assert auroc(s, y) == auroc(s[p], y[p]) == pytest.approx(auroc_pairwise(s, y), abs=1e-12)


def test_auprc_examples():
    assert auprc([0.9, 0.1], [0, 1]) == 0.5
    assert auprc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]) == 1.0
    # ties keep input order
    assert auprc([0.5, 0.5], [0, 1]) == 0.5 and auprc([0.5, 0.5], [1, 0]) == 1.0
    with pytest.raises(UndefinedMetricError):
        auprc([0.4, 0.6], [0, 0])


def test_auprc_random_scores_match_prevalence():
    rng = np.random.default_rng(1)
    for rho in (0.1, 0.33):
        y = rng.uniform(size=100_000) < rho
        assert abs(auprc(rng.uniform(size=y.size), y) - rho) <= 0.02


def test_auprc_matches_loop_oracle():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        s = rng.integers(0, 5, size=n) / 4
        y = rng.integers(0, 2, size=n)
        y[0] = 1
        assert auprc(s, y) == pytest.approx(average_precision_loop(list(s), list(y)), abs=1e-12)


def test_regression_mse_examples():
    assert regression_mse([1.0], [0.0], [True]).tolist() == [1.0]
    assert regression_mse([1.0, 2.0], [0.0, 0.0], [1, 1]).tolist() == [2.5]
    p = np.array([[1.0, 5.0], [3.0, 9.0]])
    assert regression_mse(p, np.zeros((2, 2)), np.array([[1, 0], [1, 1]])).tolist() == [5.0, 81.0]
    assert regression_mse(p, p, np.ones((2, 2))).tolist() == [0.0, 0.0]
    with pytest.raises(UndefinedMetricError):
        regression_mse([1.0], [0.0], [False])


def test_bootstrap_constant_statistic():
    r = pivot_bootstrap_ci(lambda idx: 0.7, 30, B=50, seed=3)
    assert (r.lower, r.point, r.upper) == (0.7, 0.7, 0.7)


def test_bootstrap_rejects_bad_B_and_alpha():
    with pytest.raises(ConfigurationError):
        pivot_bootstrap_ci(lambda idx: 0.0, 10, B=0)
    with pytest.raises(ConfigurationError):
        pivot_bootstrap_ci(lambda idx: 0.0, 10, alpha=1.5)


def test_bootstrap_pivot_formula():
    x = np.random.default_rng(4).normal(size=40)
    r = pivot_bootstrap_ci(lambda idx: float(x[idx].mean()), 40, B=100, seed=9)
    q_lo, q_hi = np.percentile(r.samples, [2.5, 97.5])
    assert r.lower == 2 * x.mean() - q_hi and r.upper == 2 * x.mean() - q_lo
    assert len(r.samples) == 100


def test_bootstrap_redraw_and_budget():
    y = np.array([1] + [0] * 9)

    def metric(idx):
        return auroc(np.arange(len(idx)), y[idx])

    r = pivot_bootstrap_ci(metric, 10, B=20, seed=0)
    assert len(r.samples) == 20  # single-class draws were replaced, not skipped
    with pytest.raises(FittingError):
        resample_indices(5, 10, 0, metric_ok=lambda idx: False)


def test_bootstrap_thread_and_order_invariance():
    x = np.random.default_rng(5).normal(size=60)
    fn = lambda idx: float(np.median(x[idx]))  # noqa: E731
    a = pivot_bootstrap_ci(fn, 60, B=64, seed=11, threads=1)
    b = pivot_bootstrap_ci(fn, 60, B=64, seed=11, threads=4)
    assert (a.lower, a.upper) == (b.lower, b.upper) and np.array_equal(a.samples, b.samples)
    # resample b uses its own stream: the first 10 draws of B=64 equal B=10
    first = resample_indices(60, 10, 11)
    assert all(np.array_equal(u, v) for u, v in zip(first, resample_indices(60, 64, 11)))


def test_wilcoxon_examples():
    r = wilcoxon_signed_rank([1, 2, 3, 4, 5, 6], [0] * 6)
    assert r.p == pytest.approx(0.03125, abs=1e-15) and r.method == "exact"
    same = wilcoxon_signed_rank([0.3, 0.5], [0.3, 0.5])
    assert same.p == 1.0 and same.degenerate
    d = [1, -2, 3, -4, 5]
    assert wilcoxon_signed_rank(d).p == pytest.approx(wilcoxon_enumeration(d), abs=1e-12)


def test_wilcoxon_normal_branch():
    rng = np.random.default_rng(6)
    d = rng.normal(0.3, 1, size=40)
    r = wilcoxon_signed_rank(d)
    assert r.method == "normal" and 0 < r.p < 1
    # the normal branch agrees roughly with the exact distribution near the switch-over
    near = rng.normal(0.2, 1, size=20)
    assert wilcoxon_signed_rank(near, exact_max=0).p == pytest.approx(wilcoxon_signed_rank(near).p, abs=0.02)


def test_bh_examples():
    assert bh_adjust([0.01, 0.02, 0.03, 0.04]).tolist() == pytest.approx([0.04] * 4, abs=1e-15)
    assert bh_adjust([0.2]).tolist() == [0.2]
    q = bh_adjust([0.5, 0.001, 0.04, 0.9])
    assert np.all(q >= [0.5, 0.001, 0.04, 0.9]) and np.argsort(q).tolist() == [1, 2, 0, 3]
    with pytest.raises(ConfigurationError):
        bh_adjust([0.1, 1.2])


def fake_eval(name, risk, y, config=None, aux_z=None, target_z=None):
    config = config or ModelConfig(mode="single_task")
    n = len(y)
    nan = [np.full((len(a), 4), np.nan) for a in y]
    return ModelEval(
        name, config, [f"S{i}" for i in range(n)], list(risk), list(y), [np.ones_like(a) for a in y],
        aux_z or nan, target_z or nan,
    )


def labelled(rng, n, signal=2.0, T=3):
    y = [(rng.uniform(size=T) < 0.3).astype(float) for _ in range(n)]
    y[0][0], y[1][0] = 1.0, 0.0
    return y, [1 / (1 + np.exp(-(signal * a + rng.normal(size=T)))) for a in y]


def test_compare_structure():
    rng = np.random.default_rng(7)
    y, r1 = labelled(rng, 40)
    _, r2 = labelled(rng, 40, signal=0.5)
    _, r3 = labelled(rng, 40, signal=1.0)
    rep = compare_models([fake_eval("a", r2, y), fake_eval("b", r3, y), fake_eval("prop", r1, y)], B=30, seed=1)
    d = rep.to_dict()
    assert [m["name"] for m in d["models"]] == ["a", "b", "prop"]
    assert d["meta"]["proposed"] == "prop" and d["meta"]["B"] == 30 and d["meta"]["seed"] == 1
    for key in ("auroc", "auprc"):
        rows = [c for c in d["comparisons"] if c["metric"] == key]
        assert [c["model"] for c in rows] == ["a", "b"]
        assert all(0 <= c["p_raw"] <= c["p_adj"] <= 1 for c in rows)
    for m in d["models"]:
        assert m["metrics"]["auroc"]["lower"] <= m["metrics"]["auroc"]["upper"]
        assert m["metrics"]["mse_memory"] is None


def test_compare_self_is_degenerate():
    y, r = labelled(np.random.default_rng(8), 30)
    rep = compare_models([fake_eval("x", r, y), fake_eval("y", r, y)], B=20)
    assert all(c["p_raw"] == 1.0 and c["degenerate"] for c in rep.comparisons)


def test_compare_rejects_mismatched_test_sets():
    rng = np.random.default_rng(9)
    y, r = labelled(rng, 20)
    other = fake_eval("b", r, y)
    other.ids = other.ids[::-1]
    with pytest.raises(ConfigurationError):
        compare_models([fake_eval("a", r, y), other], B=5)
    with pytest.raises(ConfigurationError):
        compare_models([fake_eval("a", r, y), fake_eval("a", r, y)], B=5)


def test_compare_is_deterministic():
    y, r = labelled(np.random.default_rng(10), 30)
    _, s = labelled(np.random.default_rng(11), 30)
    runs = [compare_models([fake_eval("a", s, y), fake_eval("b", r, y)], B=40, seed=5, threads=t).to_dict() for t in (1, 3)]
    assert runs[0] == runs[1]


def test_mse_reported_on_z_scale():
    y, r = labelled(np.random.default_rng(12), 10, T=2)
    pred = [np.zeros((2, 4)) for _ in y]
    target = [np.ones((2, 4)) for _ in y]
    e = fake_eval("m", r, y, config=ModelConfig(), aux_z=pred, target_z=target)
    m = compare_models([e], B=5).models[0]["metrics"]
    assert m["mse_memory"]["point"] == 1.0
    assert m["mse_unit_memory"]["point"] == pytest.approx((1 / 6) ** 2, abs=1e-15)
    assert m["mse_unit_visuospatial"]["point"] == pytest.approx(0.25**2, abs=1e-15)


def test_null_comparison_typically_not_significant():
    """Two equally informative models: adjusted p should usually exceed 0.05."""
    above = 0
    for rep in range(20):
        rng = np.random.default_rng(100 + rep)
        y, a = labelled(rng, 300)
        b = [1 / (1 + np.exp(-(2 * t + rng.normal(size=3)))) for t in y]
        out = compare_models([fake_eval("a", a, y), fake_eval("b", b, y)], B=200, seed=rep)
        above += out.comparisons[0]["p_adj"] > 0.05
    assert above >= 10, f"only {above}/20 null comparisons had p_adj > 0.05"


def test_modality_subsets():
    subs = modality_subsets()
    assert len(subs) == 7 == len(set(subs))
    assert subs[-1] == ("imaging", "cognition", "clinical")


def test_run_ablation_rows(small_items):
    cfg = tiny_config(lstm_layers=1)
    subsets = [("clinical",), ("imaging", "cognition")]
    rows = run_ablation(cfg, small_items["train"][:12], [], small_items["test"], TrainConfig(epochs=1, batch_size=12), subsets=subsets, B=5)
    assert [r["modalities"] for r in rows] == [["clinical"], ["imaging", "cognition"]]
    assert all(r["config"]["modalities"] == r["modalities"] for r in rows)
    assert all(set(r["metrics"]) >= {"auroc", "auprc", "mse_memory"} for r in rows)
