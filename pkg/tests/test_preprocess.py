import numpy as np
import pytest

from hmtl.cohort import split_cohort
from hmtl.errors import ConfigurationError, FittingError, IngestionError, UsageError
from hmtl.preprocess import (
    SCALED_FEATURES,
    ScalerParams,
    apply_scaler,
    composite_from_unit,
    composite_unit_scale,
    compute_time_gaps,
    encode_clinical,
    fit_scaler,
    fit_scaler_arrays,
    icv_normalize,
)
from test_cohort import clinical


def test_icv_examples():
    assert icv_normalize([1500.0], 1.5e6)[0] == pytest.approx(0.001, abs=1e-18)
    assert icv_normalize([0.0], 1.5e6)[0] == 0.0
    with pytest.raises(IngestionError):
        icv_normalize([1.0], 0.0)


def test_percentile_oracle():
    # linear interpolation: position (n - 1) * q between order statistics
    p = fit_scaler_arrays(np.arange(1.0, 101.0)[:, None], ["f"])
    assert p.p1[0] == pytest.approx(1.99, abs=1e-12) and p.p99[0] == pytest.approx(99.01, abs=1e-12)
    assert p.lo[0] == pytest.approx(1.99, abs=1e-12) and p.hi[0] == pytest.approx(99.01, abs=1e-12)


def test_constant_feature():
    p = fit_scaler_arrays(np.full((5, 1), 3.0), ["c"])
    assert (p.p1[0], p.p99[0], p.lo[0], p.hi[0]) == (3.0, 3.0, 3.0, 3.0)
    assert apply_scaler(np.array([[10.0]]), np.ones((1, 1)), p)[0, 0] == 0.0


def test_unobserved_feature_raises_naming_it():
    with pytest.raises(FittingError, match="'b'"):
        fit_scaler_arrays(np.array([[1.0, np.nan], [2.0, np.nan]]), ["a", "b"])


def test_apply_scaler_endpoints_clip_and_passthrough():
    vals = np.arange(1.0, 101.0)[:, None]
    p = fit_scaler_arrays(vals, ["f"])
    out = apply_scaler(np.array([[p.lo[0]], [p.hi[0]], [1e6], [-5.0]]), np.array([[1], [1], [1], [0]]), p)
    assert out[:, 0].tolist() == [0.0, 1.0, 1.0, -5.0]


def test_fingerprint_mismatch():
    p = fit_scaler_arrays(np.ones((3, 2)), ["a", "b"])
    with pytest.raises(UsageError):
        apply_scaler(np.ones((1, 2)), np.ones((1, 2)), p, names=["b", "a"])


def test_fit_is_deterministic_and_train_only(small_cohort):
    train, val, test = split_cohort(small_cohort, seed=1)
    a, b = fit_scaler(train), fit_scaler(train)
    assert a == b and len(a.names) == len(SCALED_FEATURES)
    assert ScalerParams.from_json(a.to_json()) == a
    assert fit_scaler(val) != a  # params depend on the fold they were fitted on


def test_encode_clinical():
    c = clinical()
    c["sex"] = "M"
    v = encode_clinical(c)
    assert v[1] == 1.0 and not v[8:].any() and len(v) == 18
    c["sex"] = "F"
    assert encode_clinical(c)[1] == 0.0
    c["sex"] = "X"
    with pytest.raises(IngestionError):
        encode_clinical(c)


def test_composite_scale_examples():
    assert composite_unit_scale(0.0, "memory") == 0.5
    assert composite_unit_scale(-1.0, "visuospatial") == 0.5
    assert composite_unit_scale(3.0, "memory") == 1.0 and composite_from_unit(1.0, "memory") == 3.0
    with pytest.raises(ConfigurationError):
        composite_unit_scale(0.0, "attention")


def test_composite_roundtrip_and_clamp(caplog):
    u = np.random.default_rng(0).uniform(size=(50, 4))
    assert np.max(np.abs(composite_unit_scale(composite_from_unit(u)) - u)) < 1e-12
    assert composite_unit_scale(5.0, "memory") == 1.0
    assert "clamped" in caplog.text


def test_time_gap_examples():
    months = [0, 6, 12, 18]
    assert compute_time_gaps(np.array([1, 1, 1, 1]), months).tolist() == [0, 6, 6, 6]
    assert compute_time_gaps(np.array([1, 0, 0, 1]), months).tolist() == [0, 6, 12, 18]
    assert compute_time_gaps(np.array([1]), [0]).tolist() == [0]
    with pytest.raises(UsageError):
        compute_time_gaps(np.array([1, 1]), [6, 6])


def test_time_gap_columns_independent():
    m = np.array([[1, 0], [0, 0], [1, 1]])
    d = compute_time_gaps(m, [0, 6, 18])
    assert d[:, 0].tolist() == [0, 6, 18] and d[:, 1].tolist() == [0, 6, 18]
    assert compute_time_gaps(np.array([[1, 1], [1, 0], [0, 1]]), [0, 6, 12])[:, 1].tolist() == [0, 6, 12]
