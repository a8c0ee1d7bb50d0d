"""Smoke tests for the _quantlab extension module."""

import numpy as np
import pytest

ql = pytest.importorskip("_quantlab")


def rng():
    return np.random.default_rng(1000)


def test_minmax_scale_matches_numpy():
    x = rng().normal(size=(64, 32))
    params = ql.scale_minmax(x, bits=8)
    assert params.scale == pytest.approx(np.abs(x).max() / 127.0, rel=0, abs=0)
    assert params.zero_point == 0
    assert not params.degenerate


def test_fake_quant_round_trip_bound():
    x = rng().normal(size=(128, 64))
    params = ql.scale_minmax(x)
    fq = ql.fake_quant(x, method="minmax")
    assert fq.shape == x.shape
    assert np.max(np.abs(x - fq)) <= params.scale / 2


def test_quantize_saturates_to_int8_range():
    x = rng().normal(size=(16, 16)) * 10.0
    params = ql.scale_minmax(x)
    q = ql.quantize(x, params)
    assert q.dtype == np.int32
    assert q.max() <= 127 and q.min() >= -127


def test_peg_k1_equals_global_minmax():
    x = rng().normal(size=(32, 24))
    peg = ql.fake_quant(x, method="peg", groups=1)
    global_mm = ql.fake_quant(x, method="minmax")
    np.testing.assert_array_equal(peg, global_mm)


def test_kurtosis_of_gaussian_is_near_three():
    x = rng().normal(size=(500, 500))
    assert ql.kurtosis(x) == pytest.approx(3.0, abs=0.1)


def test_per_channel_variance_matches_numpy():
    x = rng().normal(size=(200, 12))
    np.testing.assert_allclose(ql.per_channel_variance(x), x.var(axis=0), rtol=1e-12)


def test_top_energy_and_resolution_factor():
    x = rng().normal(size=(64, 100))
    x[:, 3] *= 50.0
    share, degenerate = ql.top_p_energy(x, 0.01)
    assert not degenerate
    assert share > 0.9

    rho, degenerate = ql.resolution_factor(x)
    assert not degenerate
    assert 0.0 < rho < 0.05


def test_dump_round_trip(tmp_path):
    x = rng().normal(size=(16, 8))
    path = str(tmp_path / "layer.qlt")
    ql.save_dump(x, path)
    np.testing.assert_array_equal(ql.load_dump(path), x)


def test_degenerate_scale_raises():
    with pytest.raises(ql.DegenerateScale):
        ql.scale_percentile(np.zeros((4, 4)), percentile=50.0)


def test_generate_layer_is_deterministic():
    cfg = ql.StackConfig(depth=4, width=32, samples=128, dominant_count=2, seed=7)
    a = ql.generate_layer(cfg, 2)
    b = ql.generate_layer(cfg, 2)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (128, 32)


def test_propagation_variance_identity():
    cfg = ql.StackConfig(depth=6, width=32, samples=4096, dominant_count=2,
                         dominance_gain=1.2, seed=11)
    result = ql.propagate_errors(cfg, ["minmax"] * 6, injected=True)
    assert result["variance_ratio"] == pytest.approx(1.0, abs=0.05)


def test_collapse_experiment_small():
    cfg = ql.StackConfig(depth=6, width=64, samples=1024, dominant_count=2,
                         dominance_gain=2.5, tail_index=3.0, seed=1000)
    result = ql.collapse_experiment(cfg, percentile_grid=[99.0], k_grid=[2, 4])
    assert result["retain"] == result["fp32"]
    assert result["peg_k4"] > result["peg_k2"]
    assert result["minmax"] < result["fp32"]
