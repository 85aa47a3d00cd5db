import math

import numpy as np
import pytest

import crossadapt as ca


def test_metrics_hand_cases():
    assert ca.auc([0.9, 0.8, 0.3], [1, 0, 1]) == 0.5
    assert ca.logloss([0.5, 0.5], [1, 0]) == pytest.approx(math.log(2))
    assert ca.spearman([1, 2, 3], [1, 3, 2]) == 0.5
    assert ca.ndcg_at_k([0, 1], [1, 0], 2) == pytest.approx(1 / math.log2(3))
    assert ca.divergence([1, 0], [0.5, 0.5]) == pytest.approx(0.2158, abs=1e-4)
    assert ca.enhancement_ratio(0.03) == pytest.approx(0.04)
    assert ca.pcvr_bias([0.2], [0.1])["value"] == pytest.approx(1.0)


def test_errors_carry_kind():
    with pytest.raises(ca.CrossAdaptError) as info:
        ca.auc([0.1, 0.2], [1, 1])
    assert info.value.kind == "metric-undefined"
    with pytest.raises(ca.CrossAdaptError) as info:
        ca.resolve_config({"online": {"tua": 1}})
    assert info.value.kind == "validation"
    assert "online.tua" in str(info.value)


def test_projection_round_trip():
    rng = np.random.default_rng(0)
    table = rng.normal(size=(50, 8)) * 0.8 ** np.arange(8)
    plan = ca.build_plan(table, 3, seed=1)
    assert plan["kind"] == "reduce"
    measured, predicted = ca.gram_error(table, plan)
    assert measured == pytest.approx(predicted, rel=1e-8)
    assert ca.apply_plan(table, plan).shape == (50, 3)
    assert min(ca.random_projection_baseline(table, 3, 20, 2)) >= measured

    wide = ca.build_plan(table, 12, seed=4)
    out = ca.apply_plan(table, wide)
    np.testing.assert_allclose(out @ out.T, table @ table.T, atol=1e-9)


def test_config_defaults_and_overrides():
    desk = ca.default_config("desk")
    assert desk["distill"]["batch_size"] == 256
    cfg = ca.resolve_config({}, ["online.tau=4"])
    assert cfg["online"]["tau"] == 4


SMALL = {
    "data": {"synthetic": {"n_samples": 6000, "vocab_sizes": [40, 10, 5], "n_numerical": 1}},
    "vocab_threshold": 3,
    "teacher": {"arch": "mlp", "dim": 4, "hidden": [8]},
    "student": {"arch": "fm_mlp", "dim": 6, "hidden": [8]},
    "distill": {"batch_size": 128},
    "online": {"batch_size": 64, "rolling_window": 200},
    "modes": ["scratch", "crossadapt_sample"],
    "shift": {"n": 5},
}


def test_run_modes_small_pipeline():
    runs = ca.run_modes(SMALL)
    assert [r["mode"] for r in runs] == ["scratch", "crossadapt_sample"]
    scratch, sample = runs
    assert sample["offline_steps"] < scratch["offline_steps"]
    assert 0.5 < scratch["test"]["auc"] <= 1.0
    assert "shift" in sample


def test_shift_report():
    rep = ca.shift_report(SMALL)
    assert rep["n"] == 5
    assert len(rep["pair_means"]) == 4
    assert rep["delta_shift"] >= 0.0
