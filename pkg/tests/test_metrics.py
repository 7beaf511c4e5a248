import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from wavecast.metrics import HORIZON_OFFSETS, UNDEFINED, MetricsReport, build_report, compute_metrics

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def test_worked_example():
    m = compute_metrics([1.0, 2.0], [2.0, 4.0])
    assert m.mse == 2.5 and m.mae == 1.5 and m.mape == 100.0
    assert m.rmse == pytest.approx(1.5811, abs=5e-5)
    assert (m.n, m.mape_skipped) == (2, 0)


def test_perfect_prediction(rng):
    y = rng.normal(size=50)
    m = compute_metrics(y, y.copy())
    assert (m.mse, m.mae, m.rmse, m.mape) == (0.0, 0.0, 0.0, 0.0)


def test_mape_skips_near_zero_targets_and_counts_them():
    m = compute_metrics([0.0, 1e-9, 2.0], [1.0, 1.0, 3.0])
    assert m.mape_skipped == 2 and m.mape == 50.0
    none_left = compute_metrics([0.0, -5e-9], [1.0, -5e-9])
    assert none_left.mape is None and none_left.to_dict()["mape"] == UNDEFINED
    assert none_left.mse == 0.5


def test_size_mismatch_and_empty_input():
    with pytest.raises(ValueError, match="differ"):
        compute_metrics([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        compute_metrics([], [])


@given(arrays(float, st.integers(1, 60), elements=finite), st.integers(0, 2**31))
def test_matches_straight_line_oracle(y, seed):
    yhat = y + np.random.default_rng(seed).normal(size=y.shape)
    m = compute_metrics(y, yhat)
    mse, mae, rmse, mape = oracles.metrics(y, yhat)
    assert abs(m.mse - mse) <= 1e-12 * max(1, mse)
    assert abs(m.mae - mae) <= 1e-12 * max(1, mae)
    assert abs(m.rmse - rmse) <= 1e-12 * max(1, rmse)
    if mape is None:
        assert m.mape is None
    else:
        assert abs(m.mape - mape) <= 1e-12 * max(1, mape)
    assert m.rmse == math.sqrt(m.mse)
    assert min(m.mse, m.mae, m.rmse) >= 0


def test_report_slices_against_oracle(rng):
    y = rng.normal(size=(30, 48, 4))
    yhat = y + 0.1 * rng.normal(size=y.shape)
    names = ["wg6", "wg7", "wg8", "wg9"]
    rep = build_report(y, yhat, names, {"k": 1})
    assert list(rep.per_horizon) == list(HORIZON_OFFSETS)
    for off, m in rep.per_horizon.items():
        assert m.mse == pytest.approx(oracles.metrics(y[:, off - 1], yhat[:, off - 1])[0], abs=1e-12)
        assert m.n == 30 * 4
    for j, g in enumerate(names):
        ref = oracles.metrics(y[:, :, j], yhat[:, :, j])
        got = rep.per_gauge[g]
        assert (got.mse, got.mae, got.rmse) == pytest.approx(ref[:3], abs=1e-12)
        assert rep.cumulative_abs_error[g] == pytest.approx(np.abs(yhat[:, :, j] - y[:, :, j]).sum(), rel=1e-12)
    assert rep.n == y.size
    for m in [rep.aggregate, *rep.per_gauge.values(), *rep.per_horizon.values()]:
        assert m.rmse == math.sqrt(m.mse)


def test_report_round_trips_through_json(rng):
    y = rng.normal(size=(5, 8, 2))
    y[0, 0, 0] = 0.0
    rep = build_report(y, y + 1, ["wg6", "wg7"], {"dataset": "x", "sweep_value": 3})
    back = MetricsReport.from_dict(json.loads(rep.to_json()))
    assert back == rep
    assert rep.to_json() == back.to_json()


def test_fingerprint_tracks_provenance(rng):
    y = rng.normal(size=(3, 2, 1))
    a = build_report(y, y, ["wg6"], {"layers": 1})
    b = build_report(y, y, ["wg6"], {"layers": 2})
    c = build_report(y, y, ["wg6"], {"layers": 1})
    assert a.fingerprint != b.fingerprint and a.fingerprint == c.fingerprint


def test_report_rejects_bad_shapes():
    with pytest.raises(ValueError):
        build_report(np.zeros((2, 3)), np.zeros((2, 3)), ["a"])
    with pytest.raises(ValueError):
        build_report(np.zeros((2, 3, 2)), np.zeros((2, 3, 2)), ["a"])
