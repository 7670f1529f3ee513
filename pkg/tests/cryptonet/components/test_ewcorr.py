import math

import numpy as np
import pytest

from cryptonet import CryptonetClient
from cryptonet.components.ewcorr.api import SHARP_THETA, make_weights, weighted_corr
from cryptonet.components.ewcorr.models import WeightedCorrelationMatrix
from cryptonet.exceptions import (
    EmptyInput,
    InvalidParameter,
    WindowTooLong,
    ZeroVariance,
)
from cryptonet.test_utils import returns_panel

ewcorr = CryptonetClient().ewcorr


def direct_summation(x, y, window, theta):
    """Weighted Pearson correlation evaluated term by term."""
    raw = [math.exp((t - window) / theta) for t in range(1, window + 1)]
    w = [r / sum(raw) for r in raw]
    mean_x = sum(w_t * x_t for w_t, x_t in zip(w, x))
    mean_y = sum(w_t * y_t for w_t, y_t in zip(w, y))
    cov = sum(w_t * (x_t - mean_x) * (y_t - mean_y) for w_t, x_t, y_t in zip(w, x, y))
    var_x = sum(w_t * (x_t - mean_x) ** 2 for w_t, x_t in zip(w, x))
    var_y = sum(w_t * (y_t - mean_y) ** 2 for w_t, y_t in zip(w, y))
    return cov / math.sqrt(var_x * var_y)


def factor_returns(n_assets, n_obs, seed=0, noise=0.5):
    rng = np.random.default_rng(seed)
    market = rng.normal(0, 0.01, size=n_obs)
    return market + noise * rng.normal(0, 0.01, size=(n_assets, n_obs))


def test_weights_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(50):
        window = int(rng.integers(1, 200))
        theta = float(rng.uniform(0.5, 100))
        weights = make_weights(window, theta)
        assert abs(weights.weights.sum() - 1) <= 1e-12
        assert len(weights) == window
        assert np.all(np.diff(weights.weights) > 0)


def test_single_observation_window():
    assert make_weights(1, 5.0).weights.tolist() == [1.0]


def test_weights_closed_form():
    weights = make_weights(3, 1.0)
    np.testing.assert_allclose(weights.weights, [0.0900, 0.2447, 0.6652], atol=5e-5)
    assert weights.w_0 == pytest.approx(1 / (math.exp(-2) + math.exp(-1) + 1))


def test_steep_decay_on_a_day():
    weights = ewcorr.make_weights(24, SHARP_THETA)
    assert weights.weights[-1] == pytest.approx(1.0, abs=1e-4)
    assert np.all(weights.weights > 0)


@pytest.mark.parametrize(
    "window, theta",
    [(0, 1.0), (-3, 1.0), (24, 0.0), (24, -1.0), (24, math.inf), (24, math.nan)],
)
def test_invalid_weights(window, theta):
    with pytest.raises(InvalidParameter):
        make_weights(window, theta)


def test_underflowing_weights():
    with pytest.raises(InvalidParameter):
        make_weights(10_000, 0.1)


def test_perfect_correlations():
    rng = np.random.default_rng(1)
    x = rng.normal(size=24)
    weights = make_weights(24, 8.0)
    assert weighted_corr(x, x, weights) == pytest.approx(1.0, abs=1e-12)
    assert weighted_corr(x, -x, weights) == pytest.approx(-1.0, abs=1e-12)


def test_against_direct_summation():
    x, y = [1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 2.0, 4.0]
    expected = direct_summation(x, y, 4, 2.0)
    assert ewcorr.weighted_corr(x, y, make_weights(4, 2.0)) == pytest.approx(
        expected, abs=1e-12
    )


def test_random_pairs_against_direct_summation():
    rng = np.random.default_rng(2)
    for _ in range(20):
        window = int(rng.integers(2, 60))
        theta = float(rng.uniform(1, 30))
        x, y = rng.normal(size=(2, window))
        expected = direct_summation(x.tolist(), y.tolist(), window, theta)
        result = weighted_corr(x, y, make_weights(window, theta))
        assert result == pytest.approx(expected, abs=1e-12)


def test_uniform_weight_limit():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x, y = rng.normal(size=(2, 30))
        pearson = np.corrcoef(x, y)[0, 1]
        assert weighted_corr(x, y, make_weights(30, 1e12)) == pytest.approx(
            pearson, abs=1e-9
        )
        assert weighted_corr(x, y, make_weights(30, 1e6)) == pytest.approx(
            pearson, abs=1e-4
        )


@pytest.mark.parametrize("a, b, c, d", [(2.0, 1.0, 3.0, -5.0), (-0.5, 7.0, 4.0, 0.0)])
def test_shift_and_scale_invariance(a, b, c, d):
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(2, 24))
    weights = make_weights(24, 8.0)
    expected = math.copysign(1, a * c) * weighted_corr(x, y, weights)
    result = weighted_corr(a * x + b, c * y + d, weights)
    assert result == pytest.approx(expected, abs=1e-12)


def test_symmetry():
    rng = np.random.default_rng(5)
    x, y = rng.normal(size=(2, 24))
    weights = make_weights(24, 8.0)
    assert weighted_corr(x, y, weights) == weighted_corr(y, x, weights)


def test_constant_series():
    weights = make_weights(5, 2.0)
    with pytest.raises(ZeroVariance):
        weighted_corr([1.0, 1.0, 1.0, 1.0, 1.0], [1.0, 2.0, 3.0, 4.0, 6.0], weights)
    with pytest.raises(ZeroVariance):
        weighted_corr([1.0, 2.0, 3.0, 4.0, 6.0], [0.3] * 5, weights)


def test_wrong_length():
    with pytest.raises(InvalidParameter):
        weighted_corr([1.0, 2.0], [1.0, 2.0, 3.0], make_weights(3, 1.0))


@pytest.mark.parametrize(
    "n_obs, window, step, expected",
    [(24, 24, 1, 1), (48, 24, 1, 25), (100, 24, 24, 4), (30, 10, 7, 3)],
)
def test_rolling_count(n_obs, window, step, expected):
    panel = returns_panel(factor_returns(4, n_obs))
    mats = ewcorr.rolling_corr(panel, window, step)
    assert len(mats) == expected
    last_index = (expected - 1) * step + window - 1
    assert mats[-1].window_end_ts == panel.timestamps[last_index]


def test_window_longer_than_series():
    with pytest.raises(WindowTooLong):
        ewcorr.rolling_corr(returns_panel(factor_returns(4, 20)), window=24)


def test_invalid_step():
    with pytest.raises(InvalidParameter):
        ewcorr.rolling_corr(returns_panel(factor_returns(4, 30)), 24, step=0)


def test_co_moving_pair():
    values = factor_returns(3, 60, seed=6)
    values[2] = 2 * values[0]
    for matrix in ewcorr.rolling_corr(returns_panel(values), window=24):
        assert matrix["S00", "S02"] == pytest.approx(1.0, abs=1e-12)


def test_rolling_matrices_are_valid():
    panel = returns_panel(factor_returns(10, 200, seed=7))
    mats = ewcorr.rolling_corr(panel, window=24, step=1)
    assert len(mats) == 200 - 23
    for matrix in mats:
        values = matrix.values
        assert matrix.is_valid()
        assert np.array_equal(values, values.T)
        assert np.all(np.diag(values) == 1.0)
        assert np.all(np.abs(values) <= 1.0)
        assert np.linalg.eigvalsh(values).min() >= -1e-8


def test_matrix_entries_match_weighted_corr():
    panel = returns_panel(factor_returns(4, 24, seed=8))
    matrix = ewcorr.correlation_matrix(panel, panel.timestamps[-1], 24, theta=5.0)
    weights = make_weights(24, 5.0)
    expected = weighted_corr(panel.values[1], panel.values[3], weights)
    assert matrix["S01", "S03"] == pytest.approx(expected, abs=1e-12)


def test_gaps_and_constants_are_excluded():
    values = factor_returns(5, 48, seed=9)
    values[1, 30] = np.nan
    values[4, :24] = 0.0
    mats = ewcorr.rolling_corr(returns_panel(values), window=24, step=24)

    assert mats[0].excluded == ("S04",)
    assert mats[0].symbols == ("S00", "S01", "S02", "S03")
    assert mats[1].excluded == ("S01",)
    assert "S04" in mats[1].symbols


def test_workers_do_not_change_the_result():
    panel = returns_panel(factor_returns(6, 80, seed=10))
    sequential = ewcorr.rolling_corr(panel, 24, 1)
    parallel = CryptonetClient(workers=4).rolling_corr(panel, 24, 1)
    assert [m.window_end_ts for m in parallel] == [m.window_end_ts for m in sequential]
    for a, b in zip(sequential, parallel):
        assert np.array_equal(a.values, b.values)


def test_average_of_two_assets():
    matrix = WeightedCorrelationMatrix(
        symbols=("A", "B"), values=[[1.0, 0.3], [0.3, 1.0]], window_end_ts=1
    )
    series = ewcorr.average_series([matrix])
    assert series["A"].tolist() == pytest.approx([0.3], abs=1e-15)
    assert series["B"].tolist() == pytest.approx([0.3], abs=1e-15)
    assert series.market_mean.tolist() == [0.3]


def test_average_of_identity():
    matrix = WeightedCorrelationMatrix(("A", "B", "C"), np.eye(3), window_end_ts=1)
    series = ewcorr.average_series([matrix])
    assert series.per_asset_mean.tolist() == [[0.0], [0.0], [0.0]]
    assert series.market_mean.tolist() == [0.0]


def test_market_mean_brute_force():
    panel = returns_panel(factor_returns(5, 30, seed=11))
    mats = ewcorr.rolling_corr(panel, window=24)
    series = ewcorr.average_series(mats)
    for w, matrix in enumerate(mats):
        pairs = [
            matrix.values[i, j] for i in range(5) for j in range(5) if i < j
        ]
        assert len(pairs) == 10
        assert series.market_mean[w] == pytest.approx(np.mean(pairs), abs=1e-12)
        own = [matrix.values[2, j] for j in range(5) if j != 2]
        assert series["S02"][w] == pytest.approx(np.mean(own), abs=1e-12)


def test_absent_asset_is_a_gap():
    values = factor_returns(4, 48, seed=12)
    values[3, 40] = np.nan
    mats = ewcorr.rolling_corr(returns_panel(values), window=24, step=24)
    series = ewcorr.average_series(mats, focus=["S03", "S00"])
    assert series.symbols == ("S03", "S00")
    assert not np.isnan(series["S03"][0])
    assert np.isnan(series["S03"][1])
    assert not np.isnan(series["S00"]).any()


def test_average_of_nothing():
    with pytest.raises(EmptyInput):
        ewcorr.average_series([])


def test_series_file(tmp_path):
    panel = returns_panel(factor_returns(3, 26, seed=13))
    series = ewcorr.average_series(ewcorr.rolling_corr(panel, 24))
    series.to_csv(tmp_path / "average_correlation.csv")
    header = (tmp_path / "average_correlation.csv").read_text().splitlines()[0]
    assert header == "ts,market_mean,S00,S01,S02"
    assert series.peak() in panel.timestamps


def test_decoupled_asset_loses_correlation():
    n_assets, n_obs, brk = 10, 720, 360
    values = factor_returns(n_assets, n_obs, seed=14)
    rng = np.random.default_rng(15)
    values[0, brk:] = rng.normal(0, 0.01, size=n_obs - brk)
    panel = returns_panel(values)

    series = ewcorr.average_series(ewcorr.rolling_corr(panel, window=24, step=1))
    pre = series.timestamps <= panel.timestamps[brk - 1]
    post = series.timestamps >= panel.timestamps[brk + 23]

    decoupled = series["S00"]
    assert decoupled[post].mean() < decoupled[pre].mean()
    assert decoupled[post].mean() < series.market_mean[post].mean()
