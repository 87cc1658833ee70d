import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crisisnet.errors import DataError
from crisisnet.marketdata import (
    BarRecord,
    Layer,
    WindowSpec,
    align_panel,
    compute_indicators,
    destandardize,
    load_bars,
    load_tickers,
    panel_layers,
    slide_windows,
    standardize,
    write_bars,
)
from crisisnet.synthetic import synthesize

D0 = dt.date(2020, 1, 1)


def _write(path, rows):
    path.write_text("date,security,close,volume\n" + "".join(r + "\n" for r in rows))
    return path


def test_load_three_rows_sorted(tmp_path):
    p = _write(tmp_path / "b.csv", ["2020-01-02,1,10,5", "2020-01-01,1,9,5", "2020-01-01,0,3,1"])
    bars = load_bars(p)
    assert [(b.security, b.date.day) for b in bars] == [(0, 1), (1, 1), (1, 2)]


def test_zero_close_names_line(tmp_path):
    p = _write(tmp_path / "b.csv", ["2020-01-01,0,3,1", "2020-01-02,0,0,1"])
    with pytest.raises(DataError, match="line 3"):
        load_bars(p)


@pytest.mark.parametrize(
    "row, msg",
    [
        ("2020-01-01,0,abc,1", "line 2"),
        ("2020-01-01,0,3", "expected 4 fields"),
        ("2020-01-01,0,3,-1", "volume"),
    ],
)
def test_malformed_rows(tmp_path, row, msg):
    with pytest.raises(DataError, match=msg):
        load_bars(_write(tmp_path / "b.csv", [row]))


def test_duplicate_and_missing(tmp_path):
    p = _write(tmp_path / "b.csv", ["2020-01-01,0,3,1", "2020-01-01,0,4,1"])
    with pytest.raises(DataError, match="duplicate"):
        load_bars(p)
    with pytest.raises(DataError, match="not found"):
        load_bars(tmp_path / "nope.csv")
    (tmp_path / "h.csv").write_text("a,b,c,d\n")
    with pytest.raises(DataError, match="header"):
        load_bars(tmp_path / "h.csv")


def test_shuffled_file_loads_like_sorted(tmp_path):
    bars, _ = synthesize(n_securities=5, n_days=200, seed=3)
    assert len(bars) == 1000
    write_bars(bars, tmp_path / "sorted.csv")
    shuffled = list(np.random.default_rng(0).permutation(len(bars)))
    write_bars([bars[i] for i in shuffled], tmp_path / "shuffled.csv")
    a, b = load_bars(tmp_path / "sorted.csv"), load_bars(tmp_path / "shuffled.csv")
    assert a == b
    assert [(r.close, r.volume) for r in a] == [(r.close, r.volume) for r in b]
    assert a == sorted(a, key=lambda r: (r.security, r.date))


def _bars(closes, volumes=None, security=0):
    volumes = volumes or [1.0] * len(closes)
    return [BarRecord(security, D0 + dt.timedelta(days=k), c, v) for k, (c, v) in enumerate(zip(closes, volumes))]


def _layer(series, layer):
    return next(s for s in series if s.layer is layer)


def test_returns_hand_computed():
    series = compute_indicators(_bars([100.0, 110.0, 99.0]))
    np.testing.assert_allclose(_layer(series, Layer.RETURN).values, [0.10, -0.10], rtol=0, atol=1e-15)
    assert _layer(series, Layer.RETURN).dates == [D0 + dt.timedelta(days=1), D0 + dt.timedelta(days=2)]
    logs = _layer(compute_indicators(_bars([100.0, 110.0]), log_returns=True), Layer.RETURN)
    assert logs.values[0] == pytest.approx(np.log(1.1), abs=1e-15)


def test_constant_prices_and_trading_value():
    series = compute_indicators(_bars([7.0] * 5))
    assert np.all(_layer(series, Layer.RETURN).values == 0.0)
    tv = _layer(compute_indicators(_bars([50.0, 50.0], [200.0, 1.0])), Layer.TRADING_VALUE)
    assert tv.values[0] == 10000.0


def test_single_bar_rejected():
    with pytest.raises(DataError):
        compute_indicators(_bars([1.0]))


def test_bar_record_validation():
    with pytest.raises(DataError):
        BarRecord(0, D0, 0.0, 1.0)
    with pytest.raises(DataError):
        BarRecord(0, D0, 1.0, -1.0)


@given(
    st.lists(st.floats(0.5, 500.0), min_size=2, max_size=30),
    st.sampled_from([0.5, 2.0, 4.0, 0.25]),
)
def test_price_scaling(closes, c):
    base = compute_indicators(_bars(closes))
    scaled = compute_indicators(_bars([c * p for p in closes]))
    np.testing.assert_array_equal(_layer(scaled, Layer.RETURN).values, _layer(base, Layer.RETURN).values)
    np.testing.assert_array_equal(
        _layer(scaled, Layer.TRADING_VALUE).values, c * _layer(base, Layer.TRADING_VALUE).values
    )


def test_window_examples():
    assert WindowSpec(100, 30).count(100) == 1
    w = slide_windows(np.arange(1.0, 11.0), WindowSpec(4, 3), "mean")
    np.testing.assert_array_equal(w.values, [2.5, 5.5, 8.5])
    np.testing.assert_array_equal(w.window_starts, [0, 3, 6])
    x = np.random.default_rng(1).standard_normal(17)
    np.testing.assert_array_equal(slide_windows(x, WindowSpec(1, 1), "min").values, x)


def test_window_errors():
    with pytest.raises(DataError):
        slide_windows(np.arange(5.0), WindowSpec(10, 3))
    with pytest.raises(ValueError):
        slide_windows(np.arange(5.0), WindowSpec(2, 1), "median")
    for size, step in [(1, 0), (0, 1), (3, 4)]:
        with pytest.raises(ValueError):
            WindowSpec(size, step)


@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 200))
def test_window_count_formula(size, step, extra):
    if step > size:
        step, size = size, step
    T = size + extra
    spec = WindowSpec(size, step)
    assert spec.count(T) == (T - size) // step + 1
    b = spec.bounds(T)
    assert len(b) == spec.count(T)
    assert b[-1][1] <= T < b[-1][1] + step


@given(st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=80), st.integers(1, 5), st.integers(1, 5))
def test_min_not_above_mean(values, size, step):
    step = min(step, size)
    spec = WindowSpec(size, step)
    lo = slide_windows(values, spec, "min").values
    mid = slide_windows(values, spec, "mean").values
    assert np.all(lo <= mid + 1e-9 * (1 + np.abs(mid)))


def test_standardize():
    assert np.all(standardize([3.0, 3.0], 3.0, 2.0) == 0.0)
    x = np.random.default_rng(2).normal(5, 3, 200)
    z = standardize(x, x.mean(), x.std())
    assert abs(z.mean()) < 1e-10 and abs(z.std() - 1) < 1e-10
    np.testing.assert_allclose(destandardize(z, x.mean(), x.std()), x, rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        standardize(x, 0.0, 0.0)


def test_align_panel_drops_gaps():
    a = _bars([1.0, 2.0, 3.0], security=0)
    b = [r for r in _bars([4.0, 5.0, 6.0], security=1) if r.date != D0 + dt.timedelta(days=1)]
    panel = align_panel(a + b)
    assert panel.dates == [D0, D0 + dt.timedelta(days=2)]
    assert panel.dropped_dates == [D0 + dt.timedelta(days=1)]
    np.testing.assert_array_equal(panel.close, [[1.0, 3.0], [4.0, 6.0]])
    dates, layers = panel_layers(panel)
    assert dates == [D0 + dt.timedelta(days=2)]
    assert all(m.shape == (2, 1) for m in layers.values())
    np.testing.assert_allclose(layers[Layer.RETURN][:, 0], [2.0, 0.5])


def test_tickers_table():
    t = load_tickers()
    assert len(t) == 140
    assert t[0] == "AAPL" and t[139] == "XOM"
