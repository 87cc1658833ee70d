import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crisisnet.econometrics import ols_fit
from crisisnet.errors import DegenerateInputError
from crisisnet.featurelab import (
    RETURN_STATS,
    cv_lambda,
    feature_screen,
    format_report,
    pearson,
    r2_score,
    ridge_fit,
    rolling_r2,
    window_return_stats,
    zscore_columns,
)
from crisisnet.network import DegreeSeries
from oracles import gd_ridge

seeds = st.integers(0, 100_000)


def series(name, values):
    return DegreeSeries(name, np.asarray(values, float), np.arange(len(values)))


def test_ridge_zero_lambda_is_ols(rng):
    X = rng.standard_normal((30, 3))
    y = rng.standard_normal(30)
    ols = ols_fit(np.column_stack([np.ones(30), X]), y)
    np.testing.assert_allclose(ridge_fit(X, y, 0.0).coefficients, ols.coefficients, rtol=0, atol=1e-10)


def test_ridge_identity_fit():
    x = np.linspace(-2, 3, 25)
    fit = ridge_fit(x, x, 0.0)
    assert fit.slopes[0] == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(fit.predict(x), x, atol=1e-12)
    two = ridge_fit(np.column_stack([x, x**2]), x, 0.0)
    assert two.predict(np.array([2.0, 4.0])).shape == (1,)


def test_ridge_shrinkage_limit(rng):
    X = zscore_columns(rng.standard_normal((50, 4)))
    y = X @ [3.0, -2.0, 1.0, 0.5] + rng.standard_normal(50)
    assert np.all(np.abs(ridge_fit(X, y, 1e6).slopes) < 1e-3)


def test_ridge_matches_gradient_descent():
    r = np.random.default_rng(11)
    X = r.standard_normal((40, 4))
    y = X @ [1.0, -0.5, 0.0, 2.0] + 0.3 + r.standard_normal(40)
    np.testing.assert_allclose(ridge_fit(X, y, 0.7).coefficients, gd_ridge(X, y, 0.7), rtol=0, atol=1e-6)


@given(seeds, st.lists(st.floats(0, 1e3), min_size=2, max_size=6))
def test_ridge_norm_shrinks_with_lambda(seed, lams):
    r = np.random.default_rng(seed)
    X = r.standard_normal((30, 3))
    y = X @ r.standard_normal(3) + r.standard_normal(30)
    norms = [np.linalg.norm(ridge_fit(X, y, lam).slopes) for lam in sorted(lams)]
    assert all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(norms, norms[1:]))


@given(seeds, st.floats(1e-6, 1e3))
def test_ols_has_best_in_sample_r2(seed, lam):
    r = np.random.default_rng(seed)
    X = r.standard_normal((25, 3))
    y = X[:, 0] + r.standard_normal(25)
    r2_ols = r2_score(y, ridge_fit(X, y, 0.0).predict(X))
    assert r2_ols >= r2_score(y, ridge_fit(X, y, lam).predict(X)) - 1e-12


def test_ridge_errors(rng):
    with pytest.raises(ValueError):
        ridge_fit(rng.standard_normal((5, 2)), rng.standard_normal(4))
    with pytest.raises(ValueError):
        ridge_fit(rng.standard_normal((5, 2)), rng.standard_normal(5), -1.0)


def test_r2_examples(rng):
    y = rng.standard_normal(20)
    assert r2_score(y, y) == 1.0
    assert r2_score(y, np.full(20, y.mean())) == pytest.approx(0.0, abs=1e-15)
    p = rng.standard_normal(20)
    oracle = 1 - sum((a - b) ** 2 for a, b in zip(y, p)) / sum((a - np.mean(y)) ** 2 for a in y)
    assert abs(r2_score(y, p) - oracle) < 1e-12
    with pytest.raises(DegenerateInputError):
        r2_score(np.ones(5), np.zeros(5))


def test_pearson_examples(rng):
    a = rng.standard_normal(30)
    assert pearson(a, 2 * a + 3) == pytest.approx(1.0, abs=1e-15)
    assert pearson(a, -a) == pytest.approx(-1.0, abs=1e-15)
    b = rng.standard_normal(30)
    cov = np.cov(a, b, ddof=1)
    assert abs(pearson(a, b) - cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1])) < 1e-12
    with pytest.raises(DegenerateInputError):
        pearson(a, np.ones(30))
    with pytest.raises(ValueError):
        pearson(a, b[:5])


@given(seeds, st.floats(0.01, 100), st.floats(-100, 100))
def test_pearson_symmetries(seed, scale, shift):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal((2, 20))
    rho = pearson(a, b)
    assert abs(pearson(b, a) - rho) < 1e-12
    assert abs(pearson(scale * a + shift, b) - rho) < 1e-12
    assert abs(pearson(a, -b) + rho) < 1e-12


def test_screen_self_correlation(rng):
    R = rng.standard_normal((60, 100)) * 0.01
    stats = window_return_stats(R)
    reports = feature_screen([series("mirror", stats["mean return"])], stats)
    assert reports[0].correlations["mean return"] == pytest.approx(1.0, abs=1e-12)


def test_screen_null_noise():
    r = np.random.default_rng(5)
    R = r.standard_normal((200, 50)) * 0.01
    stats = window_return_stats(R)
    features = [series(f"f{k}", r.standard_normal(200)) for k in range(40)]
    frac = np.mean([all(abs(v) < 0.25 for v in rep.correlations.values()) for rep in feature_screen(features, stats)])
    assert frac >= 0.95


def test_screen_order_skip_and_report(rng, caplog):
    stats = window_return_stats(rng.standard_normal((30, 10)))
    strong = series("strong", stats["minimum return"] + 0.01 * rng.standard_normal(30))
    weak = series("weak", rng.standard_normal(30))
    flat = series("flat", np.ones(30))
    reports = feature_screen([weak, flat, strong], stats)
    assert [r.feature_name for r in reports] == ["strong", "weak"]
    assert "flat" in caplog.text
    lines = format_report(reports).splitlines()
    assert lines[0] == "feature,stat,rho"
    assert [ln.split(",")[1] for ln in lines[1:5]] == list(RETURN_STATS)
    assert RETURN_STATS == ("mean return", "minimum return", "maximum return", "return variance")
    assert lines[2].endswith("%") and len(lines) == 9
    with pytest.raises(ValueError):
        feature_screen([series("short", np.ones(3))], stats)


def test_cv_lambda_and_rolling_r2(rng):
    X = rng.standard_normal((60, 2))
    y = X[:, 0] + 0.1 * rng.standard_normal(60)
    assert cv_lambda(X, y) in (0.01, 0.1, 1.0, 10.0, 100.0)
    starts, r2 = rolling_r2(X, y, 20, lam=0.01, step=10)
    np.testing.assert_array_equal(starts, [0, 10, 20, 30, 40])
    assert np.all(r2 > 0.9)
    with pytest.raises(ValueError):
        cv_lambda(X[:5], y[:5])
