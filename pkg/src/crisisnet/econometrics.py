"""Least squares, the F-test and pairwise Granger causality."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, NumericalError, SingularMatrixError

PIVOT_TOL = 1e-10
F_MAX = 1e12
PERFECT_FIT_RSS = 1e-12
RSS_ORDER_TOL = 1e-9


@dataclass
class OlsFit:
    coefficients: np.ndarray
    rss: float
    n_obs: int
    n_params: int

    @property
    def dof(self) -> int:
        return self.n_obs - self.n_params


@dataclass
class GrangerResult:
    f_stat: float
    p_value: float
    lag: int
    dof: int = 0


@dataclass
class PValueMatrix:
    """Pairwise p-values; entry (i, j) tests "series j Granger-causes series i".

    The diagonal and any cell whose test failed hold NaN (not applicable).
    """

    entries: np.ndarray
    layer: str | None = None
    window: int | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def pivoted_cholesky_solve(A, b, tol=PIVOT_TOL):
    """Solve the symmetric positive (semi)definite system ``A x = b``.

    Uses a diagonally pivoted Cholesky factorisation; a pivot at or below
    ``tol * max(diag(A))`` signals rank deficiency.
    """
    A = np.array(A, dtype=float)
    b = np.asarray(b, dtype=float)
    k = A.shape[0]
    perm = np.arange(k)
    scale = np.max(np.diag(A)) if k else 0.0
    if not scale > 0:
        raise SingularMatrixError("normal matrix has no positive diagonal entry")
    L = np.zeros_like(A)
    for j in range(k):
        # pick the largest remaining diagonal of the Schur complement
        resid = np.diag(A)[j:] - np.sum(L[j:, :j] ** 2, axis=1)
        q = j + int(np.argmax(resid))
        if resid[q - j] <= tol * scale:
            raise SingularMatrixError(
                f"rank-deficient design: pivot {resid[q - j]:.3e} below tolerance at column {j}"
            )
        if q != j:
            A[[j, q], :] = A[[q, j], :]
            A[:, [j, q]] = A[:, [q, j]]
            L[[j, q], :j] = L[[q, j], :j]
            perm[[j, q]] = perm[[q, j]]
        L[j, j] = math.sqrt(resid[q - j])
        L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    rhs = b[perm]
    z = np.empty(k)
    for i in range(k):
        z[i] = (rhs[i] - L[i, :i] @ z[:i]) / L[i, i]
    y = np.empty(k)
    for i in range(k - 1, -1, -1):
        y[i] = (z[i] - L[i + 1 :, i] @ y[i + 1 :]) / L[i, i]
    x = np.empty(k)
    x[perm] = y
    return x


def ols_fit(design, targets) -> OlsFit:
    """Least-squares fit via column-equilibrated normal equations.

    Columns are scaled to unit norm before forming X'X so the pivot
    tolerance is relative to a unit diagonal.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"design {X.shape} and targets {y.shape} are not conformable")
    n_obs, n_params = X.shape
    if n_obs <= n_params:
        raise ValueError(f"need n_obs > n_params, got {n_obs} <= {n_params}")
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    if np.any(norms == 0):
        raise SingularMatrixError("design has an all-zero column")
    Xs = X / norms
    beta = pivoted_cholesky_solve(Xs.T @ Xs, Xs.T @ y) / norms
    resid = y - X @ beta
    return OlsFit(beta, float(resid @ resid), n_obs, n_params)


def f_statistic(rss_restricted: float, rss_unrestricted: float, q: int, dof_unrestricted: int) -> float:
    """F = ((rss_r - rss_u) / q) / (rss_u / dof), capped at F_MAX for a perfect fit."""
    if rss_restricted < 0 or rss_unrestricted < 0:
        raise ValueError("residual sums of squares must be non-negative")
    if q < 1 or dof_unrestricted < 1:
        raise ValueError(f"need q >= 1 and dof >= 1, got q={q}, dof={dof_unrestricted}")
    diff = rss_restricted - rss_unrestricted
    if diff < -RSS_ORDER_TOL * max(1.0, rss_restricted):
        raise NumericalError(
            f"restricted rss {rss_restricted!r} below unrestricted rss {rss_unrestricted!r}"
        )
    if rss_unrestricted < PERFECT_FIT_RSS:
        return F_MAX
    return max(diff, 0.0) / q / (rss_unrestricted / dof_unrestricted)


def _betacf(a, b, x, max_iter=10_000, eps=1e-16):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise NumericalError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_cdf(x: float, d1: float, d2: float) -> float:
    """P(F <= x) for an F(d1, d2) variable."""
    if not (d1 >= 1 and d2 >= 1):
        raise ValueError(f"degrees of freedom must be >= 1, got d1={d1}, d2={d2}")
    if x < 0 or math.isnan(x):
        raise ValueError(f"x must be >= 0, got {x}")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    u = d1 * x / (d1 * x + d2)
    return min(1.0, max(0.0, betainc(d1 / 2.0, d2 / 2.0, u)))


def lag_design(x, y, lag, include_x=True):
    """Regressors [1, y_{t-1..t-p}, x_{t-1..t-p}] and target y_t for t = p..T-1."""
    T = len(y)
    cols = [np.ones(T - lag)]
    cols += [y[lag - i : T - i] for i in range(1, lag + 1)]
    if include_x:
        cols += [x[lag - i : T - i] for i in range(1, lag + 1)]
    return np.column_stack(cols), y[lag:]


def _check_pair(x, y, lag):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"x and y must be 1-D of equal length, got {x.shape} and {y.shape}")
    if lag < 1:
        raise ValueError(f"lag must be >= 1, got {lag}")
    T = len(y)
    if T - lag <= 2 * lag + 1:
        raise DegenerateInputError(f"series of length {T} too short for lag {lag}")
    if np.ptp(y) == 0:
        raise DegenerateInputError("target series is constant")
    return x, y


def _granger_from_restricted(x, y, lag, restricted):
    Xu, target = lag_design(x, y, lag)
    unrestricted = ols_fit(Xu, target)
    dof = unrestricted.dof
    f = f_statistic(restricted.rss, unrestricted.rss, lag, dof)
    return GrangerResult(f, 1.0 - f_cdf(f, lag, dof), lag, dof)


def granger_test(x, y, lag: int = 1) -> GrangerResult:
    """F-test of H0: lags of ``x`` add nothing to an AR(``lag``) model of ``y``.

    Both regressions use the same T - lag observations; the residual
    degrees of freedom are (T - lag) - (2*lag + 1).
    """
    x, y = _check_pair(x, y, lag)
    Xr, target = lag_design(x, y, lag, include_x=False)
    return _granger_from_restricted(x, y, lag, ols_fit(Xr, target))


def pvalue_matrix(layer_series, lag: int = 1, layer=None, window=None) -> PValueMatrix:
    """All pairwise Granger p-values of an (n, T) block of aligned series.

    A pair whose test fails (constant target, singular design, ...) is
    left as NaN instead of aborting the whole matrix.
    """
    S = np.asarray(layer_series, dtype=float)
    if S.ndim != 2:
        raise ValueError("layer_series must be an (n, T) array")
    n = S.shape[0]
    P = np.full((n, n), np.nan)
    for i in range(n):
        y = S[i]
        try:
            _check_pair(y, y, lag)
            Xr, target = lag_design(y, y, lag, include_x=False)
            restricted = ols_fit(Xr, target)
        except (DegenerateInputError, NumericalError):
            continue
        for j in range(n):
            if j == i:
                continue
            try:
                P[i, j] = _granger_from_restricted(S[j], y, lag, restricted).p_value
            except NumericalError:
                pass
    return PValueMatrix(P, layer, window)
