"""Independent reference implementations used as test oracles."""

import math

import numpy as np
from scipy import integrate, stats


def f_density(x, d1, d2):
    logc = math.lgamma((d1 + d2) / 2) - math.lgamma(d1 / 2) - math.lgamma(d2 / 2)
    return math.exp(
        logc + (d1 / 2) * math.log(d1 / d2) + (d1 / 2 - 1) * math.log(x) - ((d1 + d2) / 2) * math.log1p(d1 * x / d2)
    )


def quad_cdf(x, d1, d2):
    """F(d1, d2) CDF by adaptive quadrature of the density."""
    if x == 0:
        return 0.0
    val, _ = integrate.quad(f_density, 0, x, args=(d1, d2), epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def two_regression_pvalue(x, y):
    """Lag-1 Granger F-test from two lstsq fits and scipy's F survival function."""
    T = len(y)
    target = y[1:]
    Xr = np.column_stack([np.ones(T - 1), y[:-1]])
    Xu = np.column_stack([Xr, x[:-1]])
    rss = [np.sum((target - X @ np.linalg.lstsq(X, target, rcond=None)[0]) ** 2) for X in (Xr, Xu)]
    dof = T - 1 - 3
    F = (rss[0] - rss[1]) / (rss[1] / dof)
    return F, stats.f.sf(F, 1, dof)


def gd_ridge(X, y, lam, tol=1e-14, max_iter=200_000):
    """Gradient descent on ||y - b0 - X b||^2 + lam ||b||^2 until the step stalls."""
    A = np.column_stack([np.ones(len(y)), X])
    P = np.eye(A.shape[1]) * lam
    P[0, 0] = 0.0
    H = 2 * (A.T @ A + P)
    step = 1.0 / np.linalg.eigvalsh(H).max()
    beta = np.zeros(A.shape[1])
    for _ in range(max_iter):
        grad = 2 * (A.T @ (A @ beta - y)) + 2 * P @ beta
        beta -= step * grad
        if np.max(np.abs(step * grad)) < tol:
            break
    return beta


def chain_layer(n, T, seed, coef=0.8, noise=1.0):
    """n series where series i is driven by series i-1 at lag 1."""
    rng = np.random.default_rng(seed)
    X = np.zeros((n, T))
    e = rng.standard_normal((n, T)) * noise
    X[:, 0] = e[:, 0]
    for t in range(1, T):
        X[:, t] = e[:, t]
        X[1:, t] += coef * X[:-1, t - 1]
    return X


def numeric_gradients(stack, X, y, mask, loss, forward, step=1e-5):
    """Central differences of the loss w.r.t. every parameter array."""
    out = {}
    for name, p in stack.params().items():
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            up = loss(forward(stack, X, training=True, mask=mask)[0], y)
            p[idx] = old - step
            down = loss(forward(stack, X, training=True, mask=mask)[0], y)
            p[idx] = old
            num[idx] = (up - down) / (2 * step)
        out[name] = num
    return out
