"""Ridge regression, R^2 and correlation screening of degree features."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .econometrics import pivoted_cholesky_solve
from .errors import DegenerateInputError, SingularMatrixError

logger = logging.getLogger(__name__)

# row labels of the correlation table, in order
RETURN_STATS = ("mean return", "minimum return", "maximum return", "return variance")
PRIMARY_STAT = "minimum return"
CV_LAMBDAS = (0.01, 0.1, 1.0, 10.0, 100.0)


@dataclass
class RidgeFit:
    """Intercept first, then one coefficient per design column."""

    coefficients: np.ndarray
    lam: float

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.coefficients[1:]

    def predict(self, design) -> np.ndarray:
        X = np.asarray(design, dtype=float)
        if X.ndim == 1:
            # a single feature column, as accepted by ridge_fit, or one row
            X = X[:, None] if len(self.slopes) == 1 else X[None]
        return self.intercept + X @ self.slopes


@dataclass
class CorrelationReport:
    feature_name: str
    correlations: dict = field(default_factory=dict)


def ridge_fit(design, targets, lam: float = 1.0) -> RidgeFit:
    """Minimise ||y - b0 - X b||^2 + lam * ||b||^2; the intercept b0 is not penalised.

    Solved in closed form from the regularised normal equations.
    """
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(targets, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"design {X.shape} and targets {y.shape} are not conformable")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 observations")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    A = np.column_stack([np.ones(len(y)), X])
    G = A.T @ A
    penalty = np.full(G.shape[0], float(lam))
    penalty[0] = 0.0
    G[np.diag_indices_from(G)] += penalty
    try:
        beta = pivoted_cholesky_solve(G, A.T @ y)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"ridge system is singular at lambda={lam}: {exc}") from None
    return RidgeFit(beta, float(lam))


def r2_score(targets, predictions) -> float:
    y = np.asarray(targets, dtype=float)
    p = np.asarray(predictions, dtype=float)
    if y.shape != p.shape or y.ndim != 1 or len(y) < 2:
        raise ValueError("targets and predictions must be 1-D of equal length >= 2")
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise DegenerateInputError("targets are constant")
    return float(1.0 - np.sum((y - p) ** 2) / ss_tot)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("inputs must be 1-D of equal length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    sa = np.sqrt(da @ da)
    sb = np.sqrt(db @ db)
    if sa == 0 or sb == 0:
        raise DegenerateInputError("pearson correlation of a constant series")
    return float(np.clip((da @ db) / (sa * sb), -1.0, 1.0))


def window_return_stats(window_returns) -> dict[str, np.ndarray]:
    """Mean, min, max and variance of each row of a (n_windows, size) return block."""
    R = np.asarray(window_returns, dtype=float)
    return {
        "mean return": R.mean(axis=1),
        "minimum return": R.min(axis=1),
        "maximum return": R.max(axis=1),
        "return variance": R.var(axis=1),
    }


def feature_screen(features: Sequence, return_windows: Mapping[str, np.ndarray]) -> list[CorrelationReport]:
    """Correlate every degree feature with each windowed return statistic.

    Reports are sorted by |rho| against the minimum return, largest first.
    Constant features carry no correlation and are skipped with a warning.
    """
    missing = [s for s in RETURN_STATS if s not in return_windows]
    if missing:
        raise ValueError(f"return_windows lacks {missing}")
    n = {len(np.asarray(v)) for v in return_windows.values()}
    reports = []
    for feat in features:
        values = np.asarray(feat.values, dtype=float)
        if len(n) != 1 or len(values) not in n:
            raise ValueError(f"feature {feat.feature_name!r} is not aligned with the return windows")
        if np.ptp(values) == 0:
            logger.warning("feature %r is constant; skipped from screening", feat.feature_name)
            continue
        corr = {s: pearson(values, return_windows[s]) for s in RETURN_STATS}
        reports.append(CorrelationReport(feat.feature_name, corr))
    reports.sort(key=lambda r: -abs(r.correlations[PRIMARY_STAT]))
    return reports


def format_report(reports: Sequence[CorrelationReport]) -> str:
    """CSV ``feature,stat,rho`` with rho as a percentage to two decimals."""
    lines = ["feature,stat,rho"]
    for r in reports:
        for s in RETURN_STATS:
            lines.append(f"{r.feature_name},{s},{100 * r.correlations[s]:.2f}%")
    return "\n".join(lines) + "\n"


def zscore_columns(X):
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (X - mu) / sd


def cv_lambda(design, targets, lambdas=CV_LAMBDAS, folds: int = 5) -> float:
    """Pick lambda by contiguous k-fold cross-validated squared error."""
    X = np.asarray(design, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    y = np.asarray(targets, dtype=float)
    m = len(y)
    if m < folds * 2:
        raise ValueError(f"{m} observations are too few for {folds}-fold cross-validation")
    edges = np.linspace(0, m, folds + 1).astype(int)
    best, best_err = None, np.inf
    for lam in lambdas:
        err = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            mask = np.ones(m, bool)
            mask[a:b] = False
            fit = ridge_fit(X[mask], y[mask], lam)
            err += np.sum((y[~mask] - fit.predict(X[~mask])) ** 2)
        if err < best_err:
            best, best_err = lam, err
    return float(best)


def rolling_r2(design, targets, block: int, lam: float = 1.0, step: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """In-sample R^2 of ridge refits on consecutive blocks of ``block`` rows.

    Blocks with constant targets are skipped. Returns (block starts, R^2).
    """
    X = np.asarray(design, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    y = np.asarray(targets, dtype=float)
    starts, scores = [], []
    for s in range(0, len(y) - block + 1, step):
        Xb, yb = zscore_columns(X[s : s + block]), y[s : s + block]
        if np.ptp(yb) == 0:
            continue
        fit = ridge_fit(Xb, yb, lam)
        starts.append(s)
        scores.append(r2_score(yb, fit.predict(Xb)))
    return np.array(starts, dtype=int), np.array(scores)
