"""Single-layer adjacency matrices, node degrees and degree feature series."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEGREE_MODES = ("in", "out", "total")
DEGREE_AGGREGATES = ("mean", "sum")


@dataclass
class Adjacency:
    """0/1 relation matrix with zero diagonal.

    Entry (i, j) = 1 means node j drives node i (for Granger layers:
    series j Granger-causes series i).
    """

    entries: np.ndarray
    layer: str | None = None
    window: int | None = None
    theta: float | None = None

    @property
    def n_edges(self) -> int:
        return int(self.entries.sum())


@dataclass
class DegreeSeries:
    feature_name: str
    values: np.ndarray
    windows: np.ndarray


def threshold_pvalues(pvals, theta: float = 0.05) -> Adjacency:
    """R_ij = 1 iff p_ij <= theta; diagonal and NaN cells give no edge."""
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    P = getattr(pvals, "entries", pvals)
    P = np.asarray(P, dtype=float)
    with np.errstate(invalid="ignore"):
        R = (P <= theta).astype(np.int8)
    np.fill_diagonal(R, 0)
    return Adjacency(R, getattr(pvals, "layer", None), getattr(pvals, "window", None), theta)


def node_degree(adj, mode: str = "total") -> np.ndarray:
    """Per-node degree.

    ``in`` counts row entries (drivers of the node), ``out`` column entries
    (nodes it drives), ``total`` both.
    """
    R = np.asarray(getattr(adj, "entries", adj), dtype=float)
    if mode == "in":
        return R.sum(axis=1)
    if mode == "out":
        return R.sum(axis=0)
    if mode == "total":
        return R.sum(axis=1) + R.sum(axis=0)
    raise ValueError(f"degree mode must be one of {DEGREE_MODES}, got {mode!r}")


def degree_feature_series(
    adjacencies: Sequence,
    name: str,
    mode: str = "total",
    aggregate: str = "mean",
    windows=None,
) -> DegreeSeries:
    """Collapse each window's adjacency to one number: mean (or sum) node degree."""
    if len(adjacencies) == 0:
        raise ValueError("no adjacencies supplied")
    if aggregate not in DEGREE_AGGREGATES:
        raise ValueError(f"aggregate must be one of {DEGREE_AGGREGATES}, got {aggregate!r}")
    reduce = np.mean if aggregate == "mean" else np.sum
    values = np.array([reduce(node_degree(a, mode)) for a in adjacencies], dtype=float)
    if windows is None:
        windows = [getattr(a, "window", None) for a in adjacencies]
        if any(w is None for w in windows):
            windows = range(len(adjacencies))
    windows = np.asarray(list(windows))
    if len(windows) > 1 and np.any(np.diff(windows) != 1):
        raise ValueError("windows must be consecutive")
    return DegreeSeries(name, values, windows)
