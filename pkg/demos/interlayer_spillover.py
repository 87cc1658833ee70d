"""
Interlayer spillover with random forests
========================================

For every Return node, a regression forest predicts today's return from
yesterday's trading value of all securities. The normalised impurity
importances form a matrix whose diagonal should light up, since each
simulated security's own volume drives its next return. The matrix is
saved as a white-to-red heatmap.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from crisisnet.forest import ForestConfig, interlayer_importance, threshold_importance
from crisisnet.marketdata import Layer, align_panel, panel_layers
from crisisnet.output import write_heatmap
from crisisnet.synthetic import SynthParams, synthesize

n = 12
bars, _ = synthesize(n_securities=n, n_days=101, seed=4, params=SynthParams(n_crises=0))
_, layers = panel_layers(align_panel(bars))

imp = interlayer_importance(
    layers[Layer.TRADING_VALUE], layers[Layer.RETURN], lag=1, config=ForestConfig(n_trees=200, seed=0)
)
print("row sums:", np.round(imp.entries.sum(axis=1), 12))
hits = np.argmax(imp.entries, axis=1) == np.arange(n)
print(f"own trading value is the top predictor for {hits.sum()}/{n} securities")

# keep edges above twice the uniform share
S = threshold_importance(imp, zeta=2 / n)
print(f"{S.entries.sum()} interlayer edges, {np.trace(S.entries)} on the diagonal")

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
out.mkdir(parents=True, exist_ok=True)
write_heatmap(imp.entries, out / "tradingvalue_return.ppm")
print("heatmap written to", out / "tradingvalue_return.ppm")
