"""
Degree features as crisis indicators
====================================

Slide a 100-day window in 30-day steps, turn each window's Return layer
into a Granger network and record its mean degree. Correlate that series
with the windowed market return statistics, then check how much of the
minimum return a ridge fit on the degree explains.
"""

import numpy as np

from crisisnet.econometrics import pvalue_matrix
from crisisnet.featurelab import feature_screen, format_report, r2_score, ridge_fit, window_return_stats
from crisisnet.marketdata import Layer, WindowSpec, align_panel, panel_layers
from crisisnet.network import degree_feature_series, threshold_pvalues
from crisisnet.synthetic import synthesize

bars, truth = synthesize(n_securities=10, n_days=1200, seed=2)
dates, layers = panel_layers(align_panel(bars))
bounds = WindowSpec(100, 30).bounds(len(dates))
print(f"{len(bounds)} windows; crises start on", ", ".join(d.isoformat() for d in truth.crisis_dates))

R = layers[Layer.RETURN]
adjs = [threshold_pvalues(pvalue_matrix(R[:, a:b]), 0.05) for a, b in bounds]
degree = degree_feature_series(adjs, "degree return")

# equal-weight market return per window
market = R.mean(axis=0)
stats = window_return_stats(np.stack([market[a:b] for a, b in bounds]))
print(format_report(feature_screen([degree], stats)))

fit = ridge_fit(degree.values, stats["minimum return"], lam=0.0)
print(f"R^2 of minimum return on degree: {r2_score(stats['minimum return'], fit.predict(degree.values)):.3f}")
