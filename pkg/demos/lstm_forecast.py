"""
A bidirectional LSTM forecaster
===============================

Train the two-layer BiLSTM on a noisy seasonal series, keep the weights of
the best validation epoch and report test correlation and RMSE. The same
model, fed windows of degree features and minimum returns, is the last
stage of the pipeline.
"""

import numpy as np

from crisisnet.pipeline import report_metrics
from crisisnet.recurrent import TrainConfig, chronological_split, init_stack, predict_series, train

rng = np.random.default_rng(0)
t = np.arange(400)
series = np.sin(2 * np.pi * t / 30) + 0.5 * np.sin(2 * np.pi * t / 7) + 0.05 * rng.standard_normal(400)

L = 12
X = np.stack([series[i : i + L] for i in range(len(series) - L)])[..., None]
y = series[L:]
train_part, val_part, test_part = chronological_split(len(y), (0.7, 0.15, 0.15))

# smaller than the default 100/50 units so the demo runs in seconds
stack = init_stack(input_size=1, units=(24, 12), seed=0)
hist = train(stack, (X[train_part], y[train_part]), TrainConfig(epochs=60, seed=0),
             validation=(X[val_part], y[val_part]))
print(f"best epoch {hist.best_epoch + 1}: validation mse {hist.val_loss[hist.best_epoch]:.4f}")

m = report_metrics(y[test_part], predict_series(stack, X[test_part]))
print(f"test rho {m['rho']:.3f}, rmse {m['rmse']:.3f} over {m['n']} points")
