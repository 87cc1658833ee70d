"""Multilayer financial networks as crisis indicators.

Granger-causality layers per indicator, random-forest interlayer spillovers,
degree features screened against return statistics, and a bidirectional
LSTM forecaster of windowed minimum returns.
"""

from .config import PipelineConfig, parse_config
from .econometrics import GrangerResult, PValueMatrix, f_cdf, granger_test, ols_fit, pvalue_matrix
from .errors import (
    ConfigError,
    CrisisNetError,
    DataError,
    DegenerateInputError,
    NumericalError,
    SingularMatrixError,
    StageError,
)
from .featurelab import feature_screen, pearson, r2_score, ridge_fit
from .forest import ForestConfig, fit_forest, importances, interlayer_importance, threshold_importance
from .marketdata import BarRecord, Layer, WindowSpec, align_panel, compute_indicators, load_bars, slide_windows
from .network import degree_feature_series, node_degree, threshold_pvalues
from .output import write_heatmap
from .pipeline import RunArtifacts, report_metrics, run_pipeline
from .recurrent import TrainConfig, bilstm_forward, init_stack, load_checkpoint, save_checkpoint, train
from .synthetic import simulate, synthesize

__version__ = "0.1.0"
