"""End-to-end run: ingest -> windows -> Granger layers -> interlayer forests ->
screening and ridge validation -> BiLSTM forecast -> metrics.

Every stage draws randomness from its own seed stream derived from
``config.seed``, so changing a downstream setting (say, the LSTM epochs)
never perturbs upstream artifacts.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import featurelab as fl
from .config import DEGREE_FEATURES, PipelineConfig, format_config
from .econometrics import pvalue_matrix
from .errors import CrisisNetError, DataError, DegenerateInputError, NumericalError, StageError
from .forest import RELATIONS, ForestConfig, interlayer_importance, threshold_importance
from .marketdata import Layer, WindowSpec, align_panel, load_bars, panel_layers, standardize
from .network import degree_feature_series, threshold_pvalues
from .output import format_value, write_heatmap, write_matrix_csv
from .recurrent import TrainConfig, chronological_split, init_stack, predict_series, save_checkpoint, train

logger = logging.getLogger(__name__)

LAYER_SLUGS = {Layer.PRICE: "price", Layer.RETURN: "return", Layer.TRADING_VALUE: "tradingvalue"}
RELATION_SLUGS = {
    ("Price", "Return"): "price_return",
    ("TradingValue", "Price"): "tradingvalue_price",
    ("TradingValue", "Return"): "tradingvalue_return",
}
ARTIFACT_ROLES = (
    "config",
    "windows",
    "windowed_features",
    "pvalues",
    "adjacency",
    "importance",
    "importance_heatmap",
    "interlayer_adjacency",
    "degree_features",
    "screening_report",
    "ridge_report",
    "train_history",
    "predictions",
    "metrics",
    "checkpoint",
)
_STAGE_IDS = {"interlayer": 1, "lstm": 2}


@dataclass
class RunArtifacts:
    output_dir: Path
    files: list = field(default_factory=list)  # (role, path relative to output_dir)
    status: str = "running"
    failed_stage: str | None = None
    summary: dict = field(default_factory=dict)

    def add(self, role: str, path: Path) -> Path:
        self.files.append((role, str(Path(path).relative_to(self.output_dir).as_posix())))
        return path

    def roles(self) -> set:
        return {r for r, _ in self.files}

    def paths(self, role: str) -> list[Path]:
        return [self.output_dir / p for r, p in self.files if r == role]

    def write_manifest(self) -> Path:
        doc = {
            "status": self.status,
            "failed_stage": self.failed_stage,
            "partial": self.status != "complete",
            "artifacts": [{"role": r, "path": p} for r, p in self.files],
            "summary": self.summary,
        }
        path = self.output_dir / "manifest.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def stage_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def report_metrics(actual, predicted) -> dict:
    """Pearson rho and RMSE between two equal-length series."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 1 or len(a) == 0:
        raise ValueError(f"actual {a.shape} and predicted {p.shape} must be equal-length 1-D series")
    return {"rho": fl.pearson(a, p), "rmse": float(np.sqrt(np.mean((a - p) ** 2))), "n": int(len(a))}


def _write_series_csv(path, header, columns):
    rows = [",".join(header)]
    for vals in zip(*columns):
        rows.append(",".join(v if isinstance(v, str) else format_value(v) for v in vals))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


class _Run:
    def __init__(self, config: PipelineConfig):
        self.cfg = config
        out = config.resolve(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.art = RunArtifacts(out)
        self.out = out

    def sub(self, name):
        d = self.out / name
        d.mkdir(exist_ok=True)
        return d

    # ---- stages -------------------------------------------------------
    def ingest(self):
        cfg = self.cfg
        if not cfg.data:
            raise DataError("config key 'data' is empty")
        bars = load_bars(cfg.resolve(cfg.data))
        panel = align_panel(bars)
        self.securities = panel.securities
        self.dates, self.layers = panel_layers(panel, cfg.log_returns)
        self.n = len(self.securities)
        if self.n < 2:
            raise DataError(f"need at least 2 securities, got {self.n}")
        self.art.summary["n_securities"] = self.n
        self.art.summary["n_days"] = len(self.dates)
        self.art.summary["dropped_dates"] = [d.isoformat() for d in panel.dropped_dates]
        path = self.out / "config.txt"
        path.write_text(format_config(cfg), encoding="utf-8")
        self.art.add("config", path)

    def windowing(self):
        cfg = self.cfg
        spec = WindowSpec(cfg.window, cfg.step)
        D = len(self.dates)
        self.bounds = spec.bounds(D)
        if len(self.bounds) < 2:
            raise DataError(f"{D} aligned days give {len(self.bounds)} window(s); need at least 2")
        self.n_windows = len(self.bounds)
        crisis = set(cfg.crisis_dates)
        flags = [int(any(d in crisis for d in self.dates[a:b])) for a, b in self.bounds]
        _write_series_csv(
            self.art.add("windows", self.out / "windows.csv"),
            ["window_index", "window_start", "start_date", "end_date", "crisis"],
            [
                list(range(self.n_windows)),
                [a for a, _ in self.bounds],
                [self.dates[a].isoformat() for a, _ in self.bounds],
                [self.dates[b - 1].isoformat() for _, b in self.bounds],
                flags,
            ],
        )
        self.window_starts = np.array([a for a, _ in self.bounds])
        # equal-weight market return, windowed
        market = self.layers[Layer.RETURN].mean(axis=0)
        self.return_stats = fl.window_return_stats(np.stack([market[a:b] for a, b in self.bounds]))
        d = self.sub("windowed")
        for layer, slug in LAYER_SLUGS.items():
            blocks = np.stack([self.layers[layer][:, a:b] for a, b in self.bounds])  # (W, n, size)
            for agg, fn in (("mean", np.mean), ("min", np.min)):
                path = d / f"{slug}_{agg}.csv"
                write_matrix_csv(fn(blocks, axis=2), path)
                self.art.add("windowed_features", path)
        _write_series_csv(
            self.art.add("windowed_features", d / "market_return_stats.csv"),
            ["window_index", *[s.replace(" ", "_") for s in fl.RETURN_STATS]],
            [list(range(self.n_windows)), *[self.return_stats[s] for s in fl.RETURN_STATS]],
        )

    def granger(self):
        cfg = self.cfg
        dp, da = self.sub("pvalues"), self.sub("adjacency")
        self.adjacency = {}
        for layer, slug in LAYER_SLUGS.items():
            adjs = []
            for k, (a, b) in enumerate(self.bounds):
                pm = pvalue_matrix(self.layers[layer][:, a:b], cfg.lag, layer=layer.value, window=k)
                write_matrix_csv(pm.entries, self.art.add("pvalues", dp / f"{slug}_{k}.csv"), blank_diagonal=True)
                adj = threshold_pvalues(pm, cfg.theta)
                write_matrix_csv(adj.entries, self.art.add("adjacency", da / f"{slug}_{k}.csv"))
                adjs.append(adj)
            self.adjacency[slug] = adjs

    def interlayer(self):
        cfg = self.cfg
        self.zeta = 2.0 / self.n if cfg.zeta is None else cfg.zeta
        self.art.summary["zeta"] = self.zeta
        di, ds = self.sub("importance"), self.sub("interlayer")
        self.interlayer_adj = {}
        diag_hits = []
        for r_idx, (src, dst) in enumerate(RELATIONS):
            slug = RELATION_SLUGS[(src, dst)]
            S_all = self.layers[Layer(src)]
            Y_all = self.layers[Layer(dst)]
            adjs = []
            for k, (a, b) in enumerate(self.bounds):
                fc = ForestConfig(
                    n_trees=cfg.forest_trees,
                    max_depth=cfg.forest_max_depth,
                    min_samples_leaf=cfg.forest_min_leaf,
                    mtry=cfg.forest_mtry,
                    seed=stage_seed(cfg.seed, _STAGE_IDS["interlayer"], r_idx, k),
                )
                imp = interlayer_importance(S_all[:, a:b], Y_all[:, a:b], cfg.interlayer_lag, fc,
                                            relation=(src, dst), window=k)
                write_matrix_csv(imp.entries, self.art.add("importance", di / f"{slug}_{k}.csv"))
                write_heatmap(imp.entries, self.art.add("importance_heatmap", di / f"{slug}_{k}.ppm"))
                S = threshold_importance(imp, self.zeta)
                S.window = k
                write_matrix_csv(S.entries, self.art.add("interlayer_adjacency", ds / f"{slug}_{k}.csv"))
                adjs.append(S)
                if slug == "tradingvalue_return":
                    diag_hits.append(np.diag(S.entries))
            self.interlayer_adj[slug] = adjs
        self.art.summary["tradingvalue_return_diagonal_rate"] = float(np.mean(diag_hits))

    def degrees(self):
        cfg = self.cfg
        d = self.sub("degrees")
        self.features = {}
        sources = {**self.adjacency, **self.interlayer_adj}
        for key, label in DEGREE_FEATURES.items():
            series = degree_feature_series(
                sources[key[4:]], label, cfg.degree_mode, cfg.degree_aggregate, windows=range(self.n_windows)
            )
            self.features[key] = series
            _write_series_csv(
                self.art.add("degree_features", d / f"{key}.csv"),
                ["window_start", "value"],
                [self.window_starts, series.values],
            )

    def screening(self):
        cfg = self.cfg
        reports = fl.feature_screen(list(self.features.values()), self.return_stats)
        path = self.art.add("screening_report", self.out / "screening.csv")
        path.write_text(fl.format_report(reports), encoding="utf-8")
        self.art.summary["screening_order"] = [r.feature_name for r in reports]

        # ridge validation of the degree features fed to the LSTM (all degree features if none are)
        keys = [k for k in cfg.lstm_features if k in DEGREE_FEATURES] or list(DEGREE_FEATURES)
        X = np.column_stack([self.features[k].values for k in keys])
        y = self.return_stats[fl.PRIMARY_STAT]
        Xz = fl.zscore_columns(X)
        lam = fl.cv_lambda(Xz, y) if cfg.ridge_cv and len(y) >= 10 else cfg.ridge_lambda
        fit = fl.ridge_fit(Xz, y, lam)
        fitted = fit.predict(Xz)
        block = min(cfg.ridge_block, len(y))
        starts, r2 = fl.rolling_r2(X, y, block, lam)
        _write_series_csv(
            self.art.add("ridge_report", self.out / "ridge_r2.csv"), ["block_start_window", "r2"], [starts, r2]
        )
        rows = [("lambda", lam), ("r2_full", fl.r2_score(y, fitted))]
        try:
            rows.append(("rho_fitted", fl.pearson(y, fitted)))
        except DegenerateInputError:
            rows.append(("rho_fitted", float("nan")))
        rows.append(("intercept", fit.intercept))
        rows += [(f"coef_{k}", c) for k, c in zip(keys, fit.slopes)]
        _write_series_csv(
            self.art.add("ridge_report", self.out / "ridge_summary.csv"),
            ["key", "value"],
            [[r[0] for r in rows], [r[1] for r in rows]],
        )

    def lstm(self):
        cfg = self.cfg
        W, L = self.n_windows, cfg.seq_len
        if W - L < 3:
            raise DataError(f"{W} windows leave too few sequences for seq_len={L}")
        cols = []
        for key in cfg.lstm_features:
            if key == "min_return":
                cols.append(self.return_stats["minimum return"])
            elif key == "mean_return":
                cols.append(self.return_stats["mean return"])
            else:
                cols.append(self.features[key].values)
        F = np.column_stack(cols)
        target = self.return_stats["minimum return"]
        idx = np.arange(L, W)  # window index of each sample's target
        s_tr, s_va, s_te = chronological_split(len(idx), (cfg.train_frac, cfg.val_frac, cfg.test_frac))
        if min(len(range(*s.indices(len(idx)))) for s in (s_tr, s_va, s_te)) < 1:
            raise DataError(f"{len(idx)} sequences cannot fill train/validation/test splits")
        # standardisation statistics from windows visible to training only
        seen = slice(0, idx[s_tr][-1] + 1)
        mu, sd = F[seen].mean(axis=0), F[seen].std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        Fz = (F - mu) / sd
        t_mu, t_sd = target[seen].mean(), target[seen].std()
        if not t_sd > 0:
            raise NumericalError("training-period minimum returns are constant")
        yz = standardize(target, t_mu, t_sd)
        X = np.stack([Fz[t - L : t] for t in idx])
        y = yz[idx]

        stack = init_stack(F.shape[1], (cfg.lstm_units1, cfg.lstm_units2), cfg.dropout,
                           seed=stage_seed(cfg.seed, _STAGE_IDS["lstm"], 0))
        tc = TrainConfig(epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.learning_rate,
                         seed=stage_seed(cfg.seed, _STAGE_IDS["lstm"], 1))
        hist = train(stack, (X[s_tr], y[s_tr]), tc, validation=(X[s_va], y[s_va]))
        self.art.add("train_history", self.out / "history.csv").write_text(hist.to_csv(), encoding="utf-8")
        pred = predict_series(stack, X)
        split = np.empty(len(idx), dtype=object)
        split[s_tr], split[s_va], split[s_te] = "train", "validation", "test"
        _write_series_csv(
            self.art.add("predictions", self.out / "predictions.csv"),
            ["window_index", "start_date", "split", "actual", "predicted"],
            [idx, [self.dates[self.bounds[t][0]].isoformat() for t in idx], list(split), y, pred],
        )
        try:
            metrics = report_metrics(y[s_te], pred[s_te])
        except DegenerateInputError as exc:
            raise NumericalError(f"test-set correlation undefined: {exc}") from None
        rows = [("rho", metrics["rho"]), ("rmse", metrics["rmse"]), ("n_test", metrics["n"]),
                ("best_epoch", hist.best_epoch + 1), ("best_val_mse", hist.val_loss[hist.best_epoch])]
        _write_series_csv(self.art.add("metrics", self.out / "metrics.csv"), ["metric", "value"],
                          [[r[0] for r in rows], [r[1] for r in rows]])
        save_checkpoint(stack, self.art.add("checkpoint", self.out / "model.ckpt"))
        self.art.summary["test_rho"] = metrics["rho"]
        self.art.summary["test_rmse"] = metrics["rmse"]


STAGES = ("ingest", "windowing", "granger", "interlayer", "degrees", "screening", "lstm")


def run_pipeline(config: PipelineConfig) -> RunArtifacts:
    """Execute every stage in order and write all artifacts plus ``manifest.json``.

    A failing stage raises StageError naming it; the manifest is still
    written, marked partial, with whatever artifacts were produced.
    """
    run = _Run(config)
    for stage in STAGES:
        logger.info("stage %s", stage)
        try:
            getattr(run, stage)()
        except (CrisisNetError, ValueError, ArithmeticError) as exc:
            run.art.status = "failed"
            run.art.failed_stage = stage
            run.art.write_manifest()
            raise StageError(stage, exc) from exc
    run.art.status = "complete"
    run.art.write_manifest()
    return run.art
