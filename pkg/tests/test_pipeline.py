import hashlib
import json

import numpy as np
import pytest

from crisisnet.config import PipelineConfig
from crisisnet.errors import DegenerateInputError, StageError
from crisisnet.marketdata import write_bars
from crisisnet.pipeline import ARTIFACT_ROLES, report_metrics, run_pipeline, stage_seed
from crisisnet.synthetic import synthesize

SMALL = dict(
    window=60, step=15, forest_trees=10, lstm_units1=6, lstm_units2=4,
    epochs=4, batch_size=8, seq_len=4, ridge_block=8,
)


@pytest.fixture(scope="module")
def bars_path(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    bars, _ = synthesize(6, 600, seed=5)
    write_bars(bars, d / "bars.csv")
    return d / "bars.csv"


def _config(bars_path, out, **extra):
    return PipelineConfig(data=str(bars_path), output_dir=str(out), **{**SMALL, **extra})


def _hashes(art, roles=None):
    return {
        p: hashlib.sha256((art.output_dir / p).read_bytes()).hexdigest()
        for r, p in art.files
        if roles is None or r in roles
    }


def test_run_emits_every_artifact_class(bars_path, tmp_path):
    art = run_pipeline(_config(bars_path, tmp_path / "a"))
    assert art.status == "complete"
    assert art.roles() == set(ARTIFACT_ROLES)
    for _, p in art.files:
        assert (art.output_dir / p).is_file()
    manifest = json.loads((art.output_dir / "manifest.json").read_text())
    assert manifest["status"] == "complete" and manifest["failed_stage"] is None
    assert {a["role"] for a in manifest["artifacts"]} == set(ARTIFACT_ROLES)
    n_windows = len(art.paths("pvalues")) // 3
    assert n_windows == (599 - 60) // 15 + 1
    assert (art.output_dir / "pvalues" / "return_0.csv").is_file()
    assert (art.output_dir / "importance" / "tradingvalue_return_0.ppm").is_file()
    first = (art.output_dir / "pvalues" / "price_0.csv").read_text().splitlines()[0]
    assert first.startswith(",")  # blank diagonal
    header = (art.output_dir / "history.csv").read_text().splitlines()[0]
    assert header == "epoch,train_mse,val_mse"
    windows = (art.output_dir / "windows.csv").read_text().splitlines()
    assert windows[0] == "window_index,window_start,start_date,end_date,crisis"
    assert len(windows) == n_windows + 1


def test_same_seed_is_byte_identical(bars_path, tmp_path):
    a = run_pipeline(_config(bars_path, tmp_path / "a"))
    b = run_pipeline(_config(bars_path, tmp_path / "b"))
    numeric = set(ARTIFACT_ROLES) - {"config"}  # the config echo records output_dir
    assert _hashes(a, numeric) == _hashes(b, numeric)
    assert (a.output_dir / "manifest.json").read_bytes() == (b.output_dir / "manifest.json").read_bytes()


def test_lstm_settings_leave_upstream_untouched(bars_path, tmp_path):
    upstream = {r for r in ARTIFACT_ROLES if r not in ("config", "train_history", "predictions", "metrics", "checkpoint")}
    a = run_pipeline(_config(bars_path, tmp_path / "a"))
    b = run_pipeline(_config(bars_path, tmp_path / "b", epochs=2, learning_rate=0.01, lstm_units1=3))
    assert _hashes(a, upstream) == _hashes(b, upstream)
    assert _hashes(a, {"checkpoint"}) != _hashes(b, {"checkpoint"})


def test_failure_names_stage_and_marks_manifest(tmp_path):
    (tmp_path / "bars.csv").write_text("date,security,close,volume\n2020-01-01,0,0,5\n")
    cfg = PipelineConfig(data=str(tmp_path / "bars.csv"), output_dir=str(tmp_path / "out"))
    with pytest.raises(StageError, match="stage 'ingest'") as info:
        run_pipeline(cfg)
    assert info.value.stage == "ingest"
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["partial"] and manifest["failed_stage"] == "ingest"


def test_too_short_for_windows(bars_path, tmp_path):
    with pytest.raises(StageError, match="windowing"):
        run_pipeline(_config(bars_path, tmp_path / "o", window=590, step=10))


def test_report_metrics(rng):
    a = rng.standard_normal(30)
    m = report_metrics(a, a)
    assert m["rho"] == pytest.approx(1.0, abs=1e-15) and m["rmse"] == 0.0
    m = report_metrics(a, a + 1)
    assert m["rho"] == pytest.approx(1.0, abs=1e-12) and m["rmse"] == pytest.approx(1.0, abs=1e-15)
    p = rng.standard_normal(30)
    m = report_metrics(a, p)
    assert abs(m["rmse"] - np.sqrt(sum((x - y) ** 2 for x, y in zip(a, p)) / 30)) < 1e-12
    assert abs(m["rho"] - np.corrcoef(a, p)[0, 1]) < 1e-12
    with pytest.raises(ValueError):
        report_metrics(a, p[:5])
    with pytest.raises(DegenerateInputError):
        report_metrics(a, np.ones(30))


def test_stage_seeds_differ():
    assert stage_seed(0, 1, 0, 0) != stage_seed(0, 1, 0, 1) != stage_seed(1, 1, 0, 1)
