import datetime as dt

import pytest

from crisisnet.config import PipelineConfig, format_config, parse_config, parse_config_text, with_overrides
from crisisnet.errors import ConfigError


def test_empty_file_gives_defaults(tmp_path):
    (tmp_path / "c.cfg").write_text("")
    cfg = parse_config(tmp_path / "c.cfg")
    assert (cfg.window, cfg.step, cfg.theta) == (100, 30, 0.05)
    assert cfg.zeta is None and cfg.seed == 0
    assert cfg == PipelineConfig()


def test_theta_out_of_range():
    with pytest.raises(ConfigError, match="theta"):
        parse_config_text("theta=1.5")


@pytest.mark.parametrize(
    "text, key",
    [
        ("window=abc", "window"),
        ("log_returns=maybe", "log_returns"),
        ("lstm_features=min_return,bogus", "lstm_features"),
        ("crisis_dates=2020-13-01", "crisis_dates"),
        ("degree_mode=sideways", "degree_mode"),
        ("train_frac=0.8", "test_frac"),
        ("step=200", "step"),
    ],
)
def test_invalid_values_name_key(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config_text(text)


def test_unknown_key_and_syntax():
    with pytest.raises(ConfigError, match="unknown key 'windw'"):
        parse_config_text("windw=5")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("# ok\njust words\n")
    with pytest.raises(ConfigError, match="not found"):
        parse_config("/nonexistent/c.cfg")


def test_round_trip():
    assert parse_config_text(format_config(PipelineConfig())) == PipelineConfig()
    custom = PipelineConfig(
        zeta=0.07, forest_mtry=4, log_returns=True, crisis_dates=(dt.date(2008, 9, 15),),
        lstm_features=("min_return", "deg_return"), learning_rate=0.1 + 0.2,
    )
    assert parse_config_text(format_config(custom)) == custom


def test_comments_and_overrides(tmp_path):
    (tmp_path / "c.cfg").write_text("data = bars.csv  # relative\nseed=3\nzeta=auto\n")
    cfg = parse_config(tmp_path / "c.cfg")
    assert cfg.resolve(cfg.data) == tmp_path / "bars.csv"
    assert cfg.seed == 3 and cfg.zeta is None
    moved = with_overrides(cfg, lag=2, zeta=None)
    assert moved.lag == 2 and moved.seed == 3
    with pytest.raises(ConfigError, match="lag"):
        with_overrides(cfg, lag=0)
