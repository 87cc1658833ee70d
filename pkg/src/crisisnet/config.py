"""Pipeline configuration: ``key=value`` text files with ``#`` comments."""

from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .network import DEGREE_AGGREGATES, DEGREE_MODES

# config key -> feature label used in reports
DEGREE_FEATURES = {
    "deg_price": "degree price",
    "deg_return": "degree return",
    "deg_tradingvalue": "degree trading value",
    "deg_price_return": "degree interlayer price -> return",
    "deg_tradingvalue_price": "degree interlayer trading value -> price",
    "deg_tradingvalue_return": "degree interlayer trading value -> return",
}
LSTM_FEATURES = ("min_return", "mean_return", *DEGREE_FEATURES)


@dataclass
class PipelineConfig:
    data: str = ""
    output_dir: str = "out"
    seed: int = 0
    window: int = 100
    step: int = 30
    log_returns: bool = False
    lag: int = 1
    theta: float = 0.05
    degree_mode: str = "total"
    degree_aggregate: str = "mean"
    zeta: float | None = None  # None -> 2 / n_securities
    interlayer_lag: int = 1
    forest_trees: int = 200
    forest_max_depth: int = 10
    forest_min_leaf: int = 5
    forest_mtry: int | None = None  # None -> ceil(n / 3)
    ridge_lambda: float = 1.0
    ridge_cv: bool = False
    ridge_block: int = 24
    lstm_units1: int = 100
    lstm_units2: int = 50
    dropout: float = 0.3
    learning_rate: float = 0.001
    epochs: int = 300
    batch_size: int = 32
    seq_len: int = 12
    lstm_features: tuple = ("min_return", "deg_tradingvalue", "deg_tradingvalue_return")
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15
    crisis_dates: tuple = ()
    # directory relative paths are resolved against; not serialised
    base_dir: str = field(default=".", compare=False, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(ok, key, msg):
            if not ok:
                raise ConfigError(f"{key}: {msg} (got {getattr(self, key)!r})")

        need(self.window >= 2, "window", "must be >= 2")
        need(self.step >= 1, "step", "must be >= 1")
        need(self.step <= self.window, "step", "must not exceed window")
        need(self.lag >= 1, "lag", "must be >= 1")
        need(0 < self.theta < 1, "theta", "must lie in (0, 1)")
        need(self.degree_mode in DEGREE_MODES, "degree_mode", f"must be one of {DEGREE_MODES}")
        need(self.degree_aggregate in DEGREE_AGGREGATES, "degree_aggregate", f"must be one of {DEGREE_AGGREGATES}")
        need(self.zeta is None or self.zeta >= 0, "zeta", "must be >= 0")
        need(self.interlayer_lag >= 1, "interlayer_lag", "must be >= 1")
        need(self.forest_trees >= 1, "forest_trees", "must be >= 1")
        need(self.forest_max_depth >= 0, "forest_max_depth", "must be >= 0")
        need(self.forest_min_leaf >= 1, "forest_min_leaf", "must be >= 1")
        need(self.forest_mtry is None or self.forest_mtry >= 1, "forest_mtry", "must be >= 1")
        need(self.ridge_lambda >= 0, "ridge_lambda", "must be >= 0")
        need(self.ridge_block >= 3, "ridge_block", "must be >= 3")
        need(self.lstm_units1 >= 1, "lstm_units1", "must be >= 1")
        need(self.lstm_units2 >= 1, "lstm_units2", "must be >= 1")
        need(0 <= self.dropout < 1, "dropout", "must lie in [0, 1)")
        need(self.learning_rate > 0, "learning_rate", "must be > 0")
        need(self.epochs >= 1, "epochs", "must be >= 1")
        need(self.batch_size >= 1, "batch_size", "must be >= 1")
        need(self.seq_len >= 1, "seq_len", "must be >= 1")
        need(len(self.lstm_features) >= 1, "lstm_features", "must list at least one feature")
        unknown = [f for f in self.lstm_features if f not in LSTM_FEATURES]
        need(not unknown, "lstm_features", f"unknown feature(s) {unknown}; choose from {LSTM_FEATURES}")
        for key in ("train_frac", "val_frac", "test_frac"):
            need(0 < getattr(self, key) < 1, key, "must lie in (0, 1)")
        total = self.train_frac + self.val_frac + self.test_frac
        need(abs(total - 1) < 1e-9, "test_frac", "train_frac + val_frac + test_frac must equal 1")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_optional(conv):
    def parse(s):
        return None if s.strip().lower() in ("", "auto", "none") else conv(s)

    return parse


def _parse_list(s):
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _parse_dates(s):
    return tuple(dt.date.fromisoformat(x) for x in _parse_list(s))


_PARSERS = {
    "zeta": _parse_optional(float),
    "forest_mtry": _parse_optional(int),
    "lstm_features": _parse_list,
    "crisis_dates": _parse_dates,
}


def _parser_for(f):
    if f.name in _PARSERS:
        return _PARSERS[f.name]
    default = f.default
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str


def _format_value(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(x.isoformat() if isinstance(x, dt.date) else str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


SERIALISED = [f for f in fields(PipelineConfig) if f.name != "base_dir"]


def parse_config_text(text: str, base_dir=".") -> PipelineConfig:
    known = {f.name: f for f in SERIALISED}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parser_for(known[key])(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: invalid value {value!r} ({exc})") from None
    return PipelineConfig(**values, base_dir=str(base_dir))


def parse_config(path) -> PipelineConfig:
    """Read a config file; absent keys take their defaults, unknown keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), base_dir=path.parent)


def format_config(config: PipelineConfig) -> str:
    return "".join(f"{f.name}={_format_value(getattr(config, f.name))}\n" for f in SERIALISED)


def with_overrides(config: PipelineConfig, **changes) -> PipelineConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    return dataclasses.replace(config, **changes)
