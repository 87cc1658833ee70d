"""Bar ingestion, indicator layers and sliding-window aggregation."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

CSV_HEADER = ("date", "security", "close", "volume")


class Layer(str, enum.Enum):
    PRICE = "Price"
    RETURN = "Return"
    TRADING_VALUE = "TradingValue"


AGGREGATORS = {"mean": np.mean, "min": np.min, "max": np.max, "var": np.var}


@dataclass(frozen=True, order=True)
class BarRecord:
    """One security-day observation. Ordering is (security, date)."""

    security: int
    date: dt.date
    close: float = field(compare=False)
    volume: float = field(compare=False)

    def __post_init__(self):
        if not self.close > 0:
            raise DataError(f"close must be > 0, got {self.close!r}")
        if not self.volume >= 0:
            raise DataError(f"volume must be >= 0, got {self.volume!r}")


@dataclass
class IndicatorSeries:
    security: int
    layer: Layer
    values: np.ndarray
    dates: list

    def __post_init__(self):
        if len(self.values) != len(self.dates):
            raise DataError("values and dates must have equal length")


@dataclass(frozen=True)
class WindowSpec:
    size: int = 100
    step: int = 30

    def __post_init__(self):
        if self.size < 1:
            raise ValueError(f"window size must be >= 1, got {self.size}")
        if self.step < 1:
            raise ValueError(f"window step must be >= 1, got {self.step}")
        if self.step > self.size:
            raise ValueError(f"window step ({self.step}) must not exceed size ({self.size})")

    def count(self, length: int) -> int:
        """Number of complete windows over a series of ``length`` values."""
        if length < self.size:
            return 0
        return (length - self.size) // self.step + 1

    def bounds(self, length: int) -> list[tuple[int, int]]:
        """Half-open ``(start, stop)`` index pairs of every complete window."""
        return [(k * self.step, k * self.step + self.size) for k in range(self.count(length))]


@dataclass
class WindowedFeatures:
    security: int
    layer: Layer
    aggregator: str
    values: np.ndarray
    window_starts: np.ndarray


@dataclass
class Panel:
    """Rectangular security x day panel after inner-join alignment."""

    dates: list
    securities: list
    close: np.ndarray  # (n_securities, n_days)
    volume: np.ndarray
    dropped_dates: list = field(default_factory=list)


def _parse_row(row, lineno):
    if len(row) != 4:
        raise DataError(f"line {lineno}: expected 4 fields, got {len(row)}")
    try:
        date = dt.date.fromisoformat(row[0].strip())
        security = int(row[1])
        close = float(row[2])
        volume = float(row[3])
    except ValueError as exc:
        raise DataError(f"line {lineno}: malformed row {row!r} ({exc})") from None
    if not np.isfinite(close) or close <= 0:
        raise DataError(f"line {lineno}: close must be > 0, got {row[2]!r}")
    if not np.isfinite(volume) or volume < 0:
        raise DataError(f"line {lineno}: volume must be >= 0, got {row[3]!r}")
    return BarRecord(security, date, close, volume)


def load_bars(path) -> list[BarRecord]:
    """Read a ``date,security,close,volume`` CSV into records sorted by (security, date).

    Raises DataError for a missing file, a malformed row (with its line
    number), a non-positive close, or a repeated (date, security) pair.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"bar file not found: {path}")
    records = []
    seen = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(f"line 1: expected header {','.join(CSV_HEADER)}, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            rec = _parse_row(row, lineno)
            key = (rec.security, rec.date)
            if key in seen:
                raise DataError(
                    f"line {lineno}: duplicate (date, security) = ({rec.date}, {rec.security}),"
                    f" first seen on line {seen[key]}"
                )
            seen[key] = lineno
            records.append(rec)
    records.sort()
    return records


def write_bars(records: Iterable[BarRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for r in records:
            fh.write(f"{r.date.isoformat()},{r.security},{r.close!r},{r.volume!r}\n")


def load_tickers() -> dict[int, str]:
    """Bundled security id -> ticker table."""
    text = resources.files("crisisnet").joinpath("data/tickers.csv").read_text(encoding="utf-8")
    rows = list(csv.reader(text.splitlines()))[1:]
    return {int(sid): ticker for sid, ticker in rows}


def _group(bars):
    by_sec = {}
    for b in bars:
        by_sec.setdefault(b.security, []).append(b)
    for recs in by_sec.values():
        recs.sort()
    return dict(sorted(by_sec.items()))


def align_panel(bars: Sequence[BarRecord]) -> Panel:
    """Inner-join all securities on their common dates.

    Dates missing for any security are dropped for every security and
    reported in ``Panel.dropped_dates`` (and logged).
    """
    by_sec = _group(bars)
    if not by_sec:
        raise DataError("no bars to align")
    all_dates = sorted({b.date for b in bars})
    common = set(all_dates)
    for recs in by_sec.values():
        common &= {r.date for r in recs}
    dates = sorted(common)
    dropped = [d for d in all_dates if d not in common]
    if dropped:
        logger.warning("alignment dropped %d date(s) not present for every security", len(dropped))
    index = {d: k for k, d in enumerate(dates)}
    n, T = len(by_sec), len(dates)
    close = np.empty((n, T))
    volume = np.empty((n, T))
    for i, recs in enumerate(by_sec.values()):
        for r in recs:
            k = index.get(r.date)
            if k is not None:
                close[i, k] = r.close
                volume[i, k] = r.volume
    return Panel(dates, list(by_sec), close, volume, dropped)


def simple_returns(prices, log_returns=False):
    prices = np.asarray(prices, dtype=float)
    if log_returns:
        return np.diff(np.log(prices), axis=-1)
    return np.diff(prices, axis=-1) / prices[..., :-1]


def compute_indicators(bars: Sequence[BarRecord], log_returns: bool = False) -> list[IndicatorSeries]:
    """Price, Return and TradingValue series for every security.

    Return is the simple return (P_t - P_{t-1}) / P_{t-1} unless
    ``log_returns`` is set, and is dated at t, so it is one element
    shorter than the price series. TradingValue is close * volume.
    """
    out = []
    for sec, recs in _group(bars).items():
        if len(recs) < 2:
            raise DataError(f"security {sec}: need at least 2 bars, got {len(recs)}")
        dates = [r.date for r in recs]
        close = np.array([r.close for r in recs])
        volume = np.array([r.volume for r in recs])
        out.append(IndicatorSeries(sec, Layer.PRICE, close, dates))
        out.append(IndicatorSeries(sec, Layer.RETURN, simple_returns(close, log_returns), dates[1:]))
        out.append(IndicatorSeries(sec, Layer.TRADING_VALUE, close * volume, dates))
    return out


def panel_layers(panel: Panel, log_returns: bool = False) -> tuple[list, dict[Layer, np.ndarray]]:
    """Layer matrices (n_securities x n_days-1) on the return dates.

    Price and TradingValue drop their first day so all three layers share
    the same aligned day index.
    """
    if panel.close.shape[1] < 2:
        raise DataError("need at least 2 aligned days")
    layers = {
        Layer.PRICE: panel.close[:, 1:].copy(),
        Layer.RETURN: simple_returns(panel.close, log_returns),
        Layer.TRADING_VALUE: (panel.close * panel.volume)[:, 1:],
    }
    return panel.dates[1:], layers


def slide_windows(series, spec: WindowSpec, aggregator: str = "mean") -> WindowedFeatures:
    """Aggregate ``series`` over complete windows ``[k*step, k*step + size)``.

    ``series`` is an IndicatorSeries or a plain 1-D sequence. Trailing
    partial windows are discarded.
    """
    if aggregator not in AGGREGATORS:
        raise ValueError(f"unknown aggregator {aggregator!r}; choose from {sorted(AGGREGATORS)}")
    if isinstance(series, IndicatorSeries):
        values, security, layer = np.asarray(series.values, dtype=float), series.security, series.layer
    else:
        values, security, layer = np.asarray(series, dtype=float), -1, None
    if values.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if len(values) < spec.size:
        raise DataError(f"series of length {len(values)} is shorter than one window ({spec.size})")
    k = spec.count(len(values))
    starts = np.arange(k) * spec.step
    # (k, size) strided view
    view = np.lib.stride_tricks.sliding_window_view(values, spec.size)[:: spec.step][:k]
    agg = AGGREGATORS[aggregator](view, axis=1)
    return WindowedFeatures(security, layer, aggregator, np.asarray(agg, dtype=float), starts)


def standardize(values, ref_mean: float, ref_std: float) -> np.ndarray:
    if not ref_std > 0:
        raise ValueError(f"ref_std must be > 0, got {ref_std}")
    return (np.asarray(values, dtype=float) - ref_mean) / ref_std


def destandardize(values, ref_mean: float, ref_std: float) -> np.ndarray:
    return np.asarray(values, dtype=float) * ref_std + ref_mean
