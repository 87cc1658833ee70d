"""Synthetic security panels with planted Granger chains and interlayer spillovers.

Each security i follows

    lv_i[d] = phi * lv_i[d-1] + kappa * lv_{i-1}[d-1] + sigma_v * eps      (log volume)
    r_i[d]  = mu + season_i[d] + beta * lv_i[d-1] + chi * r_{i-1}[d-1]
              + sigma_m * m[d] + sigma_e * e_i[d]                          (return)
    P_i[d]  = P_i[d-1] * (1 + r_i[d])

so security i-1 Granger-causes security i in the trading-value and return
layers, and each security's trading value drives its own next-day return
(the TradingValue -> Return diagonal). Crisis episodes raise volatility,
push the drift negative, and add spillover from the two neighbouring
securities' trading value.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .marketdata import BarRecord

START_DATE = dt.date(2000, 1, 3)


@dataclass(frozen=True)
class SynthParams:
    phi: float = 0.5
    kappa: float = 0.35
    sigma_v: float = 0.3
    beta: float = 0.02
    beta_crisis: float = 0.03
    neighbour_weight: float = 0.8
    chi: float = 0.3
    mu: float = 3e-4
    mu_crisis: float = -3e-3
    season_amp: float = 1e-3
    season_period: float = 63.0
    sigma_m: float = 0.004
    sigma_e: float = 0.006
    crisis_vol: float = 2.5
    n_crises: int = 3
    crisis_length: int = 60


@dataclass
class SyntheticTruth:
    chain_edges: list  # (target, source) pairs planted in TradingValue and Return layers
    spillover_edges: list  # (target, source) pairs planted in TradingValue -> Return
    crisis_spans: list  # (first_day, last_day) index pairs
    crisis_dates: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "chain_edges": [list(e) for e in self.chain_edges],
            "spillover_edges": [list(e) for e in self.spillover_edges],
            "crisis_spans": [list(s) for s in self.crisis_spans],
            "crisis_dates": [d.isoformat() for d in self.crisis_dates],
        }


def business_days(n: int, start: dt.date = START_DATE) -> list[dt.date]:
    days = np.busday_offset(np.datetime64(start), np.arange(n), roll="forward")
    return [d.astype(dt.date) for d in days]


def _crisis_mask(n_days, params, rng):
    mask = np.zeros(n_days, bool)
    spans = []
    L = params.crisis_length
    if params.n_crises <= 0 or n_days < 4 * L:
        return mask, spans
    # one episode per equal segment, away from the segment edges
    seg = n_days // params.n_crises
    for c in range(params.n_crises):
        lo, hi = c * seg + L // 2, (c + 1) * seg - L - L // 2
        if hi <= lo:
            continue
        s = int(rng.integers(lo, hi))
        mask[s : s + L] = True
        spans.append((s, s + L - 1))
    return mask, spans


def simulate(n_securities: int = 20, n_days: int = 2000, seed: int = 0, params: SynthParams = SynthParams()):
    """Simulate (close, volume) arrays of shape (n_securities, n_days) plus the planted truth."""
    if n_securities < 1 or n_days < 3:
        raise ValueError("need at least 1 security and 3 days")
    rng = np.random.default_rng(seed)
    n, D = n_securities, n_days
    crisis, spans = _crisis_mask(D, params, rng)
    vol_scale = np.where(crisis, params.crisis_vol, 1.0)
    phase = rng.uniform(0, 2 * np.pi, n)
    base_lv = rng.uniform(12.0, 15.0, n)
    p0 = rng.uniform(20.0, 200.0, n)
    lv = np.zeros((n, D))
    r = np.zeros((n, D))
    eps_v = rng.standard_normal((n, D))
    eps_e = rng.standard_normal((n, D))
    m = rng.standard_normal(D)
    t = np.arange(D)
    for d in range(1, D):
        prev = lv[:, d - 1]
        lv[:, d] = params.phi * prev + params.sigma_v * eps_v[:, d]
        lv[1:, d] += params.kappa * prev[:-1]
        season = params.season_amp * np.sin(2 * np.pi * t[d] / params.season_period + phase)
        if crisis[d]:
            drive = params.beta_crisis * (
                prev + params.neighbour_weight * (np.roll(prev, -1) + np.roll(prev, -2))
            )
            mu = params.mu_crisis
        else:
            drive = params.beta * prev
            mu = params.mu
        r[:, d] = mu + season + drive + vol_scale[d] * (params.sigma_m * m[d] + params.sigma_e * eps_e[:, d])
        r[1:, d] += params.chi * r[:-1, d - 1]
    r = np.clip(r, -0.5, 0.5)
    close = p0[:, None] * np.cumprod(1.0 + r, axis=1)
    volume = np.round(np.exp(base_lv[:, None] + lv))
    dates = business_days(D)
    truth = SyntheticTruth(
        chain_edges=[(i, i - 1) for i in range(1, n)],
        spillover_edges=[(i, i) for i in range(n)],
        crisis_spans=spans,
        crisis_dates=[dates[a] for a, _ in spans],
    )
    return dates, close, volume, truth


def synthesize(n_securities: int = 20, n_days: int = 2000, seed: int = 0, params: SynthParams = SynthParams()):
    """Bar records of a simulated panel, sorted by (security, date), and the planted truth."""
    dates, close, volume, truth = simulate(n_securities, n_days, seed, params)
    bars = [
        BarRecord(i, dates[d], float(close[i, d]), float(volume[i, d]))
        for i in range(n_securities)
        for d in range(n_days)
    ]
    return bars, truth
