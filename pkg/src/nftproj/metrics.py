"""Market statistics, tiers and regression statistics."""
from __future__ import annotations

import enum
import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, DegenerateVariance, ZeroActual
from .ingest import WEI_PER_ETH
from .series import SECONDS_PER_DAY, CollectionSeries, Quarter

TIER1_FLOOR = 15_000.0
TIER2_FLOOR = 2_000.0


class Tier(enum.IntEnum):
    Tier1 = 1
    Tier2 = 2
    Tier3 = 3


@dataclass(frozen=True)
class QuarterStats:
    market_cap: float
    high: float
    low: float
    mean: float
    change_pct: float | None = None


@dataclass(frozen=True)
class RegressionStats:
    mae: float
    mse: float
    rmse: float
    r2: float


def change_pct(cap: float, prev_cap: float) -> float | None:
    """Percentage change of market cap against the previous quarter (None if that was 0)."""
    if prev_cap == 0:
        return None
    return (cap - prev_cap) / prev_cap * 100.0


def tier(market_cap: float) -> Tier:
    """Tier 1 above 15K ETH, Tier 2 above 2K, Tier 3 otherwise (boundaries go down a tier)."""
    if market_cap < 0:
        raise ValueError("market cap must be non-negative")
    if market_cap > TIER1_FLOOR:
        return Tier.Tier1
    if market_cap > TIER2_FLOOR:
        return Tier.Tier2
    return Tier.Tier3


def _column(cs: CollectionSeries, day: int) -> int:
    col = day - cs.start_day
    if not 0 <= col < cs.n_days:
        raise DataError(f"day {day} outside the series frame")
    return col


def _stats_from_events(cs, events, q):
    inception = cs.inception_timestamp
    last = {}
    prices = []
    for ev in sorted(events):
        day = (ev.timestamp - inception) // SECONDS_PER_DAY
        if day >= q.stop:
            continue
        last[ev.token_id] = ev.price_wei
        if day >= q.start:
            prices.append(ev.price_wei)
    cap = sum(last.values()) / WEI_PER_ETH
    if not prices:
        return cap, 0.0, 0.0, 0.0
    mean = float(Fraction(sum(prices), len(prices) * WEI_PER_ETH))
    return cap, max(prices) / WEI_PER_ETH, min(prices) / WEI_PER_ETH, mean


def _stats_from_series(cs, q):
    lo, hi = _column(cs, q.start), _column(cs, q.stop - 1) + 1
    cap = float(np.sum(cs.values[:, hi - 1]))
    counts = cs.counts
    prev = np.concatenate([np.zeros((cs.n_tokens, 1)), counts[:, :-1]], axis=1) if cs.start_day == 0 \
        else np.concatenate([counts[:, :1], counts[:, :-1]], axis=1)
    starts = (counts > prev)[:, lo:hi]
    prices = cs.values[:, lo:hi][starts]
    if prices.size == 0:
        return cap, 0.0, 0.0, 0.0
    high, low = float(prices.max()), float(prices.min())
    return cap, high, low, min(max(float(prices.mean()), low), high)


def quarter_stats(cs: CollectionSeries, events, q, prev_cap: float | None = None) -> QuarterStats:
    """Market cap at the quarter's last day and high/low/mean of sales inside it.

    With ``events`` the sums run in integer wei over the sale records; with
    an empty event list (generated series) sale prices are the values at
    plateau starts.
    """
    q = Quarter.parse(q)
    if events:
        cap, high, low, mean = _stats_from_events(cs, events, q)
    else:
        cap, high, low, mean = _stats_from_series(cs, q)
    change = change_pct(cap, prev_cap) if prev_cap is not None else None
    return QuarterStats(cap, high, low, mean, change)


def market_caps(cs: CollectionSeries, events=None, quarters=tuple(Quarter)) -> dict:
    return {q: quarter_stats(cs, events or [], q).market_cap for q in quarters}


def regression_stats(actual: CollectionSeries, projected: CollectionSeries, quarters=None,
                     on_degenerate: str = "raise") -> RegressionStats:
    """MAE/MSE/RMSE/R^2 of daily values over all tokens and the selected quarters.

    When every actual value is equal R^2 is undefined: ``on_degenerate``
    ``"raise"`` raises :class:`DegenerateVariance`, ``"nan"`` reports NaN.
    """
    if not np.array_equal(actual.token_ids, projected.token_ids):
        raise DataError("actual and projected token sets differ")
    if actual.start_day != projected.start_day or actual.n_days != projected.n_days:
        raise DataError("actual and projected day frames differ")
    quarters = [Quarter.parse(q) for q in (quarters or (Quarter.Q2, Quarter.Q3, Quarter.Q4))]
    cols = np.concatenate([np.arange(_column(actual, q.start), _column(actual, q.stop - 1) + 1)
                           for q in sorted(quarters, key=lambda q: q.start)])
    y = actual.values[:, cols].ravel()
    y_hat = projected.values[:, cols].ravel()
    err = y - y_hat
    mae = float(np.mean(np.abs(err)))
    mse = float(np.mean(err * err))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        if on_degenerate == "raise":
            raise DegenerateVariance("all actual values are equal; R^2 undefined")
        r2 = math.nan
    else:
        r2 = 1.0 - float(np.sum(err * err)) / ss_tot
    return RegressionStats(mae, mse, math.sqrt(mse), r2)


def abs_diff_pct(y: float, y_hat: float) -> float:
    """|y - y_hat| / y as a ratio."""
    if y == 0:
        raise ZeroActual("actual value is zero")
    if y < 0:
        raise ValueError("actual value must be positive")
    return abs(y - y_hat) / y
