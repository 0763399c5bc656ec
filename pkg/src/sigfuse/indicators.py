"""EMA, MACD, and RSI over daily closes, assembled into an aligned frame.

All three are defined by simple recursions/rolling means:

* EMA: ``out[0] = close[0]``, ``out[d] = alpha*close[d] + (1-alpha)*out[d-1]``
  with ``alpha = 2/(span+1)``.
* MACD: fast EMA minus slow EMA, plus an EMA of that difference.
* RSI: ``100 - 100/(1+RS)`` where RS is the ratio of the simple trailing
  means of positive and negative close changes (unsmoothed, not Wilder).

The frame flags the first ``warmup_len`` rows (default 200, the longest EMA
span) as warmup; downstream signal logic must skip them because those EMA200
values are still dominated by the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .market_data import OhlcvSeries

EMA_SPANS = (55, 100, 200)
DEFAULT_WARMUP = max(EMA_SPANS)


def ema(close, span: int) -> np.ndarray:
    """Exponential moving average seeded with the first close."""
    if span < 1:
        raise ValueError("span must be >= 1")
    c = np.asarray(close, dtype=np.float64)
    if c.size == 0:
        raise ValueError("close series must be non-empty")
    alpha = 2.0 / (span + 1)
    out = np.empty_like(c)
    out[0] = c[0]
    # incremental form of the same recursion: exact fixed point on constants
    for d in range(1, c.size):
        out[d] = out[d - 1] + alpha * (c[d] - out[d - 1])
    return out


def macd(close, fast: int = 12, slow: int = 26, signal_span: int = 9):
    """MACD line (fast EMA - slow EMA) and its signal line (EMA of the MACD line)."""
    if fast >= slow:
        raise ValueError(f"fast span {fast} must be below slow span {slow}")
    c = np.asarray(close, dtype=np.float64)
    if c.size < slow:
        raise ValueError(f"need at least {slow} points, got {c.size}")
    macd_line = ema(c, fast) - ema(c, slow)
    signal_line = ema(macd_line, signal_span)
    return macd_line, signal_line


def rsi(close, period: int = 14) -> np.ndarray:
    """Relative strength index over the trailing ``period`` close changes.

    Day d uses the simple mean of gains and of losses among changes
    ``d-period+1 .. d``.  Earlier days fall back to the changes available so
    far (day 0 has none).  Conventions at the degenerate points: no losses ->
    100, no gains and no losses (flat window) -> 50.
    """
    c = np.asarray(close, dtype=np.float64)
    if c.size < period + 1:
        raise ValueError(f"need at least {period + 1} points, got {c.size}")
    delta = np.diff(c)
    gains = np.maximum(delta, 0.0)
    losses = np.maximum(-delta, 0.0)
    out = np.empty(c.size, dtype=np.float64)
    out[0] = 50.0
    cg = np.concatenate(([0.0], np.cumsum(gains)))
    cl = np.concatenate(([0.0], np.cumsum(losses)))
    for d in range(1, c.size):
        lo = max(0, d - period)  # change indices lo..d-1 cover days lo+1..d
        gain_sum = cg[d] - cg[lo]
        loss_sum = cl[d] - cl[lo]
        if loss_sum == 0.0:
            out[d] = 50.0 if gain_sum == 0.0 else 100.0
        else:
            rs = gain_sum / loss_sum
            out[d] = 100.0 - 100.0 / (1.0 + rs)
    return out


@dataclass(frozen=True)
class IndicatorFrame:
    """Per-day indicator columns aligned 1:1 with the source series."""

    dates: tuple[date, ...]
    ema55: np.ndarray
    ema100: np.ndarray
    ema200: np.ndarray
    macd_line: np.ndarray
    signal_line: np.ndarray
    rsi: np.ndarray
    warmup_len: int

    def __post_init__(self) -> None:
        n = len(self.dates)
        for col in ("ema55", "ema100", "ema200", "macd_line", "signal_line", "rsi"):
            if getattr(self, col).shape != (n,):
                raise ValueError(f"column {col} length mismatch")
        if not (0 <= self.warmup_len < n):
            raise ValueError("warmup_len out of range")
        if np.any((self.rsi < 0.0) | (self.rsi > 100.0)):
            raise ValueError("rsi out of [0, 100]")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def warmup_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.dates), dtype=bool)
        mask[: self.warmup_len] = True
        return mask


def indicator_frame(
    series: OhlcvSeries,
    warmup_len: int = DEFAULT_WARMUP,
    rsi_period: int = 14,
) -> IndicatorFrame:
    """Compute all six indicator columns for one series."""
    n = len(series)
    needed = max(DEFAULT_WARMUP, warmup_len)
    if n <= needed:
        raise ValueError(f"series too short: {n} bars, need more than {needed}")
    if series.has_gaps():
        raise ValueError("series has gaps; forward_fill it first")
    close = series.closes
    macd_line, signal_line = macd(close)
    return IndicatorFrame(
        dates=series.dates,
        ema55=ema(close, 55),
        ema100=ema(close, 100),
        ema200=ema(close, 200),
        macd_line=macd_line,
        signal_line=signal_line,
        rsi=rsi(close, rsi_period),
        warmup_len=warmup_len,
    )
