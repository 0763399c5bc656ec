"""Quantize indicators into seven-level trading signals.

Levels are coded -3 (strong sell) .. 0 (hold) .. +3 (strong buy).  The EMA
and MACD strategies band a *relative* distance (so they are invariant under
uniform price scaling); the RSI strategy maps oversold readings to the buy
side and overbought readings to the sell side.  Five strategies make up a
day's row: three EMA spans, MACD, RSI — always in that column order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .indicators import IndicatorFrame

STRATEGY_COLUMNS = ("s_ema55", "s_ema100", "s_ema200", "s_macd", "s_rsi")

LEVEL_MIN, LEVEL_MAX = -3, 3

DEFAULT_EMA_BANDS = (0.01, 0.03, 0.05)
DEFAULT_MACD_BANDS = (0.0005, 0.0015, 0.003)
DEFAULT_RSI_CUTS = (10.0, 20.0, 30.0, 70.0, 80.0, 90.0)


@dataclass(frozen=True)
class ThresholdConfig:
    """Banding thresholds for the five strategies.

    ``ema_bands`` / ``macd_bands`` are ascending fractional distances mapped
    to levels 1..3; ``rsi_cuts`` is ``(b3, b2, b1, s1, s2, s3)`` where RSI at
    or below b3/b2/b1 yields +3/+2/+1 and at or above s1/s2/s3 yields
    -1/-2/-3.  ``ema_trend_following`` flips the EMA strategies to
    mean-reversion when false.
    """

    ema_bands: tuple[float, float, float] = DEFAULT_EMA_BANDS
    macd_bands: tuple[float, float, float] = DEFAULT_MACD_BANDS
    rsi_cuts: tuple[float, ...] = DEFAULT_RSI_CUTS
    ema_trend_following: bool = True

    def __post_init__(self) -> None:
        for name in ("ema_bands", "macd_bands"):
            bands = getattr(self, name)
            if len(bands) != 3:
                raise ValueError(f"{name} needs exactly 3 values")
            if not all(b > 0 for b in bands) or not bands[0] < bands[1] < bands[2]:
                raise ValueError(f"{name} must be positive and strictly ascending")
        cuts = self.rsi_cuts
        if len(cuts) != 6 or not all(a < b for a, b in zip(cuts, cuts[1:])):
            raise ValueError("rsi_cuts needs 6 strictly ascending values")
        if cuts[2] > 30.0 or cuts[3] < 70.0:
            raise ValueError("rsi buy cuts must be <= 30 and sell cuts >= 70")


def _band_levels(r: np.ndarray, bands) -> np.ndarray:
    """sign(r) times the index of the band |r| falls in (0 inside the first)."""
    b1, b2, b3 = bands
    mag = np.abs(r)
    level = np.zeros(r.shape, dtype=np.int64)
    level[mag >= b1] = 1
    level[mag >= b2] = 2
    level[mag >= b3] = 3
    return np.sign(r).astype(np.int64) * level


def ema_signal(close, ema_x, bands=DEFAULT_EMA_BANDS, trend_following: bool = True) -> np.ndarray:
    """Level from the relative distance of close above/below its EMA."""
    c = np.asarray(close, dtype=np.float64)
    e = np.asarray(ema_x, dtype=np.float64)
    if c.shape != e.shape:
        raise ValueError(f"close ({c.shape}) and ema ({e.shape}) misaligned")
    levels = _band_levels((c - e) / e, bands)
    return levels if trend_following else -levels


def macd_signal(macd_line, signal_line, close, bands=DEFAULT_MACD_BANDS) -> np.ndarray:
    """Level from the close-normalized MACD histogram."""
    m = np.asarray(macd_line, dtype=np.float64)
    s = np.asarray(signal_line, dtype=np.float64)
    c = np.asarray(close, dtype=np.float64)
    if not (m.shape == s.shape == c.shape):
        raise ValueError("macd_line, signal_line and close misaligned")
    return _band_levels((m - s) / c, bands)


def rsi_signal(rsi_values, cuts=DEFAULT_RSI_CUTS) -> np.ndarray:
    """Level from RSI: oversold -> buy side, overbought -> sell side."""
    r = np.asarray(rsi_values, dtype=np.float64)
    if np.any((r < 0.0) | (r > 100.0)):
        raise ValueError("rsi values must lie in [0, 100]")
    b3, b2, b1, s1, s2, s3 = cuts
    level = np.zeros(r.shape, dtype=np.int64)
    level[r <= b1] = 1
    level[r <= b2] = 2
    level[r <= b3] = 3
    level[r >= s1] = -1
    level[r >= s2] = -2
    level[r >= s3] = -3
    return level


@dataclass(frozen=True)
class StrategyMatrix:
    """Per-day signal levels for the five strategies, warmup rows dropped.

    ``offset`` is the index of the first matrix row in the source series, so
    matrix row d corresponds to series bar ``offset + d``.
    """

    dates: tuple[date, ...]
    levels: np.ndarray  # (n, 5) int64, columns ordered as STRATEGY_COLUMNS
    offset: int
    columns: tuple[str, ...] = field(default=STRATEGY_COLUMNS)

    def __post_init__(self) -> None:
        if self.levels.shape != (len(self.dates), len(STRATEGY_COLUMNS)):
            raise ValueError("levels shape must be (n_dates, 5)")
        if np.any((self.levels < LEVEL_MIN) | (self.levels > LEVEL_MAX)):
            raise ValueError("signal levels outside [-3, 3]")
        self.levels.flags.writeable = False

    def __len__(self) -> int:
        return len(self.dates)


def build_strategy_matrix(
    frame: IndicatorFrame,
    close,
    cfg: ThresholdConfig | None = None,
) -> StrategyMatrix:
    """Evaluate all five strategies over the non-warmup rows of a frame."""
    cfg = cfg or ThresholdConfig()
    c = np.asarray(close, dtype=np.float64)
    if c.shape != (len(frame),) :
        raise ValueError("close must align with the indicator frame")
    w = frame.warmup_len
    columns = [
        ema_signal(c, frame.ema55, cfg.ema_bands, cfg.ema_trend_following),
        ema_signal(c, frame.ema100, cfg.ema_bands, cfg.ema_trend_following),
        ema_signal(c, frame.ema200, cfg.ema_bands, cfg.ema_trend_following),
        macd_signal(frame.macd_line, frame.signal_line, c, cfg.macd_bands),
        rsi_signal(frame.rsi, cfg.rsi_cuts),
    ]
    levels = np.stack(columns, axis=1)[w:]
    return StrategyMatrix(dates=frame.dates[w:], levels=levels, offset=w)
