"""Single-position portfolio simulation driven by a fused target series.

Entries: when flat and the day's recommendation reaches ``entry_level``
(default +3, a strong buy), all available cash buys fractional units at that
day's close.  Exits depend on the policy:

* conservative — sell at the close ``hold_days`` bars after entry;
* aggressive — sell at the first later close at or above
  ``entry_price * (1 + profit_threshold)``, with an optional ``max_hold_days``
  time stop (disabled by default).

Fills happen at the close the signal was computed from; any position still
open at the last bar is closed there.  While holding, new buy signals are
ignored; after an exit, a same-day signal may re-enter at that same close.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .ensemble import TargetSeries
from .market_data import OhlcvSeries

POLICIES = ("conservative", "aggressive")


@dataclass(frozen=True)
class BacktestConfig:
    initial_capital: float = 10000.0
    entry_level: int = 3
    policy: str = "conservative"
    hold_days: int = 5
    profit_threshold: float = 0.02
    max_hold_days: int | None = None
    fee_bps: float = 0.0

    def __post_init__(self) -> None:
        if self.initial_capital <= 0:
            raise ValueError("initial_capital must be positive")
        if self.entry_level not in (1, 2, 3):
            raise ValueError("entry_level must be 1, 2, or 3")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if self.hold_days < 1:
            raise ValueError("hold_days must be >= 1")
        if self.profit_threshold <= 0:
            raise ValueError("profit_threshold must be positive")
        if self.max_hold_days is not None and self.max_hold_days < 1:
            raise ValueError("max_hold_days must be >= 1 when set")
        if self.fee_bps < 0:
            raise ValueError("fee_bps must be non-negative")


@dataclass(frozen=True)
class TradeRecord:
    entry_date: date
    exit_date: date
    entry_price: float
    exit_price: float
    units: float
    pnl: float
    exit_reason: str  # horizon_elapsed | profit_target | max_hold | end_of_data


@dataclass(frozen=True)
class BacktestSummary:
    final_value: float
    total_return: float
    trades: int
    win_rate: float | None  # None when there were no trades
    max_drawdown: float


@dataclass(frozen=True)
class BacktestResult:
    trades: tuple[TradeRecord, ...]
    equity_dates: tuple[date, ...]
    equity: np.ndarray
    initial_capital: float

    @property
    def final_value(self) -> float:
        return float(self.equity[-1])


def run_backtest(series: OhlcvSeries, target: TargetSeries, cfg: BacktestConfig | None = None) -> BacktestResult:
    """Simulate one policy over the days covered by the target series."""
    cfg = cfg or BacktestConfig()
    if len(series) == 0:
        raise ValueError("empty series")
    if target.offset + len(target) != len(series):
        raise ValueError("target is not aligned to the tail of the series")
    if tuple(series.dates[target.offset:]) != target.dates:
        raise ValueError("target dates do not match the series dates")

    fee = cfg.fee_bps / 10000.0
    closes = series.closes[target.offset:]
    dates = target.dates
    z = target.z
    n = len(z)

    cash = cfg.initial_capital
    units = 0.0
    entry_i = -1
    entry_price = 0.0
    cash_spent = 0.0
    trades: list[TradeRecord] = []
    equity = np.empty(n, dtype=np.float64)

    def close_position(i: int, reason: str) -> None:
        nonlocal cash, units, entry_i
        price = float(closes[i])
        proceeds = units * price * (1.0 - fee)
        trades.append(TradeRecord(
            entry_date=dates[entry_i],
            exit_date=dates[i],
            entry_price=entry_price,
            exit_price=price,
            units=units,
            pnl=proceeds - cash_spent,
            exit_reason=reason,
        ))
        cash = proceeds
        units = 0.0
        entry_i = -1

    for i in range(n):
        price = float(closes[i])
        if units > 0.0:
            held = i - entry_i
            if cfg.policy == "conservative":
                if held >= cfg.hold_days:
                    close_position(i, "horizon_elapsed")
            else:
                if price >= entry_price * (1.0 + cfg.profit_threshold):
                    close_position(i, "profit_target")
                elif cfg.max_hold_days is not None and held >= cfg.max_hold_days:
                    close_position(i, "max_hold")
        if units == 0.0 and z[i] >= cfg.entry_level and i < n - 1:
            entry_i = i
            entry_price = price
            cash_spent = cash
            units = cash * (1.0 - fee) / price
            cash = 0.0
        if units > 0.0 and i == n - 1:
            close_position(i, "end_of_data")
        equity[i] = cash + units * float(closes[i])

    equity.flags.writeable = False
    return BacktestResult(
        trades=tuple(trades),
        equity_dates=dates,
        equity=equity,
        initial_capital=cfg.initial_capital,
    )


def summarize_result(result: BacktestResult) -> BacktestSummary:
    """Headline statistics: final value, return, win rate, max drawdown."""
    trades = result.trades
    wins = sum(1 for t in trades if t.pnl > 0)
    running_max = np.maximum.accumulate(result.equity)
    drawdown = float(np.max(1.0 - result.equity / running_max)) if len(result.equity) else 0.0
    final = result.final_value
    return BacktestSummary(
        final_value=final,
        total_return=final / result.initial_capital - 1.0,
        trades=len(trades),
        win_rate=(wins / len(trades)) if trades else None,
        max_drawdown=drawdown,
    )
