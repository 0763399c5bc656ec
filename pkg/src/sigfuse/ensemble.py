"""Fuse the five strategy signals into one recommendation via a weighted vote.

The fused value is the weight-normalized mean ``m = sum(w_i*s_i)/sum(w_i)``.
Its sign gives the buy/sell polarity; the seven-level coding comes from
rounding m half-away-from-zero and clamping to [-3, 3].  For integer levels
and weights the quantization is done in exact integer arithmetic, so results
never depend on float rounding.

Weights are tuned by exhaustively scoring every vector in a small integer
grid on a chronological tail holdout: a prediction counts as correct when
its polarity matches the realized close change over the target horizon
(1 or 5 trading days); holds are excluded from the denominator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .market_data import OhlcvSeries
from .signals import LEVEL_MAX, STRATEGY_COLUMNS, StrategyMatrix

N_STRATEGIES = len(STRATEGY_COLUMNS)
DEFAULT_WEIGHT_RANGE = range(1, 6)
HORIZONS = (1, 5)


def _check_weights(w) -> tuple[int, ...]:
    w = tuple(int(x) for x in w)
    if len(w) != N_STRATEGIES:
        raise ValueError(f"need {N_STRATEGIES} weights, got {len(w)}")
    if any(x < 1 for x in w):
        raise ValueError("weights must be >= 1")
    return w


def _quantize_ratio(num, den: int):
    """Round num/den half away from zero, clamped to [-3, 3]. Exact for ints.

    Works elementwise on integer numpy arrays as well as python ints.
    """
    mag = (2 * np.abs(num) + den) // (2 * den)
    return np.sign(num) * np.minimum(mag, LEVEL_MAX)


def quantize_mean(m: float) -> int:
    """Float counterpart of the vote quantization, for pre-computed means."""
    level = int(math.floor(abs(m) + 0.5))
    return int(math.copysign(min(level, LEVEL_MAX), m)) if level else 0


def weighted_mean(s, w) -> float:
    """The raw fused value m, before quantization (the model SHAP explains)."""
    w = _check_weights(w)
    s = tuple(float(x) for x in s)
    if len(s) != N_STRATEGIES:
        raise ValueError(f"need {N_STRATEGIES} signal levels, got {len(s)}")
    return sum(wi * si for wi, si in zip(w, s)) / sum(w)


def weighted_vote(s, w) -> int:
    """Fused seven-level recommendation for one day's strategy row."""
    w = _check_weights(w)
    s = tuple(int(x) for x in s)
    if len(s) != N_STRATEGIES:
        raise ValueError(f"need {N_STRATEGIES} signal levels, got {len(s)}")
    if any(x < -LEVEL_MAX or x > LEVEL_MAX for x in s):
        raise ValueError("signal levels outside [-3, 3]")
    num = sum(wi * si for wi, si in zip(w, s))
    return int(_quantize_ratio(num, sum(w)))


@dataclass(frozen=True)
class TargetSeries:
    """Fused recommendation per day, for a 1- or 5-day evaluation horizon."""

    horizon: int
    z: np.ndarray  # (n,) int64 in [-3, 3]
    offset: int    # series index of row 0, mirrors StrategyMatrix.offset
    dates: tuple[date, ...]

    def __post_init__(self) -> None:
        if self.horizon not in HORIZONS:
            raise ValueError(f"horizon must be one of {HORIZONS}")
        if self.z.shape != (len(self.dates),):
            raise ValueError("z must align with dates")
        if np.any(np.abs(self.z) > LEVEL_MAX):
            raise ValueError("target levels outside [-3, 3]")
        self.z.flags.writeable = False

    def __len__(self) -> int:
        return len(self.z)


def make_target(matrix: StrategyMatrix, w, horizon: int) -> TargetSeries:
    """Apply the weighted vote to every row of a strategy matrix."""
    w = _check_weights(w)
    if len(matrix) == 0:
        raise ValueError("empty strategy matrix")
    num = matrix.levels @ np.asarray(w, dtype=np.int64)
    z = _quantize_ratio(num, sum(w)).astype(np.int64)
    return TargetSeries(horizon=horizon, z=z, offset=matrix.offset, dates=matrix.dates)


@dataclass(frozen=True)
class AccuracyResult:
    """Share of non-hold predictions whose polarity matched the price move."""

    accuracy: float
    decided: int
    evaluated: int

    @property
    def no_decisions(self) -> bool:
        return self.decided == 0


def evaluate_accuracy(target: TargetSeries, series: OhlcvSeries, eval_window: range) -> AccuracyResult:
    """Score a target series on a window of its rows.

    Row d predicts the sign of ``close[offset+d+horizon] - close[offset+d]``;
    rows with z == 0 are skipped.  The window is given in target-row indices
    and every evaluated row must have its future close inside the series.
    """
    k = target.horizon
    if eval_window.step != 1:
        raise ValueError("eval_window must have step 1")
    if len(eval_window) == 0:
        raise ValueError("eval_window is empty")
    if eval_window.start < 0 or eval_window.stop > len(target):
        raise ValueError("eval_window outside target range")
    last_needed = target.offset + (eval_window.stop - 1) + k
    if last_needed >= len(series):
        raise ValueError(
            f"window needs close at index {last_needed}, series has {len(series)} bars"
        )
    rows = np.arange(eval_window.start, eval_window.stop)
    idx = target.offset + rows
    z = target.z[rows]
    future = np.sign(series.closes[idx + k] - series.closes[idx])
    decided = z != 0
    n_decided = int(decided.sum())
    if n_decided == 0:
        return AccuracyResult(accuracy=0.0, decided=0, evaluated=len(rows))
    correct = int(np.sum(np.sign(z[decided]) == future[decided]))
    return AccuracyResult(accuracy=correct / n_decided, decided=n_decided, evaluated=len(rows))


@dataclass(frozen=True)
class GridSearchResult:
    best_weights: tuple[int, ...]
    best_accuracy: float
    evaluated: int
    horizon: int
    decided: int  # non-hold predictions behind best_accuracy

    def weights_by_strategy(self) -> dict[str, int]:
        return dict(zip(STRATEGY_COLUMNS, self.best_weights))


def holdout_window(n_rows: int, horizon: int, eval_fraction: float = 0.2) -> range:
    """Evaluable row range inside the chronological tail holdout.

    The holdout is the last ``ceil(eval_fraction * n_rows)`` rows; the final
    ``horizon`` of those have no realized future close and are excluded.
    """
    if not 0.0 < eval_fraction <= 1.0:
        raise ValueError("eval_fraction must be in (0, 1]")
    h_len = math.ceil(eval_fraction * n_rows)
    window = range(n_rows - h_len, n_rows - horizon)
    if len(window) <= 0:
        raise ValueError(f"holdout of {h_len} rows is too short for horizon {horizon}")
    return window


def grid_search(
    matrix: StrategyMatrix,
    series: OhlcvSeries,
    horizon: int,
    weight_range=DEFAULT_WEIGHT_RANGE,
    eval_fraction: float = 0.2,
) -> GridSearchResult:
    """Exhaustively score every weight vector in ``weight_range**5``.

    Candidates are visited in ascending lexicographic order and a new best
    must be strictly better, so ties resolve to the lexicographically
    smallest vector regardless of evaluation strategy.
    """
    values = sorted({int(v) for v in weight_range})
    if not values:
        raise ValueError("weight_range is empty")
    if values[0] < 1:
        raise ValueError("weights must be >= 1")
    if horizon not in HORIZONS:
        raise ValueError(f"horizon must be one of {HORIZONS}")
    window = holdout_window(len(matrix), horizon, eval_fraction)

    rows = np.arange(window.start, window.stop)
    idx = matrix.offset + rows
    if idx[-1] + horizon >= len(series):
        raise ValueError("series too short for the holdout horizon")
    levels = matrix.levels[rows]  # (m, 5)
    future = np.sign(series.closes[idx + horizon] - series.closes[idx])

    best_w: tuple[int, ...] | None = None
    best_acc = -1.0
    best_decided = 0
    evaluated = 0
    for w in itertools.product(values, repeat=N_STRATEGIES):
        evaluated += 1
        num = levels @ np.asarray(w, dtype=np.int64)
        z = _quantize_ratio(num, sum(w))
        decided = z != 0
        n_decided = int(decided.sum())
        acc = 0.0
        if n_decided:
            acc = float(np.sum(np.sign(z[decided]) == future[decided])) / n_decided
        if acc > best_acc:
            best_acc = acc
            best_w = w
            best_decided = n_decided
    assert best_w is not None
    return GridSearchResult(
        best_weights=best_w,
        best_accuracy=best_acc,
        evaluated=evaluated,
        horizon=horizon,
        decided=best_decided,
    )


def vote_model(w):
    """Row-vectorized weighted-mean model ``f(X) -> m`` for attribution.

    Returns a callable mapping an (n, 5) array of signal levels to the (n,)
    array of raw fused values under the fixed weights ``w``.
    """
    w = np.asarray(_check_weights(w), dtype=np.float64)
    total = w.sum()

    def f(X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ w / total

    return f
