"""sigfuse: leveled trading recommendations from fused indicator strategies.

Pipeline: OHLCV bars -> EMA/MACD/RSI indicator frame -> five seven-level
strategy signals -> weighted-vote fusion (weights tuned by exhaustive grid
search on a chronological holdout) -> Shapley-value explanations of each
recommendation -> policy backtests.
"""

from .backtest import (
    BacktestConfig,
    BacktestResult,
    BacktestSummary,
    TradeRecord,
    run_backtest,
    summarize_result,
)
from .ensemble import (
    AccuracyResult,
    GridSearchResult,
    TargetSeries,
    evaluate_accuracy,
    grid_search,
    holdout_window,
    make_target,
    quantize_mean,
    vote_model,
    weighted_mean,
    weighted_vote,
)
from .explain import (
    BackgroundSet,
    ImportanceSummary,
    ShapAttribution,
    build_background,
    exact_shapley,
    force_plot_data,
    kernel_shap,
    kmeans,
    masked_value,
    summarize,
)
from .indicators import IndicatorFrame, ema, indicator_frame, macd, rsi
from .market_data import (
    DataError,
    OhlcvBar,
    OhlcvSeries,
    forward_fill,
    generate_synthetic,
    parse_ohlcv,
    serialize_ohlcv,
)
from .signals import (
    STRATEGY_COLUMNS,
    StrategyMatrix,
    ThresholdConfig,
    build_strategy_matrix,
    ema_signal,
    macd_signal,
    rsi_signal,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyResult",
    "BacktestConfig",
    "BacktestResult",
    "BacktestSummary",
    "BackgroundSet",
    "DataError",
    "GridSearchResult",
    "ImportanceSummary",
    "IndicatorFrame",
    "OhlcvBar",
    "OhlcvSeries",
    "STRATEGY_COLUMNS",
    "ShapAttribution",
    "StrategyMatrix",
    "TargetSeries",
    "ThresholdConfig",
    "TradeRecord",
    "build_background",
    "build_strategy_matrix",
    "ema",
    "ema_signal",
    "evaluate_accuracy",
    "exact_shapley",
    "force_plot_data",
    "forward_fill",
    "generate_synthetic",
    "grid_search",
    "holdout_window",
    "indicator_frame",
    "kernel_shap",
    "kmeans",
    "macd",
    "macd_signal",
    "make_target",
    "masked_value",
    "parse_ohlcv",
    "quantize_mean",
    "rsi",
    "rsi_signal",
    "run_backtest",
    "serialize_ohlcv",
    "summarize",
    "summarize_result",
    "vote_model",
    "weighted_mean",
    "weighted_vote",
]
