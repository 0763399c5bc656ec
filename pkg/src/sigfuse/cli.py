"""Command-line entry point wiring the pipeline end to end.

Subcommands: ``synth``, ``indicators``, ``signals``, ``search``, ``explain``,
``backtest``, ``pipeline``.  Every command is a pure function of its input
files, flags, and seed; running one twice writes byte-identical artifacts.

Exit codes: 0 success, 2 usage, 3 data error, 4 stage failure.  Stage errors
are reported as ``error [stage <name>]: <message>``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from . import report
from .backtest import BacktestConfig, run_backtest, summarize_result
from .ensemble import (
    DEFAULT_WEIGHT_RANGE,
    HORIZONS,
    grid_search,
    holdout_window,
    make_target,
    vote_model,
)
from .explain import DEFAULT_K, build_background, exact_shapley, force_plot_data, kernel_shap, summarize
from .indicators import indicator_frame
from .market_data import DataError, forward_fill, generate_synthetic, parse_ohlcv
from .signals import STRATEGY_COLUMNS, ThresholdConfig, build_strategy_matrix

DEFAULT_SEED = 7


class StageFailure(Exception):
    """Wraps any error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"[stage {stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    """Resolved run settings; every field has a reproducible default."""

    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    weight_range: tuple[int, ...] = tuple(DEFAULT_WEIGHT_RANGE)
    horizons: tuple[int, ...] = HORIZONS
    holdout_fraction: float = 0.2
    backtest: dict = field(default_factory=dict)  # BacktestConfig overrides
    explain_k: int = DEFAULT_K
    explain_method: str = "kernel"
    seed: int = DEFAULT_SEED

    def backtest_config(self, policy: str, **overrides) -> BacktestConfig:
        kwargs = dict(self.backtest)
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        kwargs["policy"] = policy
        return BacktestConfig(**kwargs)


def _require_keys(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise DataError(f"unknown config key(s) in {where}: {', '.join(unknown)}")


def load_config(path: str | None) -> RunConfig:
    """Load the optional JSON config file; absent keys keep their defaults."""
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {path} is not valid JSON: {exc}") from None
    _require_keys(
        raw,
        ("seed", "thresholds", "weights", "horizons", "holdout_fraction", "backtest", "explain"),
        "config",
    )

    t_raw = raw.get("thresholds", {})
    _require_keys(t_raw, ("ema_bands", "macd_bands", "rsi_cuts", "ema_trend_following"), "thresholds")
    thresholds = ThresholdConfig(
        ema_bands=tuple(t_raw.get("ema_bands", ThresholdConfig.ema_bands)),
        macd_bands=tuple(t_raw.get("macd_bands", ThresholdConfig.macd_bands)),
        rsi_cuts=tuple(t_raw.get("rsi_cuts", ThresholdConfig.rsi_cuts)),
        ema_trend_following=bool(t_raw.get("ema_trend_following", True)),
    )

    w_raw = raw.get("weights", {})
    _require_keys(w_raw, ("min", "max"), "weights")
    lo = int(w_raw.get("min", DEFAULT_WEIGHT_RANGE.start))
    hi = int(w_raw.get("max", DEFAULT_WEIGHT_RANGE.stop - 1))
    if lo < 1 or hi < lo:
        raise DataError(f"weights range [{lo}, {hi}] is invalid")

    b_raw = raw.get("backtest", {})
    _require_keys(
        b_raw,
        ("initial_capital", "entry_level", "hold_days", "profit_threshold", "max_hold_days", "fee_bps"),
        "backtest",
    )

    e_raw = raw.get("explain", {})
    _require_keys(e_raw, ("k", "method"), "explain")
    method = e_raw.get("method", "kernel")
    if method not in ("kernel", "exact"):
        raise DataError(f"explain.method must be 'kernel' or 'exact', got {method!r}")

    horizons = tuple(int(h) for h in raw.get("horizons", HORIZONS))
    if any(h not in HORIZONS for h in horizons) or not horizons:
        raise DataError(f"horizons must be drawn from {HORIZONS}")

    return RunConfig(
        thresholds=thresholds,
        weight_range=tuple(range(lo, hi + 1)),
        horizons=horizons,
        holdout_fraction=float(raw.get("holdout_fraction", 0.2)),
        backtest=dict(b_raw),
        explain_k=int(e_raw.get("k", DEFAULT_K)),
        explain_method=method,
        seed=int(raw.get("seed", DEFAULT_SEED)),
    )


def _parse_weight_range(text: str) -> tuple[int, ...]:
    """'1..5' -> (1,2,3,4,5); '1,3,5' -> (1,3,5)."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            values = tuple(range(int(lo), int(hi) + 1))
        else:
            values = tuple(int(v) for v in text.split(","))
        if not values or min(values) < 1:
            raise ValueError
        return values
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a weight range like '1..5' or '1,2,3', got {text!r}"
        ) from None


def _parse_weight_vector(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError:
        values = ()
    if len(values) != len(STRATEGY_COLUMNS) or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(
            f"expected five positive weights like '2,1,2,1,2', got {text!r}"
        )
    return values


def _load_series(path: str):
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input file not found: {path}")
    return forward_fill(parse_ohlcv(p.read_text(encoding="utf-8")))


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageFailure:
        raise
    except Exception as exc:
        raise StageFailure(name, exc) from exc


def _tuned_weights(matrix, series, horizon, cfg: RunConfig, explicit):
    if explicit is not None:
        return tuple(explicit)
    result = grid_search(matrix, series, horizon, cfg.weight_range, cfg.holdout_fraction)
    return result.best_weights


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    series = _stage("synth", generate_synthetic,
                    seed=args.seed if args.seed is not None else DEFAULT_SEED,
                    n_days=args.days, start_price=args.start_price,
                    drift=args.drift, vol=args.vol)
    report.write_text(Path(args.out), report.ohlcv_csv(series))
    return 0


def _cmd_indicators(args) -> int:
    series = _stage("ingest", _load_series, args.input)
    frame = _stage("indicators", indicator_frame, series)
    report.write_text(Path(args.out), report.frame_csv(frame))
    return 0


def _cmd_signals(args) -> int:
    cfg = load_config(args.config)
    series = _stage("ingest", _load_series, args.input)
    frame = _stage("indicators", indicator_frame, series)
    matrix = _stage("signals", build_strategy_matrix, frame, series.closes, cfg.thresholds)
    report.write_text(Path(args.out), report.signals_csv(matrix))
    return 0


def _cmd_search(args) -> int:
    cfg = load_config(args.config)
    weight_range = args.weights if args.weights is not None else cfg.weight_range
    holdout = args.holdout if args.holdout is not None else cfg.holdout_fraction
    series = _stage("ingest", _load_series, args.input)
    frame = _stage("indicators", indicator_frame, series)
    matrix = _stage("signals", build_strategy_matrix, frame, series.closes, cfg.thresholds)
    result = _stage("search", grid_search, matrix, series, args.horizon, weight_range, holdout)
    report.write_json(Path(args.out), report.grid_search_json(result, holdout))
    return 0


def _explain_rows(matrix, cfg: RunConfig, weights, rows, method: str):
    """Attribute the given matrix rows; returns (date, attribution, record) triples."""
    f = vote_model(weights)
    bg = build_background(matrix.levels, k=cfg.explain_k, seed=cfg.seed)
    attribute = kernel_shap if method == "kernel" else exact_shapley
    out = []
    for r in rows:
        x = matrix.levels[r]
        attr = attribute(f, x.astype(float), bg)
        out.append((matrix.dates[r], attr, force_plot_data(attr, x)))
    return out


def _cmd_explain(args) -> int:
    cfg = load_config(args.config)
    method = args.method if args.method is not None else cfg.explain_method
    if args.k is not None:
        cfg = dataclasses.replace(cfg, explain_k=args.k)
    series = _stage("ingest", _load_series, args.input)
    frame = _stage("indicators", indicator_frame, series)
    matrix = _stage("signals", build_strategy_matrix, frame, series.closes, cfg.thresholds)
    weights = _stage("search", _tuned_weights, matrix, series, args.horizon, cfg, args.weight_vector)

    if args.instance is not None:
        try:
            day = date.fromisoformat(args.instance)
        except ValueError:
            raise StageFailure("explain", DataError(f"bad instance date {args.instance!r}")) from None
        if day not in matrix.dates:
            raise StageFailure("explain", DataError(f"no signal row for {day}"))
        rows = [matrix.dates.index(day)]
    else:
        rows = list(range(len(matrix)))

    triples = _stage("explain", _explain_rows, matrix, cfg, weights, rows, method)
    out_dir = Path(args.out)
    payload = [{"date": day.isoformat(), **rec} for day, _attr, rec in triples]
    report.write_json(out_dir / "force_plots.json", payload)
    importance = summarize([attr for _day, attr, _rec in triples])
    report.write_json(out_dir / "importance.json", report.importance_json(importance))
    return 0


def _cmd_backtest(args) -> int:
    cfg = load_config(args.config)
    series = _stage("ingest", _load_series, args.input)
    frame = _stage("indicators", indicator_frame, series)
    matrix = _stage("signals", build_strategy_matrix, frame, series.closes, cfg.thresholds)
    weights = _stage("search", _tuned_weights, matrix, series, args.horizon, cfg, args.weight_vector)
    target = _stage("target", make_target, matrix, weights, args.horizon)
    bt_cfg = _stage("backtest", cfg.backtest_config, args.policy,
                    initial_capital=args.capital, hold_days=args.hold_days,
                    profit_threshold=args.profit, fee_bps=args.fees_bps,
                    entry_level=args.entry_level, max_hold_days=args.max_hold_days)
    result = _stage("backtest", run_backtest, series, target, bt_cfg)
    out_dir = Path(args.out)
    report.write_text(out_dir / "trades.csv", report.trades_csv(result))
    report.write_text(out_dir / "equity.csv", report.equity_csv(result))
    report.write_json(out_dir / "summary.json", report.backtest_summary_json(summarize_result(result)))
    return 0


def _cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out_dir = Path(args.out)
    artifacts: list[Path] = []

    def emit(rel: str, text: str) -> None:
        artifacts.append(report.write_text(out_dir / rel, text))

    def emit_json(rel: str, payload) -> None:
        artifacts.append(report.write_json(out_dir / rel, payload))

    series = _stage("ingest", _load_series, args.input)
    frame = _stage("indicators", indicator_frame, series)
    emit("indicators.csv", report.frame_csv(frame))

    matrix = _stage("signals", build_strategy_matrix, frame, series.closes, cfg.thresholds)
    emit("signals.csv", report.signals_csv(matrix))

    per_horizon = {}
    for horizon in cfg.horizons:
        result = _stage("search", grid_search, matrix, series, horizon,
                        cfg.weight_range, cfg.holdout_fraction)
        emit_json(f"search_h{horizon}.json", report.grid_search_json(result, cfg.holdout_fraction))
        target = _stage("target", make_target, matrix, result.best_weights, horizon)
        emit(f"target_h{horizon}.csv", report.target_csv(target))
        per_horizon[horizon] = (result, target)

    # explanations over each horizon's holdout rows, under its tuned weights
    for fig_no, (horizon, (result, _target)) in enumerate(sorted(per_horizon.items()), start=6):
        rows = list(holdout_window(len(matrix), horizon, cfg.holdout_fraction))
        triples = _stage("explain", _explain_rows, matrix, cfg,
                         result.best_weights, rows, cfg.explain_method)
        payload = [{"date": day.isoformat(), **rec} for day, _attr, rec in triples]
        emit_json(f"explain_h{horizon}/force_plots.json", payload)
        importance = summarize([attr for _day, attr, _rec in triples])
        emit_json(f"explain_h{horizon}/importance.json", report.importance_json(importance))
        emit(f"figures/fig05_importance_h{horizon}.csv", report.importance_bars_csv(importance))
        emit(f"figures/fig{fig_no:02d}_attributions_h{horizon}.csv",
             report.attribution_rows_csv((day, rec) for day, _attr, rec in triples))

    # backtests drive the longest-horizon target under both sell policies
    bt_horizon = max(cfg.horizons)
    _result, bt_target = per_horizon[bt_horizon]
    equity_files = {}
    for policy in ("conservative", "aggressive"):
        bt_cfg = _stage("backtest", cfg.backtest_config, policy)
        result = _stage("backtest", run_backtest, series, bt_target, bt_cfg)
        emit(f"backtest_{policy}/trades.csv", report.trades_csv(result))
        equity_text = report.equity_csv(result)
        emit(f"backtest_{policy}/equity.csv", equity_text)
        emit_json(f"backtest_{policy}/summary.json",
                  report.backtest_summary_json(summarize_result(result)))
        equity_files[policy] = equity_text

    emit("figures/fig01_close.csv", report.close_series_csv(series))
    emit("figures/fig02_ema_overlay.csv", report.ema_overlay_csv(series, frame))
    emit("figures/fig03_signals_s_ema55.csv", report.strategy_marker_csv(series, matrix, "s_ema55"))
    emit("figures/fig04_signals_s_rsi.csv", report.strategy_marker_csv(series, matrix, "s_rsi"))
    emit("figures/fig10_equity_conservative.csv", equity_files["conservative"])
    emit("figures/fig11_equity_aggressive.csv", equity_files["aggressive"])

    _stage("report", report.write_manifest, out_dir, artifacts, {
        "seed": cfg.seed,
        "input": str(args.input),
        "horizons": list(cfg.horizons),
    })
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigfuse",
        description="Leveled trading recommendations from fused indicator strategies, "
                    "with Shapley explanations and policy backtests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, input_required=True):
        if input_required:
            p.add_argument("--input", required=True, help="OHLCV CSV file")
        p.add_argument("--config", default=None, help="JSON config file")

    p = sub.add_parser("synth", help="generate a synthetic OHLCV fixture")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--days", type=int, default=2500)
    p.add_argument("--start-price", type=float, default=30000.0)
    p.add_argument("--drift", type=float, default=0.0003)
    p.add_argument("--vol", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("indicators", help="emit the indicator frame as CSV")
    add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_indicators)

    p = sub.add_parser("signals", help="emit the per-strategy signal matrix as CSV")
    add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_signals)

    p = sub.add_parser("search", help="grid-search vote weights on a tail holdout")
    add_common(p)
    p.add_argument("--horizon", type=int, choices=HORIZONS, required=True)
    p.add_argument("--weights", type=_parse_weight_range, default=None,
                   help="weight grid, e.g. '1..5'")
    p.add_argument("--holdout", type=float, default=None, help="holdout fraction (default 0.2)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_search)

    p = sub.add_parser("explain", help="attribute fused signals to the five strategies")
    add_common(p)
    p.add_argument("--horizon", type=int, choices=HORIZONS, default=5)
    p.add_argument("--weight-vector", type=_parse_weight_vector, default=None,
                   help="five comma-separated weights; omitted -> grid search")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--instance", default=None, help="ISO date of one row to explain")
    group.add_argument("--all", action="store_true", help="explain every signal row")
    p.add_argument("--method", choices=("exact", "kernel"), default=None)
    p.add_argument("--k", type=int, default=None, help="background clusters (default 50)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_explain)

    p = sub.add_parser("backtest", help="simulate a sell policy over the fused signal")
    add_common(p)
    p.add_argument("--horizon", type=int, choices=HORIZONS, default=5)
    p.add_argument("--weight-vector", type=_parse_weight_vector, default=None)
    p.add_argument("--policy", choices=("conservative", "aggressive"), default="conservative")
    p.add_argument("--capital", type=float, default=None)
    p.add_argument("--hold-days", type=int, default=None)
    p.add_argument("--profit", type=float, default=None)
    p.add_argument("--fees-bps", type=float, default=None)
    p.add_argument("--entry-level", type=int, default=None)
    p.add_argument("--max-hold-days", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_backtest)

    p = sub.add_parser("pipeline", help="run every stage and write a hashed manifest")
    add_common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except StageFailure as exc:
        print(f"error {exc}", file=sys.stderr)
        return 3 if isinstance(exc.cause, DataError) else 4
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
