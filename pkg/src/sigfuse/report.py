"""Artifact writers: stage outputs, plot-ready figure data, hash manifest.

Everything written here is a pure function of its inputs.  Floats are
rendered with ``repr`` so files are byte-stable across runs and values
round-trip exactly; JSON keys are emitted in a fixed order.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .backtest import BacktestResult, BacktestSummary
from .ensemble import GridSearchResult, TargetSeries
from .explain import ImportanceSummary
from .indicators import IndicatorFrame
from .market_data import OhlcvSeries, serialize_ohlcv
from .signals import STRATEGY_COLUMNS, StrategyMatrix


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _num(v) -> str:
    return repr(float(v))


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def write_json(path: Path, payload) -> Path:
    return write_text(path, json.dumps(payload, indent=2) + "\n")


def ohlcv_csv(series: OhlcvSeries) -> str:
    return serialize_ohlcv(series)


def frame_csv(frame: IndicatorFrame) -> str:
    header = ("date", "ema55", "ema100", "ema200", "macd_line", "signal_line", "rsi", "warmup")
    rows = (
        (
            frame.dates[i].isoformat(),
            _num(frame.ema55[i]), _num(frame.ema100[i]), _num(frame.ema200[i]),
            _num(frame.macd_line[i]), _num(frame.signal_line[i]), _num(frame.rsi[i]),
            "true" if i < frame.warmup_len else "false",
        )
        for i in range(len(frame))
    )
    return _csv(header, rows)


def signals_csv(matrix: StrategyMatrix) -> str:
    header = ("date",) + STRATEGY_COLUMNS
    rows = (
        (matrix.dates[i].isoformat(), *(str(int(v)) for v in matrix.levels[i]))
        for i in range(len(matrix))
    )
    return _csv(header, rows)


def target_csv(target: TargetSeries) -> str:
    header = ("date", "z")
    rows = ((target.dates[i].isoformat(), str(int(target.z[i]))) for i in range(len(target)))
    return _csv(header, rows)


def grid_search_json(result: GridSearchResult, eval_fraction: float) -> dict:
    return {
        "horizon": result.horizon,
        "weights": result.weights_by_strategy(),
        "accuracy": result.best_accuracy,
        "evaluated": result.evaluated,
        "decisions": result.decided,
        "holdout_fraction": eval_fraction,
    }


def trades_csv(result: BacktestResult) -> str:
    header = ("entry_date", "exit_date", "entry_price", "exit_price", "units", "pnl", "exit_reason")
    rows = (
        (
            t.entry_date.isoformat(), t.exit_date.isoformat(),
            _num(t.entry_price), _num(t.exit_price), _num(t.units), _num(t.pnl),
            t.exit_reason,
        )
        for t in result.trades
    )
    return _csv(header, rows)


def equity_csv(result: BacktestResult) -> str:
    header = ("date", "value")
    rows = (
        (result.equity_dates[i].isoformat(), _num(result.equity[i]))
        for i in range(len(result.equity))
    )
    return _csv(header, rows)


def backtest_summary_json(summary: BacktestSummary) -> dict:
    return {
        "final_value": summary.final_value,
        "total_return": summary.total_return,
        "trades": summary.trades,
        "win_rate": summary.win_rate,
        "max_drawdown": summary.max_drawdown,
    }


def importance_json(summary: ImportanceSummary) -> dict:
    return {
        "mean_abs_phi": {
            name: float(summary.mean_abs_phi[i]) for i, name in enumerate(STRATEGY_COLUMNS)
        },
        "ranking": list(summary.ranking),
    }


# ---------------------------------------------------------------------------
# Figure-class data files (plot data only; rendering is out of scope)
# ---------------------------------------------------------------------------

def close_series_csv(series: OhlcvSeries) -> str:
    """Close-price history (Fig-1 class): input date/close columns verbatim."""
    header = ("date", "close")
    rows = (
        (series.dates[i].isoformat(), _num(series.closes[i]))
        for i in range(len(series))
    )
    return _csv(header, rows)


def ema_overlay_csv(series: OhlcvSeries, frame: IndicatorFrame) -> str:
    """Close plus the three EMA columns (Fig-2 class)."""
    header = ("date", "close", "ema55", "ema100", "ema200")
    rows = (
        (
            series.dates[i].isoformat(), _num(series.closes[i]),
            _num(frame.ema55[i]), _num(frame.ema100[i]), _num(frame.ema200[i]),
        )
        for i in range(len(series))
    )
    return _csv(header, rows)


def strategy_marker_csv(series: OhlcvSeries, matrix: StrategyMatrix, column: str) -> str:
    """Per-day close and one strategy's level (Fig-3/4 class signal markers)."""
    j = STRATEGY_COLUMNS.index(column)
    header = ("date", "close", column)
    rows = (
        (
            matrix.dates[i].isoformat(),
            _num(series.closes[matrix.offset + i]),
            str(int(matrix.levels[i, j])),
        )
        for i in range(len(matrix))
    )
    return _csv(header, rows)


def importance_bars_csv(summary: ImportanceSummary) -> str:
    """Mean-|phi| bars (Fig-5 class), one row per strategy in ranked order."""
    header = ("strategy", "mean_abs_phi")
    by_name = {name: summary.mean_abs_phi[i] for i, name in enumerate(STRATEGY_COLUMNS)}
    rows = ((name, _num(by_name[name])) for name in summary.ranking)
    return _csv(header, rows)


def attribution_rows_csv(dated_records) -> str:
    """Per-instance attribution rows (Fig-6/7 class).

    ``dated_records`` yields (date, force_plot_record) pairs; the per-feature
    phi values are flattened back into fixed strategy-column order.
    """
    header = (
        ("date", "base_value", "fx", "decision")
        + tuple(f"phi_{c}" for c in STRATEGY_COLUMNS)
        + tuple(f"level_{c}" for c in STRATEGY_COLUMNS)
    )

    def rows():
        for day, record in dated_records:
            by_name = {f["name"]: f for f in record["features"]}
            yield (
                day.isoformat(),
                _num(record["base_value"]), _num(record["fx"]), str(record["decision"]),
                *(_num(by_name[c]["phi"]) for c in STRATEGY_COLUMNS),
                *(str(by_name[c]["level"]) for c in STRATEGY_COLUMNS),
            )

    return _csv(header, rows())


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: Path, artifact_paths, extra: dict | None = None) -> Path:
    """Write report.json listing every artifact with its content hash."""
    entries = []
    for p in sorted(artifact_paths, key=lambda p: str(p.relative_to(out_dir))):
        entries.append({
            "path": str(p.relative_to(out_dir)),
            "sha256": sha256_file(p),
            "bytes": p.stat().st_size,
        })
    payload = dict(extra or {})
    payload["artifacts"] = entries
    return write_json(out_dir / "report.json", payload)


def verify_manifest(out_dir: Path) -> bool:
    """Recompute every artifact hash recorded in report.json."""
    manifest = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
    for entry in manifest["artifacts"]:
        p = out_dir / entry["path"]
        if not p.is_file() or sha256_file(p) != entry["sha256"]:
            return False
    return True
