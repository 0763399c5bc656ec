"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with -s to see them live).  The
checks are property-based plus oracle equivalence; no expected value below
was produced by the code path it validates.
"""

import contextlib
import csv
import itertools
import json
import math
import time
from datetime import date, timedelta

import numpy as np
import pytest

from sigfuse import (
    BacktestConfig,
    OhlcvSeries,
    StrategyMatrix,
    TargetSeries,
    build_background,
    ema,
    exact_shapley,
    generate_synthetic,
    grid_search,
    kernel_shap,
    kmeans,
    macd,
    rsi,
    run_backtest,
    vote_model,
    weighted_vote,
)
from sigfuse.cli import main
from sigfuse.explain import BackgroundSet
from sigfuse.report import verify_manifest


@contextlib.contextmanager
def criterion(number: int, label: str):
    try:
        yield
    except BaseException:
        print(f"FAIL criterion {number}: {label}")
        raise
    print(f"PASS criterion {number}: {label}")


# ---------------------------------------------------------------------------
# 1. indicator fidelity
# ---------------------------------------------------------------------------

def closed_form_ema(close, span):
    """Explicit geometric-weight expansion of the smoothing recursion."""
    a = 2.0 / (span + 1)
    decay = (1.0 - a) ** np.arange(len(close))
    out = np.empty(len(close))
    for d in range(len(close)):
        recent = close[d::-1]  # close[d], close[d-1], ..., close[0]
        out[d] = a * float(decay[:d] @ recent[:d]) + decay[d] * close[0]
    return out


def spreadsheet_rsi(close, period=14):
    out = []
    for d in range(len(close)):
        changes = [close[r] - close[r - 1] for r in range(max(1, d - period + 1), d + 1)]
        if not changes:
            out.append(50.0)
            continue
        gain = sum(max(c, 0.0) for c in changes) / period
        loss = sum(max(-c, 0.0) for c in changes) / period
        if loss == 0.0:
            out.append(50.0 if gain == 0.0 else 100.0)
        else:
            out.append(100.0 - 100.0 / (1.0 + gain / loss))
    return np.array(out)


def test_criterion_1_indicator_fidelity():
    with criterion(1, "indicator fidelity (EMA/MACD/RSI oracles, < 1 s)"):
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        close = 100.0 + rng.normal(0, 2, size=500).cumsum()

        for span in (55, 100, 200):
            gap = np.max(np.abs(ema(close, span) - closed_form_ema(close, span)))
            assert gap < 1e-9, f"span {span}: closed-form gap {gap}"

        const = ema(np.full(300, 1234.5), span=200)
        assert np.all(const == 1234.5), "constant series must be an exact fixed point"

        line, sig = macd(np.arange(400, dtype=float))
        assert abs(line[-1] - 7.0) < 1e-3, f"ramp MACD line settled at {line[-1]}"

        fixture = np.array([100, 101, 99, 102, 104, 103, 105, 104, 106, 108,
                            107, 109, 111, 110, 112], dtype=float)
        gap = np.max(np.abs(rsi(fixture) - spreadsheet_rsi(fixture)))
        assert gap < 1e-9, f"RSI fixture gap {gap}"

        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 2. vote-function axioms
# ---------------------------------------------------------------------------

def test_criterion_2_vote_axioms():
    with criterion(2, "vote axioms on 10,000 random draws (< 1 s)"):
        start = time.perf_counter()
        rng = np.random.default_rng(77)
        signals = rng.integers(-3, 4, size=(10_000, 5))
        weights = rng.integers(1, 6, size=(10_000, 5))
        for s_row, w_row in zip(signals, weights):
            s, w = tuple(int(v) for v in s_row), tuple(int(v) for v in w_row)
            out = weighted_vote(s, w)
            assert abs(out) <= max(abs(v) for v in s)
            assert weighted_vote(tuple(-v for v in s), w) == -out
            assert weighted_vote(s, tuple(3 * v for v in w)) == out
            assert weighted_vote((s[0],) * 5, w) == s[0]  # unanimity
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 3. grid-search oracle and throughput
# ---------------------------------------------------------------------------

def _mini_series(closes):
    closes = np.asarray(closes, dtype=float)
    days = [date(2020, 1, 1) + timedelta(days=i) for i in range(len(closes))]
    return OhlcvSeries(days, closes, closes * 2, closes / 2, closes,
                       np.ones(len(closes)))


def _mini_matrix(levels):
    levels = np.asarray(levels, dtype=np.int64)
    days = tuple(date(2020, 1, 1) + timedelta(days=i) for i in range(len(levels)))
    return StrategyMatrix(dates=days, levels=levels, offset=0)


def independent_enumeration(matrix, series, horizon, values, frac):
    n = len(matrix)
    window = range(n - math.ceil(frac * n), n - horizon)
    best = None
    for w in itertools.product(sorted(values), repeat=5):
        correct = total = 0
        for d in window:
            z = weighted_vote(tuple(int(v) for v in matrix.levels[d]), w)
            if z == 0:
                continue
            total += 1
            moved = series.closes[matrix.offset + d + horizon] - series.closes[matrix.offset + d]
            if (z > 0 and moved > 0) or (z < 0 and moved < 0):
                correct += 1
        acc = correct / total if total else 0.0
        if best is None or acc > best[1]:
            best = (w, acc)
    return best


def test_criterion_3_grid_search_oracle(long_matrix, long_series):
    with criterion(3, "grid search equals exhaustive oracle; full grid < 10 s"):
        rng = np.random.default_rng(5)
        levels = rng.integers(-3, 4, size=(300, 5))
        closes = 100 + rng.normal(0, 1, size=300).cumsum()
        series, matrix = _mini_series(closes), _mini_matrix(levels)
        got = grid_search(matrix, series, horizon=5, weight_range={1, 2})
        want_w, want_acc = independent_enumeration(matrix, series, 5, {1, 2}, 0.2)
        assert got.evaluated == 32
        assert got.best_weights == want_w
        assert got.best_accuracy == pytest.approx(want_acc, abs=1e-12)

        # forced tie: all-hold matrix scores 0 everywhere, so the
        # lexicographically smallest vector must win
        hold = _mini_matrix(np.zeros((300, 5)))
        tied = grid_search(hold, series, horizon=5, weight_range={1, 2})
        assert tied.best_weights == (1, 1, 1, 1, 1)
        assert tied.best_weights == independent_enumeration(hold, series, 5, {1, 2}, 0.2)[0]

        start = time.perf_counter()
        full = grid_search(long_matrix, long_series, horizon=5, weight_range=range(1, 6))
        elapsed = time.perf_counter() - start
        assert full.evaluated == 3125
        assert elapsed < 10.0, f"full grid took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 4. Shapley axioms and method agreement
# ---------------------------------------------------------------------------

def test_criterion_4_shapley_axioms(long_matrix):
    with criterion(4, "Shapley axioms + kernel/exact agreement (< 5 s)"):
        start = time.perf_counter()
        bg = build_background(long_matrix.levels, k=50, seed=7)
        assert len(bg.rows) == 50
        f = vote_model((2, 1, 2, 1, 2))
        coeff = np.array([2, 1, 2, 1, 2], dtype=float) / 8.0
        bg_mean = bg.weights @ bg.rows.astype(float)

        def dummy_f(rows):
            rows = np.asarray(rows, dtype=float)
            return rows[:, 0] * 0.5 - rows[:, 2] * 0.25  # ignores 1, 3, 4

        sym_rows = bg.rows.copy()
        sym_rows[:, 1] = sym_rows[:, 0]  # make features 0 and 1 interchangeable
        sym_bg = BackgroundSet(rows=sym_rows, weights=bg.weights,
                               centroids=sym_rows.astype(float))
        sym_f = vote_model((2, 2, 1, 1, 1))

        rng = np.random.default_rng(31)
        for _ in range(200):
            x = rng.integers(-3, 4, size=5).astype(float)
            a = exact_shapley(f, x, bg)
            b = kernel_shap(f, x, bg)
            assert a.efficiency_gap <= 1e-9
            assert b.efficiency_gap <= 1e-9
            assert np.max(np.abs(a.phi - b.phi)) <= 1e-6
            # linear-game closed form
            want = coeff * (x - bg_mean)
            assert np.max(np.abs(a.phi - want)) <= 1e-9
            # dummy axiom
            d = exact_shapley(dummy_f, x, bg)
            assert max(abs(d.phi[1]), abs(d.phi[3]), abs(d.phi[4])) <= 1e-12
            # symmetry axiom
            x_sym = x.copy()
            x_sym[1] = x_sym[0]
            s = exact_shapley(sym_f, x_sym, sym_bg)
            assert abs(s.phi[0] - s.phi[1]) <= 1e-9

        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


# ---------------------------------------------------------------------------
# 5. k-means sanity
# ---------------------------------------------------------------------------

def test_criterion_5_kmeans_sanity():
    with criterion(5, "k-means inertia, blob recovery, determinism"):
        rng = np.random.default_rng(13)
        pts = rng.integers(-3, 4, size=(1000, 5)).astype(float)
        bg = kmeans(pts, k=50, seed=3)
        hist = bg.inertia_history
        assert all(a >= b - 1e-9 for a, b in zip(hist, hist[1:]))

        blob_a = np.full(5, -2.0) + rng.choice([-1.0, 0.0, 1.0], size=(60, 5))
        blob_b = np.full(5, 2.0) + rng.choice([-1.0, 0.0, 1.0], size=(60, 5))
        two = kmeans(np.vstack([blob_a, blob_b]), k=2, seed=11)
        means = np.array([blob_a.mean(axis=0), blob_b.mean(axis=0)])
        nearest = []
        for c in two.centroids:
            gaps = np.linalg.norm(means - c, axis=1)
            assert gaps.min() < 0.5
            nearest.append(int(np.argmin(gaps)))
        assert sorted(nearest) == [0, 1]

        again = kmeans(pts, k=50, seed=3)
        assert np.array_equal(bg.rows, again.rows)
        assert np.array_equal(bg.weights, again.weights)
        assert np.array_equal(bg.centroids, again.centroids)
        assert bg.inertia_history == again.inertia_history


# ---------------------------------------------------------------------------
# 6. backtest accounting
# ---------------------------------------------------------------------------

FIXTURE_CLOSES = np.array([
    98, 99, 100, 101, 103, 102, 104, 110, 108, 107,
    105, 104, 106, 107, 108, 109, 110, 111, 112, 111,
    110, 109, 108, 107, 106, 105, 104, 103, 102, 101,
], dtype=float)


def _fixture_run(policy):
    series = _mini_series(FIXTURE_CLOSES)
    z = np.zeros(30, dtype=np.int64)
    z[2] = 3
    target = TargetSeries(horizon=5, z=z, offset=0, dates=series.dates)
    return series, target, run_backtest(series, target, BacktestConfig(policy=policy))


def test_criterion_6_backtest_accounting():
    with criterion(6, "backtest trade-log oracle and value conservation"):
        series, target, cons = _fixture_run("conservative")
        assert len(cons.trades) == 1
        t = cons.trades[0]
        # hand-derived oracle: buy 10000/100 = 100 units at bar 2, sell at
        # bar 7 close 110 -> pnl 1000, final 11000
        assert (t.entry_date, t.exit_date) == (series.dates[2], series.dates[7])
        assert (t.entry_price, t.exit_price) == (100.0, 110.0)
        assert (t.units, t.pnl, t.exit_reason) == (100.0, 1000.0, "horizon_elapsed")
        assert cons.final_value == 11000.0

        _series, _target, aggr = _fixture_run("aggressive")
        at = aggr.trades[0]
        threshold = at.entry_price * 1.02
        exit_idx = series.dates.index(at.exit_date)
        assert at.exit_reason == "profit_target"
        assert FIXTURE_CLOSES[exit_idx] >= threshold
        for d in range(3, exit_idx):  # exhaustive scan: no earlier bar qualifies
            assert FIXTURE_CLOSES[d] < threshold
        assert exit_idx == 4 and at.exit_price == 103.0

        for result in (cons, aggr):
            holding = 0.0
            value = 10000.0
            entries = {series.dates.index(t.entry_date): t for t in result.trades}
            exits = {series.dates.index(t.exit_date) for t in result.trades}
            for i in range(30):
                value += holding * (FIXTURE_CLOSES[i] - FIXTURE_CLOSES[i - 1]) if i else 0.0
                if i in exits:
                    holding = 0.0
                if i in entries:
                    holding = entries[i].units
                assert abs(result.equity[i] - value) <= 1e-9


# ---------------------------------------------------------------------------
# 7 + 8. end-to-end determinism, throughput, format contracts
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept")
    data = root / "data.csv"
    assert main(["synth", "--seed", "1", "--days", "2500", "--out", str(data)]) == 0
    out_a, out_b = root / "a", root / "b"
    start = time.perf_counter()
    assert main(["pipeline", "--input", str(data), "--out", str(out_a)]) == 0
    elapsed = time.perf_counter() - start
    assert main(["pipeline", "--input", str(data), "--out", str(out_b)]) == 0
    return data, out_a, out_b, elapsed


def test_criterion_7_pipeline_determinism(pipeline_runs):
    with criterion(7, "pipeline on 2,500 days: < 60 s and byte-identical replay"):
        _data, out_a, out_b, elapsed = pipeline_runs
        assert elapsed < 60.0, f"pipeline took {elapsed:.1f}s"
        manifest = json.loads((out_a / "report.json").read_text())
        assert len(manifest["artifacts"]) >= 8
        for entry in manifest["artifacts"]:
            a = (out_a / entry["path"]).read_bytes()
            b = (out_b / entry["path"]).read_bytes()
            assert a == b, f"artifact {entry['path']} differs between runs"
        assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()


def test_criterion_8_format_contracts(pipeline_runs):
    with criterion(8, "emitted artifacts validate against the documented schemas"):
        data, out, _b, _elapsed = pipeline_runs
        assert verify_manifest(out)

        for policy in ("conservative", "aggressive"):
            with open(out / f"backtest_{policy}" / "trades.csv", newline="") as fh:
                trades = list(csv.DictReader(fh))
            for row in trades:
                assert set(row) == {"entry_date", "exit_date", "entry_price",
                                    "exit_price", "units", "pnl", "exit_reason"}
                assert row["exit_reason"] in ("horizon_elapsed", "profit_target",
                                              "max_hold", "end_of_data")
                date.fromisoformat(row["entry_date"])
            with open(out / f"backtest_{policy}" / "equity.csv", newline="") as fh:
                equity = list(csv.DictReader(fh))
            assert set(equity[0]) == {"date", "value"}
            assert float(equity[0]["value"]) == 10000.0

        for horizon in (1, 5):
            payload = json.loads((out / f"search_h{horizon}.json").read_text())
            assert set(payload) == {"horizon", "weights", "accuracy", "evaluated",
                                    "decisions", "holdout_fraction"}
            assert payload["evaluated"] == 3125
            force = json.loads((out / f"explain_h{horizon}/force_plots.json").read_text())
            for record in force:
                assert set(record) == {"date", "base_value", "fx", "decision", "features"}
                assert len(record["features"]) == 5
                total = sum(f["phi"] for f in record["features"])
                assert abs(record["base_value"] + total - record["fx"]) <= 1e-9
                assert record["decision"] in range(-3, 4)

        # close-figure data round-trips the input close column exactly
        with open(data, newline="") as fh:
            source = list(csv.DictReader(fh))
        with open(out / "figures" / "fig01_close.csv", newline="") as fh:
            fig = list(csv.DictReader(fh))
        assert [r["close"] for r in fig] == [r["close"] for r in source]
        assert [r["date"] for r in fig] == [r["date"] for r in source]
