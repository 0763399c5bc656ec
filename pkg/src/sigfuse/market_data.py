"""Daily OHLCV series: parsing, validation, gap repair, synthesis.

The canonical on-disk format is a CSV with header
``date,open,high,low,close,volume`` (ISO dates, ascending, one row per
trading day).  A missing numeric cell is a *gap*; gaps are carried as NaN
until :func:`forward_fill` repairs them.  Every complete bar must satisfy
the usual OHLC ordering, and the close-to-close change column is always
recomputed from the closes, never trusted from input.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

CSV_HEADER = ("date", "open", "high", "low", "close", "volume")

_PRICE_FIELDS = ("open", "high", "low", "close", "volume")


class DataError(ValueError):
    """Raised for malformed, inconsistent, or unrepairable market data."""


@dataclass(frozen=True)
class OhlcvBar:
    """One trading day. ``delta_close`` is close[d] - close[d-1] (0 on day one)."""

    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float
    delta_close: float = 0.0

    def is_complete(self) -> bool:
        return not any(
            math.isnan(v)
            for v in (self.open, self.high, self.low, self.close, self.volume)
        )


def _validate_bar_fields(day: date, o: float, h: float, l: float, c: float, v: float) -> None:
    """Reject OHLC ordering violations among the fields that are present.

    NaN marks a gap and is skipped; repairs are never attempted here.
    """
    if not math.isnan(c) and c <= 0:
        raise DataError(f"{day}: non-positive close {c}")
    if not math.isnan(v) and v < 0:
        raise DataError(f"{day}: negative volume {v}")
    for name, p in (("open", o), ("high", h), ("low", l)):
        if not math.isnan(p) and p <= 0:
            raise DataError(f"{day}: non-positive {name} {p}")
    if not math.isnan(h) and not math.isnan(l) and h < l:
        raise DataError(f"{day}: high {h} below low {l}")
    for name, p in (("open", o), ("close", c)):
        if math.isnan(p):
            continue
        if not math.isnan(h) and p > h:
            raise DataError(f"{day}: {name} {p} above high {h}")
        if not math.isnan(l) and p < l:
            raise DataError(f"{day}: {name} {p} below low {l}")


class OhlcvSeries:
    """Immutable, date-ascending sequence of daily bars backed by numpy arrays.

    ``delta_close`` is derived in the constructor: 0.0 for the first bar,
    exact float difference of consecutive closes afterwards (NaN when either
    close is a gap).
    """

    __slots__ = ("dates", "opens", "highs", "lows", "closes", "volumes", "delta_close")

    def __init__(
        self,
        dates,
        opens,
        highs,
        lows,
        closes,
        volumes,
    ) -> None:
        self.dates: tuple[date, ...] = tuple(dates)
        if len(self.dates) < 1:
            raise DataError("series must contain at least one bar")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur == prev:
                raise DataError(f"duplicate date {cur}")
            if cur < prev:
                raise DataError(f"dates not ascending at {cur}")

        def as_f64(x) -> np.ndarray:
            a = np.asarray(x, dtype=np.float64)
            if a.shape != (len(self.dates),):
                raise DataError("field arrays must match the number of dates")
            return a

        self.opens = as_f64(opens)
        self.highs = as_f64(highs)
        self.lows = as_f64(lows)
        self.closes = as_f64(closes)
        self.volumes = as_f64(volumes)
        for arr in (self.opens, self.highs, self.lows, self.closes, self.volumes):
            arr.flags.writeable = False

        for i, day in enumerate(self.dates):
            _validate_bar_fields(
                day, self.opens[i], self.highs[i], self.lows[i],
                self.closes[i], self.volumes[i],
            )

        dc = np.empty(len(self.dates), dtype=np.float64)
        dc[0] = 0.0
        dc[1:] = self.closes[1:] - self.closes[:-1]
        dc.flags.writeable = False
        self.delta_close = dc

    def __len__(self) -> int:
        return len(self.dates)

    def __getitem__(self, i: int) -> OhlcvBar:
        return OhlcvBar(
            date=self.dates[i],
            open=float(self.opens[i]),
            high=float(self.highs[i]),
            low=float(self.lows[i]),
            close=float(self.closes[i]),
            volume=float(self.volumes[i]),
            delta_close=float(self.delta_close[i]),
        )

    @property
    def bars(self) -> list[OhlcvBar]:
        return [self[i] for i in range(len(self))]

    def has_gaps(self) -> bool:
        return bool(
            np.isnan(self.opens).any()
            or np.isnan(self.highs).any()
            or np.isnan(self.lows).any()
            or np.isnan(self.closes).any()
            or np.isnan(self.volumes).any()
        )

    @classmethod
    def from_bars(cls, bars) -> "OhlcvSeries":
        bars = list(bars)
        return cls(
            [b.date for b in bars],
            [b.open for b in bars],
            [b.high for b in bars],
            [b.low for b in bars],
            [b.close for b in bars],
            [b.volume for b in bars],
        )


def _parse_cell(raw: str, column: str, line_no: int) -> float:
    text = raw.strip()
    if text == "":
        return math.nan  # gap; forward_fill repairs later
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"line {line_no}: bad {column} value {raw!r}") from None
    if math.isnan(value) or math.isinf(value):
        raise DataError(f"line {line_no}: non-finite {column} value {raw!r}")
    return value


def parse_ohlcv(text: str) -> OhlcvSeries:
    """Parse a CSV document into an :class:`OhlcvSeries`.

    Rows may arrive in any order and are sorted by date; duplicate dates are
    rejected.  Empty numeric cells become gaps (NaN).  Errors carry 1-based
    line numbers.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty document") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise DataError(
            f"line 1: expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
        )

    rows: list[tuple[date, float, float, float, float, float]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(cell.strip() == "" for cell in row):
            continue
        if len(row) != len(CSV_HEADER):
            raise DataError(f"line {line_no}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        try:
            day = date.fromisoformat(row[0].strip())
        except ValueError:
            raise DataError(f"line {line_no}: bad date {row[0]!r}") from None
        values = [_parse_cell(row[i], CSV_HEADER[i], line_no) for i in range(1, 6)]
        rows.append((day, *values))

    if not rows:
        raise DataError("no data rows")
    rows.sort(key=lambda r: r[0])
    for a, b in zip(rows, rows[1:]):
        if a[0] == b[0]:
            raise DataError(f"duplicate date {a[0]}")
    cols = list(zip(*rows))
    return OhlcvSeries(cols[0], cols[1], cols[2], cols[3], cols[4], cols[5])


def serialize_ohlcv(series: OhlcvSeries) -> str:
    """Render a series back to the canonical CSV (LF newlines, repr floats).

    ``parse_ohlcv(serialize_ohlcv(s))`` reproduces ``s`` field-exactly; gaps
    serialize as empty cells.
    """
    out = [",".join(CSV_HEADER)]
    for i in range(len(series)):
        cells = [series.dates[i].isoformat()]
        for arr in (series.opens, series.highs, series.lows, series.closes, series.volumes):
            v = arr[i]
            cells.append("" if math.isnan(v) else repr(float(v)))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def forward_fill(series: OhlcvSeries) -> OhlcvSeries:
    """Replace every gap by the most recent observed value of that field.

    The first bar must be complete (there is nothing to fill from).  The
    close-change column is recomputed afterwards; ordering violations
    introduced by filling are rejected, not repaired.
    """
    if not series[0].is_complete():
        raise DataError(f"{series.dates[0]}: first bar has missing fields; cannot fill")
    if not series.has_gaps():
        return series

    filled = {}
    for name in _PRICE_FIELDS:
        col = np.array(getattr(series, name + "s"), dtype=np.float64)
        for i in range(1, len(col)):
            if math.isnan(col[i]):
                col[i] = col[i - 1]
        filled[name] = col
    return OhlcvSeries(
        series.dates, filled["open"], filled["high"],
        filled["low"], filled["close"], filled["volume"],
    )


def _business_days(start: date, n: int) -> list[date]:
    days = []
    d = start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def generate_synthetic(
    seed: int,
    n_days: int,
    start_price: float = 30000.0,
    drift: float = 0.0003,
    vol: float = 0.01,
    start_date: date = date(2015, 1, 5),
) -> OhlcvSeries:
    """Geometric-random-walk fixture series, bit-reproducible for a fixed seed.

    Closes follow ``close[d] = close[d-1] * exp(drift + vol * z_d)``; each
    open is the previous close and highs/lows bracket the body with wicks
    scaled by ``vol`` (so ``vol=0`` degenerates to a constant series).
    """
    if n_days < 1:
        raise DataError("n_days must be >= 1")
    if start_price <= 0:
        raise DataError("start_price must be positive")
    if vol < 0:
        raise DataError("vol must be non-negative")

    rng = np.random.default_rng(seed)
    steps = drift + vol * rng.standard_normal(n_days - 1)
    closes = start_price * np.exp(np.concatenate(([0.0], np.cumsum(steps))))
    opens = np.concatenate(([start_price], closes[:-1]))
    body_hi = np.maximum(opens, closes)
    body_lo = np.minimum(opens, closes)
    wick_up = np.abs(rng.standard_normal(n_days)) * (vol / 2.0)
    # cap the lower wick so lows stay positive even for extreme vol settings
    wick_dn = np.minimum(np.abs(rng.standard_normal(n_days)) * (vol / 2.0), 0.5)
    highs = body_hi * (1.0 + wick_up)
    lows = body_lo * (1.0 - wick_dn)
    volumes = np.round(rng.lognormal(mean=13.0, sigma=0.4, size=n_days))

    return OhlcvSeries(_business_days(start_date, n_days), opens, highs, lows, closes, volumes)
