"""Day-ahead price series: CSV loading/writing and a synthetic generator."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .domain import ConfigError, PriceSeries

CSV_HEADER = ("timestamp", "price_eur_mwh")


class PriceFormatError(ValueError):
    pass


def _parse_ts(text: str, lineno: int) -> datetime:
    raw = text.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError:
        raise PriceFormatError(f"line {lineno}: bad timestamp {text!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    if ts.minute or ts.second or ts.microsecond:
        raise PriceFormatError(f"line {lineno}: timestamp {text!r} is not hour-aligned")
    return ts


def load_price_csv(path: str | Path) -> PriceSeries:
    """Read ``timestamp,price_eur_mwh`` rows (header required, hourly, no gaps)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != list(CSV_HEADER):
        raise PriceFormatError(f"line 1: expected header {','.join(CSV_HEADER)}")
    stamps: list[datetime] = []
    prices: list[float] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise PriceFormatError(f"line {lineno}: expected 2 fields, got {len(row)}")
        ts = _parse_ts(row[0], lineno)
        try:
            price = float(row[1])
        except ValueError:
            raise PriceFormatError(f"line {lineno}: bad price {row[1]!r}") from None
        if not math.isfinite(price):
            raise PriceFormatError(f"line {lineno}: non-finite price {row[1]!r}")
        if stamps:
            expected = stamps[-1] + timedelta(hours=1)
            if ts == stamps[-1] or ts < expected:
                raise PriceFormatError(f"line {lineno}: duplicate or out-of-order "
                                       f"timestamp {ts.isoformat()}")
            if ts != expected:
                raise PriceFormatError(f"line {lineno}: gap, missing timestamp "
                                       f"{expected.isoformat()}")
        stamps.append(ts)
        prices.append(price)
    if not stamps:
        raise PriceFormatError("no price rows")
    return PriceSeries(stamps[0], np.array(prices))


def format_price_csv(series: PriceSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for ts, p in zip(series.timestamps(), series.pi_da):
        w.writerow([ts.strftime("%Y-%m-%dT%H:%M:%SZ"), repr(float(p))])
    return buf.getvalue()


def write_price_csv(series: PriceSeries, path: str | Path) -> None:
    Path(path).write_text(format_price_csv(series))


@dataclass(frozen=True)
class SyntheticPriceParams:
    seed: int = 0
    days: int = 33
    base: float = 70.0
    morning_amp: float = 25.0
    evening_amp: float = 45.0
    morning_hour: float = 8.0
    evening_hour: float = 19.0
    peak_width: float = 2.0
    noise_std: float = 15.0
    neg_prob: float = 0.02
    neg_amp: float = 30.0
    start: str = "2024-01-01T00:00:00+00:00"

    def __post_init__(self):
        if self.days < 1:
            raise ConfigError("days", "days must be >= 1")
        for name in ("morning_amp", "evening_amp", "noise_std", "neg_amp"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"{name} must be >= 0")
        if self.peak_width <= 0:
            raise ConfigError("peak_width", "peak_width must be > 0")
        if not 0 <= self.neg_prob <= 1:
            raise ConfigError("neg_prob", "neg_prob must lie in [0, 1]")


def daily_shape(params: SyntheticPriceParams) -> np.ndarray:
    """Noise-free 24-hour profile: base plus two Gaussian peaks (circular in the hour)."""
    h = np.arange(24, dtype=float)

    def bump(center: float) -> np.ndarray:
        d = np.abs(h - center)
        d = np.minimum(d, 24 - d)
        return np.exp(-0.5 * (d / params.peak_width) ** 2)

    return (params.base + params.morning_amp * bump(params.morning_hour)
            + params.evening_amp * bump(params.evening_hour))


def synth_prices(params: SyntheticPriceParams) -> PriceSeries:
    rng = np.random.default_rng(params.seed)
    n = 24 * params.days
    shape = np.tile(daily_shape(params), params.days)
    noise = rng.normal(0.0, params.noise_std, n) if params.noise_std > 0 else np.zeros(n)
    flags = rng.random(n) < params.neg_prob
    neg = -params.neg_amp * (1.0 - rng.random(n))     # in [-neg_amp, 0)
    prices = np.where(flags, neg, shape + noise)
    start = datetime.fromisoformat(params.start)
    return PriceSeries(start, prices)
