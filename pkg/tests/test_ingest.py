import math
from datetime import datetime, timezone

import numpy as np
import pytest

from bessbid.domain import ConfigError, PriceSeries
from bessbid.ingest import (PriceFormatError, SyntheticPriceParams, format_price_csv,
                            load_price_csv, synth_prices, write_price_csv)


def write(tmp_path, text):
    p = tmp_path / "p.csv"
    p.write_text(text)
    return p


def test_three_contiguous_rows(tmp_path):
    p = write(tmp_path, "timestamp,price_eur_mwh\n"
                        "2024-01-01T00:00:00Z,10.5\n"
                        "2024-01-01T01:00:00Z,-3\n"
                        "2024-01-01T02:00:00+00:00,7\n")
    s = load_price_csv(p)
    assert len(s) == 3
    assert list(s.pi_da) == [10.5, -3.0, 7.0]
    assert s.start == datetime(2024, 1, 1, tzinfo=timezone.utc)


def test_gap_names_missing_timestamp(tmp_path):
    p = write(tmp_path, "timestamp,price_eur_mwh\n"
                        "2024-01-01T00:00:00Z,1\n"
                        "2024-01-01T02:00:00Z,2\n")
    with pytest.raises(PriceFormatError) as exc:
        load_price_csv(p)
    assert "line 3" in str(exc.value)
    assert "2024-01-01T01:00:00" in str(exc.value)


def test_duplicate_timestamp(tmp_path):
    p = write(tmp_path, "timestamp,price_eur_mwh\n"
                        "2024-01-01T00:00:00Z,1\n"
                        "2024-01-01T00:00:00Z,2\n")
    with pytest.raises(PriceFormatError, match="line 3: duplicate"):
        load_price_csv(p)


@pytest.mark.parametrize("row,fragment", [
    ("2024-01-01T01:00:00Z,NaN", "non-finite"),
    ("2024-01-01T01:00:00Z,inf", "non-finite"),
    ("2024-01-01T01:00:00Z,abc", "bad price"),
    ("2024-01-01T01:00:00Z", "expected 2 fields"),
    ("yesterday,5", "bad timestamp"),
    ("2024-01-01T01:30:00Z,5", "not hour-aligned"),
])
def test_malformed_rows_report_line(tmp_path, row, fragment):
    p = write(tmp_path, "timestamp,price_eur_mwh\n2024-01-01T00:00:00Z,1\n" + row + "\n")
    with pytest.raises(PriceFormatError) as exc:
        load_price_csv(p)
    assert "line 3" in str(exc.value) and fragment in str(exc.value)


def test_header_required(tmp_path):
    with pytest.raises(PriceFormatError, match="line 1"):
        load_price_csv(write(tmp_path, "2024-01-01T00:00:00Z,1\n"))
    with pytest.raises(PriceFormatError):
        load_price_csv(write(tmp_path, "timestamp,price_eur_mwh\n"))


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_price_csv(tmp_path / "nope.csv")


def test_round_trip_is_exact(tmp_path):
    s = synth_prices(SyntheticPriceParams(seed=4, days=5))
    path = tmp_path / "s.csv"
    write_price_csv(s, path)
    back = load_price_csv(path)
    assert back.start == s.start
    assert np.array_equal(back.pi_da, s.pi_da)
    assert format_price_csv(back) == path.read_text()


def test_synthetic_is_deterministic():
    a = synth_prices(SyntheticPriceParams(seed=9, days=10))
    b = synth_prices(SyntheticPriceParams(seed=9, days=10))
    c = synth_prices(SyntheticPriceParams(seed=10, days=10))
    assert np.array_equal(a.pi_da, b.pi_da)
    assert not np.array_equal(a.pi_da, c.pi_da)


def test_synthetic_length():
    assert len(synth_prices(SyntheticPriceParams(days=7, seed=3))) == 168


def test_noise_free_series_is_periodic():
    s = synth_prices(SyntheticPriceParams(days=6, noise_std=0.0, neg_prob=0.0))
    days = np.asarray(s.pi_da).reshape(6, 24)
    assert np.all(days == days[0])
    # evening peak is the daily maximum
    assert int(np.argmax(days[0])) == 19


def test_negative_hours_lie_in_range():
    s = synth_prices(SyntheticPriceParams(days=50, seed=1, neg_prob=0.2, noise_std=0.0,
                                          neg_amp=30.0, base=70.0))
    neg = np.asarray(s.pi_da)[np.asarray(s.pi_da) < 0]
    assert len(neg) > 100
    assert neg.min() >= -30.0 and neg.max() < 0.0


def _gauss_row_sum(width):
    # sum over all integer offsets of exp(-d^2 / 2w^2); Poisson summation says this is
    # sqrt(2 pi) w up to terms far below double precision for w >= 1
    return math.sqrt(2 * math.pi) * width


def test_mean_converges_without_negative_hours():
    p = SyntheticPriceParams(days=400, seed=2, neg_prob=0.0)
    x = np.asarray(synth_prices(p).pi_da)
    expected = p.base + (p.morning_amp + p.evening_amp) * _gauss_row_sum(p.peak_width) / 24
    assert abs(x.mean() - expected) <= 3 * p.noise_std / math.sqrt(len(x))


def test_mean_converges_with_negative_hours():
    p = SyntheticPriceParams(days=400, seed=5, neg_prob=0.1, noise_std=0.0)
    x = np.asarray(synth_prices(p).pi_da)
    shape_mean = p.base + (p.morning_amp + p.evening_amp) * _gauss_row_sum(p.peak_width) / 24
    expected = (1 - p.neg_prob) * shape_mean - p.neg_prob * p.neg_amp / 2
    # per-hour variance of the mixture, bounded using the largest shape value
    hi = p.base + p.morning_amp + p.evening_amp
    second = (1 - p.neg_prob) * hi ** 2 + p.neg_prob * p.neg_amp ** 2 / 3
    sd = math.sqrt(second - expected ** 2)
    assert abs(x.mean() - expected) <= 3 * sd / math.sqrt(len(x))


@pytest.mark.parametrize("field,value", [("days", 0), ("noise_std", -1.0), ("neg_prob", 1.5),
                                         ("peak_width", 0.0), ("morning_amp", -2.0)])
def test_invalid_synth_params(field, value):
    with pytest.raises(ConfigError):
        SyntheticPriceParams(**{field: value})


def test_price_series_from_synth_is_utc_hourly():
    s = synth_prices(SyntheticPriceParams(days=1))
    assert isinstance(s, PriceSeries)
    ts = s.timestamps()
    assert (ts[1] - ts[0]).total_seconds() == 3600
