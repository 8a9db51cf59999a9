import dataclasses
import json

import numpy as np
import pytest

from bessbid.domain import (Config, HourRecord, MarginPolicy, SimulationSettings,
                            SocErrorParams)
from bessbid.ingest import SyntheticPriceParams, synth_prices
from bessbid.market import SimulationLog, run_receding_horizon
from bessbid.metrics import (REPORT_COLUMNS, REPORT_FIELDS, RevenueBreakdown,
                             average_breakdowns, best_compliant, compute_revenue,
                             emit_report, format_report, parse_grid, policy_for,
                             read_report_csv, summarize, sweep, SweepPoint)

CFG = Config(simulation=SimulationSettings(days=1, horizon=36))
PRICES = synth_prices(SyntheticPriceParams(seed=0, days=3))


def record(t=0, **kw):
    base = dict(t=t, pi_da=0.0, p_da_bid=0.0, p_fcr_bid=0.0, p_fcr_delivered=0.0, p_cmd=0.0,
                p_true=0.0, p_true_ch=0.0, p_true_dis=0.0, p_imb_true=0.0,
                s_true_begin=0.5, s_true_end=0.5, s_rep=0.5, w=0.0, w_end=0.0, margin_m=0.0,
                r_dam=0.0, r_fcr=0.0, c_imb=0.0, c_deg=0.0, compliant=True, shortfall=0.0)
    base.update(kw)
    return HourRecord(**base)


def test_single_hour_hand_example():
    r = record(pi_da=100.0, p_da_bid=5.0, p_fcr_bid=5.0, p_true=5.0, p_true_dis=5.0,
               p_cmd=5.0)
    b = compute_revenue(SimulationLog([r], Config(), 0))
    assert (b.R_dam, b.R_fcr, b.C_imb, b.C_deg) == (500.0, 80.0, 0.0, 182.5)
    assert b.R_total == 397.5


def test_empty_log_is_all_zero():
    b = compute_revenue(SimulationLog([], Config(), 0))
    assert all(getattr(b, f) == 0.0 for f in REPORT_FIELDS)


def test_identity_on_random_records():
    rng = np.random.default_rng(0)
    for _ in range(50):
        recs = []
        for t in range(int(rng.integers(1, 40))):
            p_true = float(rng.uniform(-10, 10))
            recs.append(record(t, pi_da=float(rng.normal(50, 80)),
                               p_da_bid=float(rng.uniform(-10, 10)),
                               p_fcr_bid=float(rng.uniform(0, 10)), p_true=p_true,
                               p_true_dis=max(p_true, 0.0), p_true_ch=max(-p_true, 0.0),
                               compliant=bool(rng.random() < 0.7),
                               shortfall=float(rng.uniform(0, 1)),
                               margin_m=float(rng.uniform(0, 0.2))))
        b = compute_revenue(SimulationLog(recs, Config(), 0))
        assert b.R_total == b.R_dam + b.R_fcr + b.C_imb - b.C_deg
        n_bad = sum(not r.compliant for r in recs)
        assert b.shortfall_hours_pct == 100.0 * n_bad / len(recs)


def test_breakdown_from_parts_identity():
    b = RevenueBreakdown.from_parts(0.1, 0.2, -0.3, 0.7)
    assert b.R_total == 0.1 + 0.2 + -0.3 - 0.7
    assert b.compliance_pct == 100.0


def test_average_rebuilds_total():
    a = RevenueBreakdown.from_parts(10.0, 20.0, -1.0, 3.0, 1.0, 10.0, 0.1)
    b = RevenueBreakdown.from_parts(30.0, 0.0, -3.0, 1.0, 3.0, 30.0, 0.3)
    m = average_breakdowns([a, b])
    assert (m.R_dam, m.R_fcr, m.C_imb, m.C_deg) == (20.0, 10.0, -2.0, 2.0)
    assert m.shortfall_hours_pct == 20.0 and m.mean_margin == pytest.approx(0.2)
    assert m.R_total == m.R_dam + m.R_fcr + m.C_imb - m.C_deg


def test_fixed_policy_mean_margin_is_exact():
    lg = run_receding_horizon(CFG, PRICES, MarginPolicy.fixed(0.07), seed=0)
    assert compute_revenue(lg).mean_margin == 0.07


def test_summary_matches_log_recount():
    lg = run_receding_horizon(CFG, PRICES, MarginPolicy.none(), seed=0)
    s = summarize(lg)
    assert s["hours"] == 24
    assert s["shortfall_hours_pct"] == 100.0 * (~lg.column("compliant")).sum() / 24
    assert s["R_total"] == s["R_dam"] + s["R_fcr"] + s["C_imb"] - s["C_deg"]
    assert s["config"] == CFG.to_dict()
    json.dumps(s)


# -- grids ------------------------------------------------------------------

def test_grid_fixed_has_seven_points():
    assert parse_grid("0:0.18:0.03") == [0.0, 0.03, 0.06, 0.09, 0.12, 0.15, 0.18]


def test_grid_rate_cardinality():
    g = parse_grid("8e-5:18e-4:2e-5")
    assert len(g) == 87
    assert g[0] == 8e-5 and g[-1] == 1.8e-3 and g[5] == 1.8e-4


@pytest.mark.parametrize("bad", ["", "  ", ",", "1:2", "0:1:0", "1:0:0.1", "0:1:-1", "a,b"])
def test_bad_grids(bad):
    with pytest.raises(ValueError):
        parse_grid(bad)


def test_comma_grid():
    assert parse_grid("0.1, 0.2,0.3") == [0.1, 0.2, 0.3]


def test_policy_for():
    assert policy_for("fixed", 0.1).m_fixed == 0.1
    assert policy_for("uncertainty_aware", 2e-4).w_bar == 2e-4
    assert policy_for("none", 5.0).kind == "none"
    with pytest.raises(ValueError):
        policy_for("other", 1.0)


# -- sweeps -----------------------------------------------------------------

def test_single_point_equals_direct_run():
    res = sweep(CFG, PRICES, {"fixed": [0.05]}, [3])
    lg = run_receding_horizon(CFG, PRICES, MarginPolicy.fixed(0.05), seed=3)
    assert len(res) == 1
    assert res.points[0].breakdown == compute_revenue(lg)


def test_seeds_identical_without_noise():
    cfg = dataclasses.replace(CFG, soc_error=SocErrorParams(sigma2=0.0),
                              simulation=dataclasses.replace(CFG.simulation,
                                                             fcr_error_drive=True))
    p = sweep(cfg, PRICES, {"adaptive": [2e-4]}, [0, 1]).points[0]
    (_, a), (_, b) = p.per_seed
    assert a == b == p.breakdown


def test_sweep_order_and_cardinality():
    res = sweep(CFG, PRICES, [("fixed", [0.1, 0.0]), ("none", [0.0])], [0])
    assert [(p.kind, p.parameter) for p in res] == [("fixed", 0.1), ("fixed", 0.0),
                                                   ("none", 0.0)]
    assert [p.kind for p in res.select("fixed")] == ["fixed", "fixed"]


def test_parallel_sweep_matches_serial():
    grid = {"fixed": [0.0, 0.1]}
    a = sweep(CFG, PRICES, grid, [0, 1], workers=1)
    b = sweep(CFG, PRICES, grid, [0, 1], workers=2)
    assert format_report(a) == format_report(b)


def test_point_errors_do_not_abort_sweep():
    # the invalid margin fails validation inside its own run only
    res = sweep(CFG, PRICES, {"fixed": [0.05, 0.9]}, [0])
    good, bad = res.points
    assert good.n_seeds == 1 and not good.errors
    assert bad.n_seeds == 0 and "m_fixed" in bad.errors[0][1]


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        sweep(CFG, PRICES, {"fixed": []}, [0])
    with pytest.raises(ValueError):
        sweep(CFG, PRICES, {"fixed": [0.1]}, [])


def pt(kind, v, R, short_pct):
    return SweepPoint(kind, v, RevenueBreakdown.from_parts(R, 0.0, 0.0, 0.0, 0.0, short_pct,
                                                           v), 1)


def test_best_compliant():
    pts = [pt("fixed", 0.0, 100.0, 50.0), pt("fixed", 0.03, 90.0, 3.0),
           pt("fixed", 0.06, 90.0, 0.0), pt("fixed", 0.09, 80.0, 0.0)]
    assert best_compliant(pts, 96.0).parameter == 0.03
    assert best_compliant(pts[:1], 96.0) is None


# -- reports ----------------------------------------------------------------

def test_report_rows_and_byte_stability(tmp_path):
    res = sweep(CFG, PRICES, {"fixed": parse_grid("0:0.18:0.03")}, [0])
    text = format_report(res)
    lines = text.splitlines()
    assert len(lines) == 8
    assert tuple(lines[0].split(",")) == REPORT_COLUMNS
    assert format_report(res) == text
    emit_report(res, "csv", tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == text
    for row in read_report_csv(tmp_path / "r.csv"):
        assert row["R_total"] == row["R_dam"] + row["R_fcr"] + row["C_imb"] - row["C_deg"]


def test_json_and_csv_agree(tmp_path):
    res = sweep(CFG, PRICES, {"fixed": [0.0, 0.06]}, [0, 1])
    csv_rows = read_report_csv(format_report(res, "csv"))
    json_rows = json.loads(format_report(res, "json"))
    assert csv_rows == json_rows


def test_per_seed_report():
    res = sweep(CFG, PRICES, {"fixed": [0.0]}, [0, 1])
    rows = read_report_csv(format_report(res, per_seed=True))
    assert [r["seed"] for r in rows] == [0, 1]


def test_empty_results_header_only(tmp_path):
    emit_report([], "csv", tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(REPORT_COLUMNS) + "\n"
    assert json.loads(format_report([], "json")) == []


def test_unknown_format():
    with pytest.raises(ValueError):
        format_report([], "xml")
