"""Evaluation metrics over a simulation log and parameter sweeps."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .domain import Config, MarginPolicy, MarketParams, PriceSeries
from .market import SimulationLog, run_receding_horizon, settle_imbalance

log = logging.getLogger(__name__)

WORKERS_ENV = "BESSBID_WORKERS"


@dataclass(frozen=True)
class RevenueBreakdown:
    """Money in EUR (imbalance settlement signed, degradation a positive cost)."""

    R_total: float
    R_dam: float
    R_fcr: float
    C_imb: float
    C_deg: float
    shortfall_energy: float
    shortfall_hours_pct: float
    mean_margin: float

    @classmethod
    def from_parts(cls, R_dam: float, R_fcr: float, C_imb: float, C_deg: float,
                   shortfall_energy: float = 0.0, shortfall_hours_pct: float = 0.0,
                   mean_margin: float = 0.0) -> "RevenueBreakdown":
        return cls(revenue_total(R_dam, R_fcr, C_imb, C_deg), R_dam, R_fcr, C_imb, C_deg,
                   shortfall_energy, shortfall_hours_pct, mean_margin)

    @property
    def compliance_pct(self) -> float:
        return 100.0 - self.shortfall_hours_pct


REPORT_FIELDS = tuple(f.name for f in dataclasses.fields(RevenueBreakdown))


def revenue_total(R_dam: float, R_fcr: float, C_imb: float, C_deg: float) -> float:
    # one fixed association order; every total in the package goes through here
    return ((R_dam + R_fcr) + C_imb) - C_deg


def _fsum(values: Iterable[float]) -> float:
    acc = 0.0
    for v in values:
        acc += float(v)
    return acc


def compute_revenue(log_: SimulationLog, mkt: MarketParams | None = None) -> RevenueBreakdown:
    """Recompute every term from the logged schedules and realized powers."""
    if mkt is None:
        mkt = log_.config.market
    dt = log_.config.battery.dt
    recs = log_.records
    if not recs:
        return RevenueBreakdown.from_parts(0.0, 0.0, 0.0, 0.0)
    R_dam = _fsum(dt * r.pi_da * r.p_da_bid for r in recs)
    R_fcr = _fsum(dt * mkt.pi_fcr * r.p_fcr_bid for r in recs)
    C_imb = _fsum(settle_imbalance(r.p_da_bid, r.p_true, r.pi_da, mkt, dt) for r in recs)
    C_deg = _fsum(dt * mkt.c_deg * r.p_true_dis for r in recs)
    n_bad = sum(1 for r in recs if not r.compliant)
    return RevenueBreakdown.from_parts(
        R_dam, R_fcr, C_imb, C_deg,
        shortfall_energy=_fsum(r.shortfall for r in recs),
        shortfall_hours_pct=100.0 * n_bad / len(recs),
        mean_margin=_mean_around_first([r.margin_m for r in recs]),
    )


def _mean_around_first(values: Sequence[float]) -> float:
    # offsets from the first value keep a constant schedule exact
    m0 = float(values[0])
    return m0 + math.fsum(v - m0 for v in values) / len(values)


def average_breakdowns(items: Sequence[RevenueBreakdown]) -> RevenueBreakdown:
    """Arithmetic mean per field; the total is rebuilt from the averaged terms."""
    if not items:
        nan = math.nan
        return RevenueBreakdown(nan, nan, nan, nan, nan, nan, nan, nan)
    n = len(items)
    mean = {f: _fsum(getattr(b, f) for b in items) / n for f in REPORT_FIELDS}
    return RevenueBreakdown.from_parts(mean["R_dam"], mean["R_fcr"], mean["C_imb"],
                                       mean["C_deg"], mean["shortfall_energy"],
                                       mean["shortfall_hours_pct"], mean["mean_margin"])


# -- sweeps ---------------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma list; raises ValueError."""
    text = text.strip()
    if not text:
        raise ValueError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} is not start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if not all(map(math.isfinite, (start, stop, step))) or step <= 0:
            raise ValueError(f"grid {text!r}: step must be positive and finite")
        if stop < start:
            raise ValueError(f"grid {text!r}: stop below start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        # index-based points avoid accumulated drift; rounding strips float dust
        return [round(start + i * step, 12) for i in range(n)]
    values = [float(p) for p in text.split(",") if p.strip()]
    if not values:
        raise ValueError("empty grid")
    return values


def policy_for(kind: str, value: float, base: MarginPolicy | None = None) -> MarginPolicy:
    """Policy of ``kind`` with its swept knob set to ``value``."""
    base = base or MarginPolicy()
    if kind == "none":
        return dataclasses.replace(base, kind="none", m_fixed=0.0)
    if kind == "fixed":
        return dataclasses.replace(base, kind="fixed", m_fixed=value)
    if kind in ("adaptive", "uncertainty_aware"):
        return dataclasses.replace(base, kind=kind, w_bar=value)
    raise ValueError(f"unknown policy kind {kind!r}")


@dataclass(frozen=True)
class SweepPoint:
    kind: str
    parameter: float
    breakdown: RevenueBreakdown
    n_seeds: int
    per_seed: tuple = ()            # ((seed, RevenueBreakdown), ...)
    errors: tuple = ()              # ((seed, message), ...)


@dataclass
class SweepResult:
    points: list[SweepPoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def select(self, kind: str) -> list[SweepPoint]:
        return [p for p in self.points if p.kind == kind]


def _run_point(args) -> tuple:
    cfg, prices, kind, value, seed = args
    try:
        pol = policy_for(kind, value, cfg.policy)
        lg = run_receding_horizon(cfg, prices, pol, seed=seed)
        return kind, value, seed, compute_revenue(lg, cfg.market), None
    except Exception as exc:              # isolate failures per point
        return kind, value, seed, None, f"{type(exc).__name__}: {exc}"


def sweep(config: Config, prices: PriceSeries,
          policies: dict[str, Sequence[float]] | Sequence[tuple[str, Sequence[float]]],
          seeds: Sequence[int], workers: int | None = None) -> SweepResult:
    """Run every (kind, value, seed) and average over seeds.

    ``policies`` maps a policy kind to its grid. Points come back in request
    order regardless of which worker finished first. ``workers`` defaults to
    the ``BESSBID_WORKERS`` environment variable, else 1 (in-process).
    """
    items = list(policies.items()) if isinstance(policies, dict) else list(policies)
    if not items:
        raise ValueError("no policies to sweep")
    for kind, grid in items:
        if len(grid) == 0:
            raise ValueError(f"empty grid for {kind}")
    seeds = list(seeds)
    if not seeds:
        raise ValueError("no seeds")
    jobs = [(config, prices, kind, float(v), s) for kind, grid in items for v in grid
            for s in seeds]
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outputs = list(ex.map(_run_point, jobs))
    else:
        outputs = [_run_point(j) for j in jobs]
    by_key = {(k, v, s): (b, e) for k, v, s, b, e in outputs}

    result = SweepResult()
    for kind, grid in items:
        for v in grid:
            v = float(v)
            per_seed, errors = [], []
            for s in seeds:
                b, e = by_key[(kind, v, s)]
                if e is None:
                    per_seed.append((s, b))
                else:
                    log.error("sweep point %s=%g seed %s failed: %s", kind, v, s, e)
                    errors.append((s, e))
            avg = average_breakdowns([b for _, b in per_seed])
            result.points.append(SweepPoint(kind, v, avg, len(per_seed), tuple(per_seed),
                                            tuple(errors)))
    return result


def best_compliant(points: Iterable[SweepPoint], min_compliance_pct: float) -> SweepPoint | None:
    """Highest-revenue point meeting the compliance target (ties: smaller parameter)."""
    ok = [p for p in points if p.n_seeds and p.breakdown.compliance_pct >= min_compliance_pct]
    if not ok:
        return None
    return max(ok, key=lambda p: (p.breakdown.R_total, -p.parameter))


# -- reports --------------------------------------------------------------

REPORT_COLUMNS = ("policy", "parameter", "n_seeds") + REPORT_FIELDS


def _report_rows(results: SweepResult | Iterable[SweepPoint], per_seed: bool = False):
    for p in results:
        if per_seed:
            for seed, b in p.per_seed:
                yield {"policy": p.kind, "parameter": p.parameter, "seed": seed,
                       "n_seeds": 1, **dataclasses.asdict(b)}
        else:
            yield {"policy": p.kind, "parameter": p.parameter, "n_seeds": p.n_seeds,
                   **dataclasses.asdict(p.breakdown)}


def format_report(results, fmt: str = "csv", per_seed: bool = False) -> str:
    """Render sweep results; identical inputs give identical bytes."""
    cols = REPORT_COLUMNS if not per_seed else ("policy", "parameter", "seed") + REPORT_COLUMNS[2:]
    rows = list(_report_rows(results, per_seed))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r[c]) for c in cols])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([{c: r[c] for c in cols} for r in rows], indent=1) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(results, fmt: str, path: str | Path, per_seed: bool = False) -> None:
    Path(path).write_text(format_report(results, fmt, per_seed))


def read_report_csv(path_or_text: str | Path) -> list[dict]:
    """Parse a CSV report back into typed rows (used for round-trip checks)."""
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str)
                                          and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    rows = []
    for raw in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in raw.items():
            if k == "policy":
                row[k] = v
            elif k in ("n_seeds", "seed"):
                row[k] = int(v)
            else:
                row[k] = float(v)
        rows.append(row)
    return rows


def summarize(log_: SimulationLog) -> dict:
    """Breakdown plus run metadata, JSON-ready."""
    b = compute_revenue(log_)
    w = log_.column("w") if log_.records else np.zeros(0)
    m = log_.column("margin_m") if log_.records else np.zeros(0)
    coverage = float(np.mean(np.abs(w) <= m + 1e-12)) if len(w) else math.nan
    return {
        "policy": log_.config.policy.kind,
        "parameter": log_.config.policy.parameter,
        "seed": log_.seed,
        "hours": len(log_),
        **dataclasses.asdict(b),
        "margin_coverage": coverage,
        "config": log_.config.to_dict(),
    }
