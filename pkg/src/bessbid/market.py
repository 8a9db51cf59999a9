"""Receding-horizon market simulation.

Every hour the optimizer is re-solved from the reported SOC, the first
planned command is applied to the plant, and the hour is settled. Day-ahead
and FCR bids close once a day (``gate_hour``) for the whole next day; the
first solve of a run also fixes the bids of the starting day.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .bidding import (FallbackRequired, MpcInputs, PlanOutputs, block_of,
                      build_mpc_problem, clamp_reported_soc, extract_plan,
                      margin_schedule_fixed, margin_update_adaptive)
from .domain import (HOUR_RECORD_UNITS, BatteryParams, Config, HourRecord,
                     MarginPolicy, MarketParams, PriceSeries, validate_config)
from .milp import SolverError, make_solver
from .plant import BessState, simulate_hour

log = logging.getLogger(__name__)

ENERGY_TOL = 1e-9


class CommitmentError(RuntimeError):
    """Attempt to overwrite a gate-closed bid."""


@dataclass(frozen=True)
class MarketCommitments:
    da: dict[int, float] = field(default_factory=dict)      # hour -> MW (signed)
    fcr: dict[int, float] = field(default_factory=dict)     # block -> MW

    def with_window(self, hours: range, plan: PlanOutputs, mkt: MarketParams) -> "MarketCommitments":
        """Copy the plan's bids for ``hours`` (and their FCR blocks) into a new object."""
        end = plan.t0 + len(plan.p_da)
        if hours.start < plan.t0 or hours.stop > end:
            raise ValueError(f"plan covers hours {plan.t0}..{end - 1}, "
                             f"window needs {hours.start}..{hours.stop - 1}")
        da = dict(self.da)
        fcr = dict(self.fcr)
        for h in hours:
            if h in da:
                raise CommitmentError(f"day-ahead bid for hour {h} already committed")
            da[h] = float(plan.p_da[h - plan.t0])
        for blk in sorted({block_of(h, mkt) for h in hours}):
            if blk in fcr:
                raise CommitmentError(f"FCR bid for block {blk} already committed")
            fcr[blk] = max(0.0, float(plan.fcr_bid[blk]))
        return MarketCommitments(da, fcr)

    def fcr_at_hour(self, hour: int, mkt: MarketParams) -> float:
        return self.fcr.get(block_of(hour, mkt), 0.0)


def next_day_window(clock: int) -> range:
    day = clock // 24
    return range(24 * (day + 1), 24 * (day + 2))


def gate_closure_update(commitments: MarketCommitments, clock: int, plan: PlanOutputs,
                        mkt: MarketParams, gate_hour: int = 12) -> MarketCommitments:
    """At the daily gate, freeze the plan's bids for the next delivery day."""
    if clock % 24 != gate_hour:
        return commitments
    return commitments.with_window(next_day_window(clock), plan, mkt)


def settle_imbalance(p_sched: float, p_true: float, pi_da: float, mkt: MarketParams,
                     dt: float = 1.0) -> float:
    """Dual-price settlement of ``p_true - p_sched`` (EUR, positive = income)."""
    p_imb = p_true - p_sched
    if p_imb > 0:
        price = pi_da - mkt.imb_adder * abs(pi_da)
    elif p_imb < 0:
        price = pi_da + mkt.imb_adder * abs(pi_da)
    else:
        return 0.0
    return price * p_imb * dt


@dataclass(frozen=True)
class Compliance:
    compliant: bool
    shortfall: float          # MWh
    power_violation: bool

    def __iter__(self):
        return iter((self.compliant, self.shortfall))


def evaluate_fcr_compliance(s_true, p_fcr: float, p_true: float, battery: BatteryParams,
                            mkt: MarketParams) -> Compliance:
    """Check a worst-case FCR activation against the true SOC.

    ``s_true`` is one SOC or the (begin, end) pair of the interval; every
    given point is checked. Shortfall is the worst energy deficit in MWh.
    """
    points = (s_true,) if np.isscalar(s_true) else tuple(s_true)
    need = mkt.dt_fcr * p_fcr
    shortfall = 0.0
    for s in points:
        avail_dis = (s - battery.s_min) * battery.C * battery.eta_dis
        avail_ch = (battery.s_max - s) * battery.C / battery.eta_ch
        shortfall = max(shortfall, need - avail_dis, need - avail_ch)
    energy_ok = shortfall <= ENERGY_TOL
    power_ok = abs(p_true) <= battery.P_max - p_fcr + ENERGY_TOL
    return Compliance(energy_ok and power_ok, max(shortfall, 0.0) if not energy_ok else 0.0,
                      not power_ok)


@dataclass
class SimulationLog:
    records: list[HourRecord]
    config: Config
    seed: int | None
    commitments: MarketCommitments | None = None

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path: str | Path | None = None) -> str:
        names = [f.name for f in dataclasses.fields(HourRecord)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"{n} [{HOUR_RECORD_UNITS[n]}]" for n in names])
        for r in self.records:
            w.writerow([_fmt(getattr(r, n)) for n in names])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config.to_dict(),
            "records": [dataclasses.asdict(r) for r in self.records],
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationLog":
        return cls([HourRecord(**r) for r in data["records"]],
                   Config.from_dict(data["config"]), data["seed"])


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class _PolicyState:
    """Plant-side margin state for the adaptive and uncertainty-aware policies."""

    margin: float = 0.0

    def applied(self, pol: MarginPolicy) -> float:
        if pol.kind == "none":
            return 0.0
        if pol.kind == "fixed":
            return pol.m_fixed
        return self.margin


def make_mpc_inputs(t: int, s_rep: float, commitments: MarketCommitments,
                    policy_margin: float, prices: np.ndarray, cfg: Config) -> MpcInputs:
    """Assemble the optimizer view. Takes the reported SOC only; no plant state."""
    T = cfg.simulation.horizon
    pol, mkt = cfg.policy, cfg.market
    hours = range(t, t + T)
    s0, clamped = clamp_reported_soc(s_rep, policy_margin, cfg.battery)
    blocks = tuple(sorted({block_of(h, mkt) for h in hours}))
    if pol.kind == "fixed":
        margin = tuple(margin_schedule_fixed(pol, T).tolist())
    elif pol.kind == "adaptive":
        margin = (policy_margin,) * T
    elif pol.kind == "none":
        margin = (0.0,) * T
    else:
        margin = ()
    return MpcInputs(
        t0=t,
        horizon=T,
        s_rep_0=s0,
        pi_da=tuple(float(p) for p in prices[t:t + T]),
        pi_fcr=mkt.pi_fcr,
        da_committed=tuple(commitments.da.get(h) for h in hours),
        fcr_blocks=blocks,
        fcr_committed=tuple(commitments.fcr.get(b) for b in blocks),
        margin=margin,
        delta0=policy_margin if pol.kind == "uncertainty_aware" else 0.0,
        kind=pol.kind,
        soc_clamped=clamped,
    )


def run_receding_horizon(cfg: Config, prices: PriceSeries, pol: MarginPolicy | None = None,
                         seed: int | None = 0, *, n_hours: int | None = None,
                         solver=None,
                         observer: Callable[[MpcInputs], None] | None = None,
                         ) -> SimulationLog:
    """Closed-loop simulation of ``n_hours`` (default ``days * 24``).

    ``observer`` receives every :class:`MpcInputs` before it is solved.
    """
    if pol is not None:
        cfg = cfg.replace(policy=pol)
    cfg = validate_config(cfg)
    bat, err, mkt, pol, sim = cfg.battery, cfg.soc_error, cfg.market, cfg.policy, cfg.simulation
    if n_hours is None:
        n_hours = sim.days * 24
    T = sim.horizon
    if len(prices) < n_hours + T:
        raise ValueError(f"price series has {len(prices)} hours; run needs "
                         f"{n_hours} + horizon {T} = {n_hours + T}")
    min_horizon = (24 - sim.gate_hour) + 24
    if T < min_horizon:
        raise ValueError(f"horizon {T} h cannot reach the next delivery day "
                         f"from the gate at hour {sim.gate_hour} (needs >= {min_horizon})")
    if solver is None:
        solver = make_solver(sim.solver, sim.time_limit, sim.mip_rel_gap)

    pi = np.asarray(prices.pi_da, dtype=float)
    state = BessState.initial(bat, err, seed)
    commitments = MarketCommitments()
    ps = _PolicyState(margin=0.0)
    records: list[HourRecord] = []

    for t in range(n_hours):
        margin = ps.applied(pol)
        s_rep = state.s_rep
        inputs = make_mpc_inputs(t, s_rep, commitments, margin, pi, cfg)
        if observer is not None:
            observer(inputs)

        plan = None
        status = "optimal"
        try:
            model = build_mpc_problem(inputs, bat, mkt, pol, err)
            sol = solver.solve_milp(model)
            status = sol.status
            plan = extract_plan(sol, model)
        except (FallbackRequired, SolverError) as exc:
            log.warning("hour %d: MPC fallback (%s)", t, exc)
            status = getattr(exc, "status", "error")

        if t == 0:
            window = range(0, 24 * (1 + int(t % 24 >= sim.gate_hour)))
            commitments = _commit(commitments, window, plan, inputs, mkt)
        if t % 24 == sim.gate_hour:
            commitments = _commit(commitments, next_day_window(t), plan, inputs, mkt)

        p_cmd = plan.p_cmd if plan is not None else 0.0
        p_da = commitments.da.get(t, 0.0)
        p_fcr = commitments.fcr_at_hour(t, mkt)
        extra = mkt.zeta * p_fcr if sim.fcr_error_drive else 0.0
        state, step = simulate_hour(state, p_cmd, bat, err, extra_throughput=extra)

        p_true = step.realized.p_true
        comp = evaluate_fcr_compliance((step.s_true_begin, step.s_true_end), p_fcr, p_true,
                                       bat, mkt)
        records.append(HourRecord(
            t=t,
            pi_da=float(pi[t]),
            p_da_bid=p_da,
            p_fcr_bid=p_fcr,
            p_fcr_delivered=float(plan.p_fcr_delivered[0]) if plan is not None else 0.0,
            p_cmd=p_cmd,
            p_true=p_true,
            p_true_ch=step.realized.p_true_ch,
            p_true_dis=step.realized.p_true_dis,
            p_imb_true=p_true - p_da,
            s_true_begin=step.s_true_begin,
            s_true_end=step.s_true_end,
            s_rep=s_rep,
            w=step.w_begin,
            w_end=step.w_end,
            margin_m=margin,
            r_dam=bat.dt * pi[t] * p_da,
            r_fcr=bat.dt * mkt.pi_fcr * p_fcr,
            c_imb=settle_imbalance(p_da, p_true, pi[t], mkt, bat.dt),
            c_deg=bat.dt * mkt.c_deg * step.realized.p_true_dis,
            compliant=comp.compliant,
            shortfall=comp.shortfall,
            power_violation=comp.power_violation,
            soc_clamped=inputs.soc_clamped,
            solver_status=status,
        ))

        if pol.kind in ("adaptive", "uncertainty_aware"):
            ps.margin = margin_update_adaptive(ps.margin, s_rep, pol, err)

    return SimulationLog(records, cfg, seed, commitments)


def _commit(commitments: MarketCommitments, window: range, plan: PlanOutputs | None,
            inputs: MpcInputs, mkt: MarketParams) -> MarketCommitments:
    if plan is None:
        # no plan at a gate: bid nothing for the window
        blocks = sorted({block_of(h, mkt) for h in window})
        plan = PlanOutputs(0.0, np.zeros(inputs.horizon), {b: 0.0 for b in blocks},
                           np.zeros(inputs.horizon), np.zeros(inputs.horizon + 1),
                           np.zeros(inputs.horizon), math.nan, "fallback", t0=inputs.t0)
    return commitments.with_window(window, plan, mkt)
