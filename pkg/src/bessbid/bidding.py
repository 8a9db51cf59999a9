"""Hourly MPC bidding problem with SOC constraint tightening.

One solve plans ``T`` hours of charge/discharge, day-ahead bids, FCR block
bids and the SOC trajectory, starting from the *reported* SOC. The SOC band
that keeps a worst-case FCR activation deliverable is shrunk by a margin
chosen by the policy:

* ``none``: no margin.
* ``fixed``: constant ``m``.
* ``adaptive``: a plant-side margin recalibrated each hour from the realized
  reported SOC, held constant over the horizon.
* ``uncertainty_aware``: the margin is a planned trajectory ``delta_t`` that
  grows in the flat SOC region and decays outside it, so the optimizer can
  choose to visit high/low SOC to shrink it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import BatteryParams, MarginPolicy, MarketParams, SocErrorParams
from .milp import MilpSolution, ModelIR


class FallbackRequired(RuntimeError):
    """The MPC produced no usable plan; the caller must apply its fallback."""

    def __init__(self, status: str):
        super().__init__(f"MPC solve returned status {status!r}")
        self.status = status


@dataclass(frozen=True)
class MpcInputs:
    """Everything the optimizer is allowed to see for one solve.

    There is deliberately no true-SOC field: the plant reaches the optimizer
    only through ``s_rep_0``.
    """

    t0: int
    horizon: int
    s_rep_0: float
    pi_da: tuple[float, ...]
    pi_fcr: float
    da_committed: tuple[float | None, ...]
    fcr_blocks: tuple[int, ...]
    fcr_committed: tuple[float | None, ...]
    margin: tuple[float, ...]
    delta0: float = 0.0
    kind: str = "none"
    soc_clamped: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.pi_da) != self.horizon or len(self.da_committed) != self.horizon:
            raise ValueError("price / commitment length does not match horizon")
        if len(self.fcr_blocks) != len(self.fcr_committed):
            raise ValueError("fcr_blocks and fcr_committed differ in length")
        if self.kind != "uncertainty_aware" and len(self.margin) != self.horizon:
            raise ValueError("margin schedule length does not match horizon")


@dataclass
class PlanOutputs:
    p_cmd: float
    p_da: np.ndarray
    fcr_bid: dict[int, float]
    p_fcr_delivered: np.ndarray
    s: np.ndarray
    delta: np.ndarray
    objective: float
    status: str
    gap: float = 0.0
    t0: int = 0


@dataclass
class BiddingVars:
    p_ch: list[int] = field(default_factory=list)
    p_dis: list[int] = field(default_factory=list)
    p_da: list[int] = field(default_factory=list)
    imb_pos: list[int] = field(default_factory=list)
    imb_neg: list[int] = field(default_factory=list)
    p_fcr: list[int] = field(default_factory=list)
    short: dict[int, int] = field(default_factory=dict)
    s: list[int] = field(default_factory=list)
    fcr_bid: dict[int, int] = field(default_factory=dict)
    z: dict[int, int] = field(default_factory=dict)
    delta: list[int] = field(default_factory=list)
    u: list[int] = field(default_factory=list)
    v: list[int] = field(default_factory=list)


def fcr_soc_limits(p_fcr: float, battery: BatteryParams, mkt: MarketParams) -> tuple[float, float]:
    """Effective (lower, upper) SOC limits that keep a full FCR activation deliverable."""
    lo = battery.s_min + mkt.dt_fcr / (battery.eta_dis * battery.C) * p_fcr
    hi = battery.s_max - battery.eta_ch * mkt.dt_fcr / battery.C * p_fcr
    return lo, hi


def block_of(hour: int, mkt: MarketParams) -> int:
    return hour // mkt.fcr_block_len


def margin_schedule_fixed(pol: MarginPolicy, horizon: int) -> np.ndarray:
    return np.full(horizon, pol.m_fixed, dtype=float)


def margin_update_adaptive(m_prev: float, s_prev: float, pol: MarginPolicy,
                           err: SocErrorParams) -> float:
    """Grow by ``w_bar`` after an hour in the flat region, else decay by ``gamma``."""
    if err.b < s_prev < err.c:
        m = m_prev + pol.w_bar
    else:
        m = pol.gamma * m_prev
    return min(max(m, 0.0), pol.delta_max)


def clamp_reported_soc(s_rep: float, margin0: float, battery: BatteryParams) -> tuple[float, bool]:
    lo, hi = battery.s_min + margin0, battery.s_max - margin0
    s = min(max(s_rep, lo), hi)
    return s, s != s_rep


def build_mpc_problem(inp: MpcInputs, battery: BatteryParams, mkt: MarketParams,
                      pol: MarginPolicy, err: SocErrorParams | None = None,
                      exclusive_all_steps: bool = False) -> ModelIR:
    """Emit the MPC as a ``ModelIR`` (maximize net profit).

    Charge/discharge exclusivity binaries are only placed on negative-price
    hours unless ``exclusive_all_steps``: elsewhere round-trip losses and the
    degradation cost already make simultaneous operation unprofitable.
    Handles are stored in ``model.meta["vars"]`` as :class:`BiddingVars`.
    """
    T = inp.horizon
    P, C, dt = battery.P_max, battery.C, battery.dt
    k_hi = battery.eta_ch * mkt.dt_fcr / C
    k_lo = mkt.dt_fcr / (battery.eta_dis * C)
    ua = inp.kind == "uncertainty_aware"
    if ua and err is None:
        raise ValueError("uncertainty-aware encoding needs SocErrorParams")

    model = ModelIR(f"mpc_t{inp.t0}")
    V = BiddingVars()
    obj: dict[int, float] = {}

    def add_obj(h: int, coef: float) -> None:
        obj[h] = obj.get(h, 0.0) + coef

    committed_blocks = {}
    for blk, val in zip(inp.fcr_blocks, inp.fcr_committed):
        lo, hi = (val, val) if val is not None else (0.0, P)
        V.fcr_bid[blk] = model.add_variable(f"fcr_bid[{blk}]", lo, hi)
        if val is not None:
            committed_blocks[blk] = val

    for t in range(T + 1):
        V.s.append(model.add_variable(f"s[{t}]", battery.s_min, battery.s_max))
    model.fix(V.s[0], inp.s_rep_0)

    for t in range(T):
        hour = inp.t0 + t
        blk = block_of(hour, mkt)
        price = inp.pi_da[t]
        p_ch = model.add_variable(f"p_ch[{t}]", 0.0, P)
        p_dis = model.add_variable(f"p_dis[{t}]", 0.0, P)
        da = inp.da_committed[t]
        p_da = model.add_variable(f"p_da[{t}]", *((da, da) if da is not None else (-P, P)))
        ip = model.add_variable(f"imb_pos[{t}]", 0.0, 2 * P)
        ineg = model.add_variable(f"imb_neg[{t}]", 0.0, 2 * P)
        p_fcr = model.add_variable(f"p_fcr[{t}]", 0.0, P)
        V.p_ch.append(p_ch)
        V.p_dis.append(p_dis)
        V.p_da.append(p_da)
        V.imb_pos.append(ip)
        V.imb_neg.append(ineg)
        V.p_fcr.append(p_fcr)
        bid = V.fcr_bid[blk]

        # SOC recursion
        model.add_constraint({V.s[t + 1]: 1.0, V.s[t]: -1.0,
                              p_ch: -dt / C * battery.eta_ch,
                              p_dis: dt / C / battery.eta_dis}, "==", 0.0)
        # market coupling: net output = DA schedule + imbalance
        model.add_constraint({p_dis: 1.0, p_ch: -1.0, p_da: -1.0, ip: -1.0, ineg: 1.0},
                             "==", 0.0)
        # power headroom for full FCR activation
        model.add_constraint({p_ch: 1.0, p_fcr: 1.0}, "<=", P)
        model.add_constraint({p_dis: 1.0, p_fcr: 1.0}, "<=", P)

        # delivered FCR vs bid; only committed blocks may fall short
        if blk in committed_blocks:
            sh = model.add_variable(f"short[{t}]", 0.0, P)
            V.short[t] = sh
            model.add_constraint({p_fcr: 1.0, sh: 1.0, bid: -1.0}, "==", 0.0)
            add_obj(sh, -dt * mkt.c_fcr)
        else:
            model.add_constraint({p_fcr: 1.0, bid: -1.0}, "==", 0.0)

        # energy buffers, tightened by the margin, at both ends of the step
        if ua:
            if t == 0:
                d = model.add_variable("delta[0]", inp.delta0, inp.delta0)
            else:
                # the exact recursion never exceeds delta0 + t * w_bar
                cap = min(inp.delta0 + t * pol.w_bar, 0.5 * (battery.s_max - battery.s_min))
                d = model.add_variable(f"delta[{t}]", 0.0, cap)
            V.delta.append(d)
            for s_h in (V.s[t], V.s[t + 1]):
                model.add_constraint({s_h: 1.0, p_fcr: k_hi, d: 1.0}, "<=", battery.s_max)
                model.add_constraint({s_h: 1.0, p_fcr: -k_lo, d: -1.0}, ">=", battery.s_min)
        else:
            m_t = inp.margin[t]
            for s_h in (V.s[t], V.s[t + 1]):
                model.add_constraint({s_h: 1.0, p_fcr: k_hi}, "<=", battery.s_max - m_t)
                model.add_constraint({s_h: 1.0, p_fcr: -k_lo}, ">=", battery.s_min + m_t)

        # charge/discharge exclusivity only where the LP could exploit it
        if price < 0 or exclusive_all_steps:
            z = model.add_variable(f"z[{t}]", 0.0, 1.0, integral=True)
            V.z[t] = z
            model.add_constraint({p_ch: 1.0, z: -P}, "<=", 0.0)
            model.add_constraint({p_dis: 1.0, z: P}, "<=", P)

        add_obj(p_da, dt * price)
        add_obj(bid, dt * inp.pi_fcr)
        add_obj(p_dis, -dt * mkt.c_deg)
        add_obj(p_fcr, -dt * mkt.c_deg * mkt.zeta)
        add_obj(ip, -dt * mkt.c_imb)
        add_obj(ineg, -dt * mkt.c_imb)

    model.meta["vars"] = V
    model.meta["inputs"] = inp
    if ua:
        encode_uncertainty_aware(model, V.s, V.delta, pol, err, battery, inp.t0)
    model.set_objective(obj, "max")
    return model


def encode_uncertainty_aware(model: ModelIR, s: list[int], delta: list[int],
                             pol: MarginPolicy, err: SocErrorParams,
                             battery: BatteryParams, t0: int = 0) -> None:
    """Add the tube-scaling recursion as regime binaries plus epigraph lower bounds.

    ``u`` may be 1 only if the SOC is ``<= b``, ``v`` only if it is ``>= c``,
    for every hour sharing that regime group. Past ``pol.regime_window``
    hours the tube just grows by ``w_bar``. ``delta`` only tightens
    constraints, so lower bounds suffice: at an optimum with an active SOC
    bound it sits on ``max(gamma * delta_t, delta_t + w_bar * [flat region])``.
    """
    V = model.meta.get("vars")
    b, c = err.b, err.c
    s_lo, s_hi = battery.s_min, battery.s_max
    g = pol.regime_group
    regime: dict[int, tuple[int, int]] = {}
    window = pol.regime_window or len(delta)
    for t in range(len(delta) - 1):
        if t >= window:
            # beyond the window no decay is claimed: pure growth is an upper envelope
            model.add_constraint({delta[t + 1]: 1.0, delta[t]: -1.0}, ">=", pol.w_bar)
            continue
        key = (t0 + t) // g
        if key not in regime:
            u = model.add_variable(f"u[{key}]", 0.0, 1.0, integral=True)
            v = model.add_variable(f"v[{key}]", 0.0, 1.0, integral=True)
            model.add_constraint({u: 1.0, v: 1.0}, "<=", 1.0)
            regime[key] = (u, v)
            if V is not None:
                V.u.append(u)
                V.v.append(v)
        u, v = regime[key]
        model.add_constraint({s[t]: 1.0, u: s_hi - b}, "<=", s_hi)
        model.add_constraint({s[t]: 1.0, v: -(c - s_lo)}, ">=", s_lo)
        # off the flat region the growth row only has to fall below gamma * delta_t
        big_m = (1.0 - pol.gamma) * model.variables[delta[t]].ub + pol.w_bar
        model.add_constraint({delta[t + 1]: 1.0, delta[t]: -pol.gamma}, ">=", 0.0)
        model.add_constraint({delta[t + 1]: 1.0, delta[t]: -1.0, u: big_m, v: big_m},
                             ">=", pol.w_bar)


def extract_plan(solution: MilpSolution, model: ModelIR) -> PlanOutputs:
    if not solution.has_solution:
        raise FallbackRequired(solution.status)
    V: BiddingVars = model.meta["vars"]
    inp: MpcInputs = model.meta["inputs"]
    x = solution.x
    p_ch = x[V.p_ch]
    p_dis = x[V.p_dis]
    if V.delta:
        delta = x[V.delta]
    else:
        delta = np.asarray(inp.margin, dtype=float)
    return PlanOutputs(
        p_cmd=float(p_dis[0] - p_ch[0]),
        p_da=x[V.p_da].copy(),
        fcr_bid={blk: float(x[h]) for blk, h in V.fcr_bid.items()},
        p_fcr_delivered=x[V.p_fcr].copy(),
        s=x[V.s].copy(),
        delta=np.asarray(delta, dtype=float),
        objective=solution.objective,
        status=solution.status,
        gap=solution.gap,
        t0=inp.t0,
    )
