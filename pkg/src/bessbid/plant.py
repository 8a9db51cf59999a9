"""Ground-truth battery plant: true SOC dynamics and the SOC estimation error.

The error process is decision dependent. In the flat part of the LFP voltage
curve (``b < s < c``) the error integrates throughput noise; near the ends
of the SOC range the scaling factor contracts it towards zero, which is how
a BMS recalibrates.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .domain import BatteryParams, SocErrorParams


@dataclass(frozen=True)
class RealizedDispatch:
    p_true_ch: float
    p_true_dis: float

    @property
    def p_true(self) -> float:
        return self.p_true_dis - self.p_true_ch


@dataclass(frozen=True)
class BessState:
    s_true: float
    w: float
    t: int
    rng: np.random.Generator

    @classmethod
    def initial(cls, battery: BatteryParams, err: SocErrorParams, seed) -> "BessState":
        return cls(s_true=battery.s_init, w=err.w_init, t=0,
                   rng=np.random.default_rng(seed))

    @property
    def s_rep(self) -> float:
        return reported_soc(self)


def scaling_factor(s: float, err: SocErrorParams) -> float:
    """Piecewise-linear error gain a(s): ramps 0 -> 1 on [0, b], 1 on (b, c], 1 -> 0 on (c, 1]."""
    b, c = err.b, err.c
    if s <= b:
        return s / b
    if s <= c:
        return 1.0
    return 1.0 - (s - c) / (1.0 - c)


def step_error(w: float, s_true: float, p_true: float, eta_sample: float,
               err: SocErrorParams, P_max: float) -> float:
    """Advance the estimation error by one step.

    ``p_true`` is the absolute throughput seen by the BMS in MW; it is
    normalised by ``P_max`` so that ``beta`` reads as error per full-power hour.
    """
    a = scaling_factor(s_true, err)
    w_next = a * (w + abs(p_true) / P_max * eta_sample)
    return min(max(w_next, -err.w_max), err.w_max)


def step_true_soc(s_true: float, p_cmd: float,
                  battery: BatteryParams) -> tuple[float, RealizedDispatch]:
    """Apply a signed command (positive = discharge) and clip to the SOC limits."""
    dt, C = battery.dt, battery.C
    p = min(max(p_cmd, -battery.P_max), battery.P_max)
    if p < 0:
        room = (battery.s_max - s_true) * C / (battery.eta_ch * dt)
        p_ch = min(-p, max(room, 0.0))
        s_next = s_true + dt / C * battery.eta_ch * p_ch
        if p_ch == room:
            s_next = battery.s_max
        return min(s_next, battery.s_max), RealizedDispatch(p_ch, 0.0)
    if p > 0:
        avail = (s_true - battery.s_min) * C * battery.eta_dis / dt
        p_dis = min(p, max(avail, 0.0))
        s_next = s_true - dt / C * p_dis / battery.eta_dis
        if p_dis == avail:
            s_next = battery.s_min
        return max(s_next, battery.s_min), RealizedDispatch(0.0, p_dis)
    return s_true, RealizedDispatch(0.0, 0.0)


def reported_soc(state: BessState) -> float:
    """What the BMS reports. Deliberately unclamped: a drifted estimate can leave [0, 1]."""
    return state.s_true - state.w


@dataclass(frozen=True)
class HourStep:
    s_true_begin: float
    s_true_end: float
    realized: RealizedDispatch
    w_begin: float
    w_end: float
    eta_sample: float


def simulate_hour(state: BessState, p_cmd: float, battery: BatteryParams,
                  err: SocErrorParams, extra_throughput: float = 0.0,
                  eta_sample: float | None = None) -> tuple[BessState, HourStep]:
    """One market interval of the plant.

    ``extra_throughput`` (MW) is energy-neutral current the BMS integrates on
    top of the net dispatch, e.g. FCR activation. ``eta_sample`` overrides the
    random draw; the generator is still advanced so that replays line up.
    The input state is left untouched (its generator is copied).
    """
    s_next, realized = step_true_soc(state.s_true, p_cmd, battery)
    rng = copy.deepcopy(state.rng)
    draw = rng.normal(err.beta, np.sqrt(err.sigma2))
    eta = draw if eta_sample is None else eta_sample
    throughput = abs(realized.p_true) + extra_throughput
    w_next = step_error(state.w, state.s_true, throughput, eta, err, battery.P_max)
    step = HourStep(state.s_true, s_next, realized, state.w, w_next, eta)
    return BessState(s_next, w_next, state.t + 1, rng), step
