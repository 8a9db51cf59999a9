"""Shared domain types, parameter validation and config (de)serialization.

Units: power in MW, energy in MWh, time in hours, state of charge as a
fraction of capacity, prices in EUR/MWh (energy) or EUR/MW/h (capacity).
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any

import numpy as np

POLICY_KINDS = ("none", "fixed", "adaptive", "uncertainty_aware")


class ConfigError(ValueError):
    """Raised when a parameter violates its documented invariant."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class BatteryParams:
    P_max: float = 10.0
    C: float = 10.0
    eta_ch: float = 0.99
    eta_dis: float = 0.99
    s_min: float = 0.0
    s_max: float = 1.0
    dt: float = 1.0
    s_init: float = 0.5


@dataclass(frozen=True)
class SocErrorParams:
    b: float = 0.15
    c: float = 0.9
    beta: float = 1e-3
    sigma2: float = 1e-4
    w_max: float = 0.2
    w_init: float = 0.0


@dataclass(frozen=True)
class MarketParams:
    pi_fcr: float = 16.0
    c_deg: float = 36.5
    zeta: float = 0.1
    c_imb: float = 1e4
    c_fcr: float = 1e5
    dt_fcr: float = 0.5
    imb_adder: float = 0.30
    fcr_block_len: int = 4


@dataclass(frozen=True)
class MarginPolicy:
    """Constraint-tightening policy.

    ``kind`` selects the margin rule; the remaining fields are only read by
    the kinds that need them (``m_fixed`` for ``fixed``; ``w_bar``,
    ``gamma`` and ``delta_max`` for ``adaptive`` and ``uncertainty_aware``).
    ``alpha_target`` and ``tuning_horizon`` are carried as metadata.
    ``regime_group`` (hours, aligned to absolute hour multiples) shares the
    uncertainty-aware regime decision across consecutive hours; 1 gives the
    exact per-hour recursion. Past ``regime_window`` hours into the horizon
    the tube only grows (0 means the regime logic spans the whole horizon).
    """

    kind: str = "none"
    m_fixed: float = 0.0
    w_bar: float = 1.8e-4
    gamma: float = 0.8
    delta_max: float = 0.2
    tuning_horizon: int = 720
    alpha_target: float = 0.04
    regime_group: int = 4
    regime_window: int = 24

    @classmethod
    def none(cls) -> "MarginPolicy":
        return cls(kind="none")

    @classmethod
    def fixed(cls, m: float, **kw) -> "MarginPolicy":
        return cls(kind="fixed", m_fixed=m, **kw)

    @classmethod
    def adaptive(cls, w_bar: float, **kw) -> "MarginPolicy":
        return cls(kind="adaptive", w_bar=w_bar, **kw)

    @classmethod
    def uncertainty_aware(cls, w_bar: float, **kw) -> "MarginPolicy":
        return cls(kind="uncertainty_aware", w_bar=w_bar, **kw)

    @property
    def parameter(self) -> float:
        """The tuning knob swept for this kind (m for fixed, w_bar otherwise)."""
        if self.kind in ("none", "fixed"):
            return self.m_fixed if self.kind == "fixed" else 0.0
        return self.w_bar


@dataclass(frozen=True)
class PriceSeries:
    start: datetime
    pi_da: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pi_da, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "pi_da", arr)
        if self.start.tzinfo is None:
            object.__setattr__(self, "start", self.start.replace(tzinfo=timezone.utc))
        if not np.all(np.isfinite(arr)):
            raise ConfigError("pi_da", "non-finite price")
        if self.start.minute or self.start.second or self.start.microsecond:
            raise ConfigError("start", "timestamp is not hour-aligned")

    def __len__(self) -> int:
        return len(self.pi_da)

    def timestamps(self) -> list[datetime]:
        return [self.start + timedelta(hours=i) for i in range(len(self))]


@dataclass
class HourRecord:
    """One simulated hour. Powers in MW, SOC and error as fractions, money in EUR."""

    t: int
    pi_da: float
    p_da_bid: float
    p_fcr_bid: float
    p_fcr_delivered: float
    p_cmd: float
    p_true: float
    p_true_ch: float
    p_true_dis: float
    p_imb_true: float
    s_true_begin: float
    s_true_end: float
    s_rep: float
    w: float
    w_end: float
    margin_m: float
    r_dam: float
    r_fcr: float
    c_imb: float
    c_deg: float
    compliant: bool
    shortfall: float
    power_violation: bool = False
    soc_clamped: bool = False
    solver_status: str = "optimal"


# units for CSV headers
HOUR_RECORD_UNITS = {
    "t": "h", "pi_da": "EUR/MWh", "p_da_bid": "MW", "p_fcr_bid": "MW",
    "p_fcr_delivered": "MW", "p_cmd": "MW", "p_true": "MW", "p_true_ch": "MW",
    "p_true_dis": "MW", "p_imb_true": "MW", "s_true_begin": "frac",
    "s_true_end": "frac", "s_rep": "frac", "w": "frac", "w_end": "frac",
    "margin_m": "frac", "r_dam": "EUR", "r_fcr": "EUR", "c_imb": "EUR",
    "c_deg": "EUR", "compliant": "bool", "shortfall": "MWh",
    "power_violation": "bool", "soc_clamped": "bool", "solver_status": "-",
}


@dataclass(frozen=True)
class SimulationSettings:
    """Closed-loop run settings that are not physical or market constants.

    ``fcr_error_drive`` feeds the mean FCR activation throughput
    ``zeta * p_fcr`` into the SOC error process (energy-neutral on the
    SOC itself). Off reproduces a plant that only sees commanded dispatch.
    """

    horizon: int = 72
    days: int = 30
    gate_hour: int = 12
    solver: str = "highs"
    time_limit: float = 10.0
    mip_rel_gap: float = 1e-6
    fcr_error_drive: bool = False


@dataclass(frozen=True)
class Config:
    battery: BatteryParams = field(default_factory=BatteryParams)
    soc_error: SocErrorParams = field(default_factory=SocErrorParams)
    market: MarketParams = field(default_factory=MarketParams)
    policy: MarginPolicy = field(default_factory=MarginPolicy)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)

    def replace(self, **sections) -> "Config":
        return dataclasses.replace(self, **sections)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Config":
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be an object")
        sections = {
            "battery": BatteryParams,
            "soc_error": SocErrorParams,
            "market": MarketParams,
            "policy": MarginPolicy,
            "simulation": SimulationSettings,
        }
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config section")
        kwargs = {}
        for key, typ in sections.items():
            raw = data.get(key, {})
            if not isinstance(raw, dict):
                raise ConfigError(key, "config section must be an object")
            names = {f.name for f in dataclasses.fields(typ)}
            bad = set(raw) - names
            if bad:
                raise ConfigError(f"{key}.{sorted(bad)[0]}", "unknown field")
            kwargs[key] = typ(**raw)
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Config":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        return validate_config(cls.from_json(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def _check(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ConfigError(name, msg)


def _finite(obj) -> None:
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigError(f.name, "must be finite")


def validate_params(battery: BatteryParams, err: SocErrorParams,
                    mkt: MarketParams, pol: MarginPolicy):
    """Check every type invariant; return the inputs unchanged.

    Raises :class:`ConfigError` naming the first violated field.
    """
    for obj in (battery, err, mkt, pol):
        _finite(obj)

    _check(battery.P_max > 0, "P_max", "P_max out of range (must be > 0)")
    _check(battery.C > 0, "C", "C out of range (must be > 0)")
    _check(0 < battery.eta_ch <= 1, "eta_ch", "eta_ch out of range (0, 1]")
    _check(0 < battery.eta_dis <= 1, "eta_dis", "eta_dis out of range (0, 1]")
    _check(0 <= battery.s_min < battery.s_max <= 1, "s_min",
           "0 <= s_min < s_max <= 1 violated")
    _check(battery.dt > 0, "dt", "dt out of range (must be > 0)")
    _check(battery.s_min <= battery.s_init <= battery.s_max, "s_init",
           "s_init outside [s_min, s_max]")

    _check(0 < err.b, "b", "b out of range (must be > 0)")
    _check(err.b < err.c, "b", "b < c violated")
    _check(err.c < 1, "c", "c out of range (must be < 1)")
    _check(err.sigma2 >= 0, "sigma2", "sigma2 out of range (must be >= 0)")
    _check(err.w_max > 0, "w_max", "w_max out of range (must be > 0)")
    _check(abs(err.w_init) <= err.w_max, "w_init", "|w_init| exceeds w_max")

    _check(mkt.dt_fcr > 0, "dt_fcr", "dt_fcr out of range (must be > 0)")
    _check(0 <= mkt.zeta <= 1, "zeta", "zeta out of range [0, 1]")
    _check(mkt.imb_adder >= 0, "imb_adder", "imb_adder out of range (must be >= 0)")
    _check(isinstance(mkt.fcr_block_len, int) and mkt.fcr_block_len > 0
           and 24 % mkt.fcr_block_len == 0,
           "fcr_block_len", "fcr_block_len must divide 24")
    for name in ("c_deg", "c_imb", "c_fcr"):
        _check(getattr(mkt, name) >= 0, name, f"{name} out of range (must be >= 0)")

    _check(pol.kind in POLICY_KINDS, "kind", f"kind must be one of {POLICY_KINDS}")
    _check(0 <= pol.m_fixed <= 1, "m_fixed", "m_fixed out of range [0, 1]")
    _check(0 <= pol.gamma <= 1, "gamma", "gamma out of range [0, 1]")
    _check(pol.w_bar >= 0, "w_bar", "w_bar out of range (must be >= 0)")
    _check(0 <= pol.delta_max <= (battery.s_max - battery.s_min) / 2, "delta_max",
           "delta_max must lie in [0, (s_max - s_min)/2]")
    _check(pol.tuning_horizon >= 1, "tuning_horizon", "tuning_horizon must be >= 1")
    _check(0 <= pol.alpha_target <= 1, "alpha_target", "alpha_target out of range [0, 1]")
    _check(isinstance(pol.regime_group, int) and pol.regime_group >= 1, "regime_group",
           "regime_group must be a positive integer")
    _check(isinstance(pol.regime_window, int) and pol.regime_window >= 0, "regime_window",
           "regime_window must be a non-negative integer")
    if pol.kind == "fixed":
        _check(pol.m_fixed <= (battery.s_max - battery.s_min) / 2, "m_fixed",
               "m_fixed leaves an empty SOC band")
    return battery, err, mkt, pol


def validate_config(cfg: Config) -> Config:
    validate_params(cfg.battery, cfg.soc_error, cfg.market, cfg.policy)
    sim = cfg.simulation
    _check(sim.horizon >= 1, "horizon", "horizon must be >= 1")
    _check(sim.days >= 1, "days", "days must be >= 1")
    _check(0 <= sim.gate_hour < 24, "gate_hour", "gate_hour must lie in [0, 24)")
    _check(sim.solver in ("highs", "embedded"), "solver", "solver must be highs or embedded")
    _check(sim.time_limit > 0, "time_limit", "time_limit must be > 0")
    return cfg
