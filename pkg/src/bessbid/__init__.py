"""Day-ahead and FCR bidding for a battery whose reported SOC drifts from the truth."""
from .domain import (BatteryParams, Config, ConfigError, MarginPolicy, MarketParams,
                     PriceSeries, SimulationSettings, SocErrorParams)
from .ingest import SyntheticPriceParams, load_price_csv, synth_prices, write_price_csv
from .market import SimulationLog, run_receding_horizon
from .metrics import RevenueBreakdown, compute_revenue, sweep

__version__ = "0.1.0"

__all__ = [
    "BatteryParams", "Config", "ConfigError", "MarginPolicy", "MarketParams", "PriceSeries",
    "SimulationSettings", "SocErrorParams", "SyntheticPriceParams", "load_price_csv",
    "synth_prices", "write_price_csv", "SimulationLog", "run_receding_horizon",
    "RevenueBreakdown", "compute_revenue", "sweep",
]
