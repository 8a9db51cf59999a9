"""Closed-loop comparison of the four margin policies on one synthetic week.

Uses the same price scenario as the acceptance suite (low noise, rare
negative hours) with the FCR error drive on. Takes a few minutes on one core.

    python3 demos/policy_comparison.py [days]
"""
import sys

from bessbid.domain import Config, MarginPolicy, SimulationSettings
from bessbid.ingest import SyntheticPriceParams, synth_prices
from bessbid.market import run_receding_horizon
from bessbid.metrics import compute_revenue

POLICIES = [
    MarginPolicy.none(),
    MarginPolicy.fixed(0.06),
    MarginPolicy.adaptive(3.8e-4),
    MarginPolicy.uncertainty_aware(1.8e-4),
]

if __name__ == "__main__":
    days = int(sys.argv[1]) if len(sys.argv) > 1 else 7
    cfg = Config(simulation=SimulationSettings(days=days, fcr_error_drive=True))
    prices = synth_prices(SyntheticPriceParams(seed=0, days=days + 4, noise_std=10.0,
                                               neg_prob=0.001))
    print(f"{'policy':18s} {'param':>8s} {'R_total':>10s} {'compliant %':>12s} {'margin':>8s}")
    for pol in POLICIES:
        b = compute_revenue(run_receding_horizon(cfg, prices, pol, seed=0))
        print(f"{pol.kind:18s} {pol.parameter:8.3g} {b.R_total:10.0f} "
              f"{b.compliance_pct:12.1f} {b.mean_margin:8.4f}")
