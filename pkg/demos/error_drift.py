"""How the SOC estimation error grows on the plateau and collapses near empty/full.

Drives the plant open-loop with two command patterns for ten days each:
holding near 50 % with small back-and-forth moves, and a daily full cycle.
Prints the daily maximum of |w|.

    python3 demos/error_drift.py
"""
import numpy as np

from bessbid.domain import BatteryParams, SocErrorParams
from bessbid.plant import BessState, simulate_hour

BAT, ERR = BatteryParams(), SocErrorParams()
DAYS = 10


def plateau(t, s):
    # +-3 MW around the middle, never leaving the flat region
    return 3.0 if s > 0.5 else -3.0


def daily_cycle(t, s):
    h = t % 24
    if h < 6:
        return -10.0        # charge to full
    if 12 <= h < 18:
        return 10.0         # discharge to empty
    return 0.0


def run(policy, seed=0):
    state = BessState.initial(BAT, ERR, seed)
    daily = []
    for day in range(DAYS):
        peak = 0.0
        for h in range(24):
            t = 24 * day + h
            state, step = simulate_hour(state, policy(t, state.s_true), BAT, ERR)
            peak = max(peak, abs(step.w_end))
        daily.append(peak)
    return np.array(daily)


if __name__ == "__main__":
    a, b = run(plateau), run(daily_cycle)
    print("day  max|w| plateau  max|w| daily cycle")
    for d in range(DAYS):
        print(f"{d:3d}  {a[d]:14.4f}  {b[d]:18.4f}")
