"""One uncertainty-aware MPC solve: when the tube is wide, the plan pays to recalibrate.

Solves the 72 h problem from a reported SOC of 50 % twice, once with a fresh
tube (delta0 = 0) and once with delta0 = 0.1, and prints the planned SOC,
tube width and FCR bid per four-hour block.

    python3 demos/tube_plan.py
"""
from bessbid.bidding import MpcInputs, block_of, build_mpc_problem, extract_plan
from bessbid.domain import BatteryParams, MarginPolicy, MarketParams, SocErrorParams
from bessbid.ingest import SyntheticPriceParams, synth_prices
from bessbid.milp import make_solver

BAT, MKT, ERR = BatteryParams(), MarketParams(), SocErrorParams()
POL = MarginPolicy.uncertainty_aware(1.8e-4)
T = 72


def plan(delta0):
    prices = synth_prices(SyntheticPriceParams(seed=0, days=4)).pi_da[:T]
    blocks = tuple(sorted({block_of(t, MKT) for t in range(T)}))
    inp = MpcInputs(t0=0, horizon=T, s_rep_0=0.5, pi_da=tuple(map(float, prices)),
                    pi_fcr=MKT.pi_fcr, da_committed=(None,) * T, fcr_blocks=blocks,
                    fcr_committed=(None,) * len(blocks), margin=(), delta0=delta0,
                    kind=POL.kind)
    model = build_mpc_problem(inp, BAT, MKT, POL, ERR)
    return extract_plan(make_solver().solve_milp(model), model)


if __name__ == "__main__":
    for d0 in (0.0, 0.1):
        p = plan(d0)
        print(f"delta0 = {d0}: objective {p.objective:.2f} EUR")
        print("block  min SOC  max SOC  delta end  FCR bid")
        for blk in range(T // 4):
            hs = slice(4 * blk, 4 * blk + 5)
            print(f"{blk:5d}  {p.s[hs].min():7.3f}  {p.s[hs].max():7.3f}  "
                  f"{p.delta[min(4 * blk + 3, T - 1)]:9.4f}  {p.fcr_bid[blk]:7.2f}")
        print()
