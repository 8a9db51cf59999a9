"""Command-line entry point: ``simulate``, ``sweep`` and ``gen-prices``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

from .domain import Config, ConfigError, PriceSeries, validate_config
from .ingest import PriceFormatError, SyntheticPriceParams, load_price_csv, synth_prices, write_price_csv
from .market import run_receding_horizon
from .metrics import WORKERS_ENV, emit_report, parse_grid, policy_for, summarize, sweep

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4, 5

POLICY_NAMES = {
    "none": "none",
    "fixed": "fixed",
    "adaptive": "adaptive",
    "uncertainty-aware": "uncertainty_aware",
    "uncertainty_aware": "uncertainty_aware",
}

log = logging.getLogger("bessbid")


class UsageError(Exception):
    pass


def _add_price_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--prices", type=Path, help="hourly price CSV (timestamp,price_eur_mwh)")
    src.add_argument("--synthetic", action="store_true",
                     help="generate synthetic prices instead of reading a file")
    p.add_argument("--price-seed", type=int, default=0, help="seed for --synthetic (default 0)")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config; omitted sections use defaults")
    _add_price_source(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    length = p.add_mutually_exclusive_group()
    length.add_argument("--days", type=int, help="simulated days (default from config, 30)")
    length.add_argument("--months", type=float, help="simulated months (6 covers half a year)")
    p.add_argument("--horizon", type=int, help="MPC horizon in hours (default 72)")
    p.add_argument("--solver", choices=("highs", "embedded"), help="MILP backend")
    p.add_argument("--fcr-error-drive", action="store_true",
                   help="let mean FCR activation throughput drive the SOC error")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bessbid",
                                     description="Battery bidding under SOC estimation error.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="one closed-loop simulation")
    _add_run_options(sim)
    sim.add_argument("--policy", choices=sorted(POLICY_NAMES), default=None)
    sim.add_argument("--m", type=float, help="fixed margin (policy fixed)")
    sim.add_argument("--w-bar", type=float, help="margin growth per hour (adaptive, uncertainty-aware)")
    sim.add_argument("--seed", type=int, default=0)

    sw = sub.add_parser("sweep", help="grid sweep of one tuning parameter")
    _add_run_options(sw)
    sw.add_argument("--policy", choices=sorted(POLICY_NAMES), required=True)
    sw.add_argument("--grid", required=True, help="start:stop:step (inclusive) or a comma list")
    sw.add_argument("--seeds", default="0", help="comma-separated seeds (default 0)")
    sw.add_argument("--workers", type=int, help=f"parallel runs (default ${WORKERS_ENV} or 1)")

    gp = sub.add_parser("gen-prices", help="write a synthetic price CSV")
    gp.add_argument("--days", type=int, required=True)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--out", type=Path, required=True)
    defaults = SyntheticPriceParams()
    for f in dataclasses.fields(SyntheticPriceParams):
        if f.name in ("seed", "days"):
            continue
        gp.add_argument("--" + f.name.replace("_", "-"), type=type(getattr(defaults, f.name)),
                        default=None, help=f"default {getattr(defaults, f.name)}")
    return parser


# -- helpers ----------------------------------------------------------------

def _resolve_config(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config()
    sim = cfg.simulation
    changes = {}
    if args.days is not None:
        if args.days < 1:
            raise UsageError("--days must be >= 1")
        changes["days"] = args.days
    if args.months is not None:
        if not args.months > 0:
            raise UsageError("--months must be > 0")
        changes["days"] = max(1, round(args.months * 365.25 / 12))
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.solver is not None:
        changes["solver"] = args.solver
    if args.fcr_error_drive:
        changes["fcr_error_drive"] = True
    if changes:
        cfg = cfg.replace(simulation=dataclasses.replace(sim, **changes))
    return cfg


def _load_prices(args, cfg: Config) -> PriceSeries:
    if args.prices is not None:
        return load_price_csv(args.prices)
    days = cfg.simulation.days + math.ceil(cfg.simulation.horizon / 24) + 1
    return synth_prices(SyntheticPriceParams(seed=args.price_seed, days=days))


def _price_manifest(args) -> dict:
    if args.prices is not None:
        return {"prices": str(args.prices)}
    return {"synthetic_prices": {"seed": args.price_seed}}


def _ensure_dir(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)


def _print_table(rows: list[dict], cols: list[str]) -> None:
    def fmt(col, v):
        if isinstance(v, float):
            return f"{v:.6g}" if col in ("parameter", "mean_margin") else f"{v:.2f}"
        return str(v)

    cells = [[fmt(c, r[c]) for c in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    print("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
    for row in cells:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)))


SUMMARY_COLS = ["policy", "parameter", "R_total", "R_dam", "R_fcr", "C_imb", "C_deg",
                "shortfall_energy", "shortfall_hours_pct", "mean_margin"]


# -- subcommands ------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    kind = POLICY_NAMES[args.policy] if args.policy else cfg.policy.kind
    if args.m is not None and kind != "fixed":
        raise UsageError("--m only applies to --policy fixed")
    if args.w_bar is not None and kind not in ("adaptive", "uncertainty_aware"):
        raise UsageError("--w-bar only applies to adaptive or uncertainty-aware")
    pol = cfg.policy
    if args.policy or args.m is not None or args.w_bar is not None:
        value = args.m if kind == "fixed" else args.w_bar
        if value is None:
            value = pol.m_fixed if kind == "fixed" else pol.w_bar
        pol = policy_for(kind, value, pol)
    cfg = validate_config(cfg.replace(policy=pol))
    prices = _load_prices(args, cfg)
    _ensure_dir(args.out)

    lg = run_receding_horizon(cfg, prices, seed=args.seed)
    summary = summarize(lg)
    summary.update(_price_manifest(args))
    lg.to_csv(args.out / "log.csv")
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _print_table([summary], SUMMARY_COLS)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    kind = POLICY_NAMES[args.policy]
    try:
        grid = parse_grid(args.grid)
    except ValueError as exc:
        raise UsageError(f"--grid: {exc}") from None
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds: not a comma list of integers: {args.seeds!r}") from None
    if not seeds:
        raise UsageError("--seeds is empty")
    # validate every point up front so a bad grid value is a config error, not N failures
    for v in grid:
        validate_config(cfg.replace(policy=policy_for(kind, v, cfg.policy)))
    prices = _load_prices(args, cfg)
    _ensure_dir(args.out)

    result = sweep(cfg, prices, {kind: grid}, seeds, workers=args.workers)
    emit_report(result, "csv", args.out / "sweep.csv")
    emit_report(result, "csv", args.out / "sweep_per_seed.csv", per_seed=True)
    manifest = {"policy": kind, "grid": grid, "seeds": seeds, "config": cfg.to_dict(),
                **_price_manifest(args),
                "errors": [{"parameter": p.parameter, "seed": s, "error": e}
                           for p in result for s, e in p.errors]}
    (args.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    rows = [{"policy": p.kind, "parameter": p.parameter, "n_seeds": p.n_seeds,
             **dataclasses.asdict(p.breakdown)} for p in result]
    _print_table(rows, SUMMARY_COLS[:2] + ["n_seeds"] + SUMMARY_COLS[2:])
    return EXIT_OK if all(p.n_seeds == len(seeds) for p in result) else EXIT_INTERNAL


def cmd_gen_prices(args) -> int:
    if args.days < 1:
        raise UsageError("--days must be >= 1")
    kw = {f.name: getattr(args, f.name) for f in dataclasses.fields(SyntheticPriceParams)
          if f.name not in ("seed", "days") and getattr(args, f.name) is not None}
    params = SyntheticPriceParams(seed=args.seed, days=args.days, **kw)
    series = synth_prices(params)
    if args.out.parent != Path(""):
        _ensure_dir(args.out.parent)
    write_price_csv(series, args.out)
    print(f"{len(series)} hours written to {args.out}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "gen-prices": cmd_gen_prices}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:            # argparse already printed the message
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"bessbid {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"bessbid {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, PriceFormatError) as exc:
        print(f"bessbid {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # run-level validation (price coverage, horizon reach)
        print(f"bessbid {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:            # pragma: no cover - last resort
        log.exception("internal error")
        print(f"bessbid {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
