"""Command line front end.

Subcommands::

    calmed-mhdb simulate --config run.cfg [--output-dir DIR] [overrides]
    calmed-mhdb sweep    --config plan.cfg [--output-dir DIR]
    calmed-mhdb riccati  [--y0 F] [--epsilon F ...] [--t F ...] [--csv PATH]
    calmed-mhdb verify   [--family NAME ...] [--epsilon F ...] [--grid N]

``simulate`` writes energy.csv (one diagnostics row per recording
interval, ordered as documented in diagnostics), optional physical
snapshots, and a summary.json; outputs are byte identical across
repeated runs of the same configuration.  ``sweep`` writes sweep.csv
and ratefit.json.  ``verify`` exits nonzero if any calming property or
structural identity check fails.  Exit codes: 0 success, 1 runtime or
verification failure, 2 malformed configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import calming as calming_mod
from . import diagnostics, storage
from .calming import CalmingSpec, constants_for, verify_properties
from .config import ConfigError, config_hash, load_config, load_sweep_plan
from .dynamics import (
    Grid,
    SimulationError,
    State,
    builtin_initial_data,
    simulate,
)
from .experiments import (
    RiccatiCase,
    convergence_sweep,
    riccati_closed_form,
    riccati_integrate,
)

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calmed-mhdb",
        description="Pseudo-spectral solver and verification suite for "
        "calmed magneto-Boussinesq flow with Ohmic heating",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configuration")
    sim.add_argument("--config", required=True, help="flat key-value config file")
    sim.add_argument("--output-dir", default=None)
    sim.add_argument("--epsilon", type=float, default=None)
    sim.add_argument("--calming", default=None, help="calming family name")
    sim.add_argument("--grid", type=int, default=None, help="grid size n")
    sim.add_argument("--dt", type=float, default=None)
    sim.add_argument("--t-final", type=float, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--record-every", type=int, default=None)
    sim.add_argument("--snapshot-every", type=int, default=None)

    sweep = sub.add_parser("sweep", help="epsilon convergence sweep")
    sweep.add_argument("--config", required=True, help="flat key-value plan file")
    sweep.add_argument("--output-dir", default=None)

    ric = sub.add_parser("riccati", help="calmed Riccati closed form vs integrator")
    ric.add_argument("--y0", type=float, default=1.0)
    ric.add_argument("--epsilon", type=float, action="append", default=None)
    ric.add_argument("--t", type=float, action="append", default=None)
    ric.add_argument("--csv", default=None, help="also write the table to this path")

    ver = sub.add_parser("verify", help="calming properties and structural identities")
    ver.add_argument("--family", action="append", default=None)
    ver.add_argument("--epsilon", type=float, action="append", default=None)
    ver.add_argument("--samples", type=int, default=20000)
    ver.add_argument("--grid", type=int, default=32)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument(
        "--corrupt-constants",
        action="store_true",
        help="test hook: halve the bound constant to force a failure",
    )
    return parser


# ---------------------------------------------------------------------------
# simulate


def _simulate_overrides(args) -> dict:
    mapping = {
        "output_dir": args.output_dir,
        "epsilon": args.epsilon,
        "calming": args.calming,
        "grid_n": args.grid,
        "dt": args.dt,
        "t_final": args.t_final,
        "seed": args.seed,
        "record_every": args.record_every,
        "snapshot_every": args.snapshot_every,
    }
    return {k: v for k, v in mapping.items() if v is not None}


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config, _simulate_overrides(args))
    digest = config_hash(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)

    grid = Grid(cfg.grid_n)
    state = builtin_initial_data(cfg.initial, grid, cfg.seed)
    records = []
    observers = [(cfg.record_every, lambda _s, st: records.append(
        diagnostics.record(st, cfg.params, cfg.calming)))]
    if cfg.snapshot_every > 0:
        observers.append(
            (cfg.snapshot_every, lambda s, st: storage.save_snapshot(cfg.output_dir, s, st, digest))
        )

    final = simulate(state, cfg.params, cfg.calming, cfg.stepper, observers)

    storage.write_energy_csv(os.path.join(cfg.output_dir, "energy.csv"), records)
    summary = {
        "config_hash": digest,
        "config": dict(cfg.flat_items()),
        "final_time": final.t,
        "energy_rows": len(records),
        "final_l2_u": records[-1].l2_u,
        "final_l2_b": records[-1].l2_b,
        "final_l2_theta": records[-1].l2_theta,
    }
    storage.atomic_write_text(
        os.path.join(cfg.output_dir, "summary.json"),
        json.dumps(summary, indent=2, sort_keys=True) + "\n",
    )
    print(f"wrote {len(records)} energy rows to {cfg.output_dir}/energy.csv")
    return 0


# ---------------------------------------------------------------------------
# sweep


def _cmd_sweep(args) -> int:
    overrides = {"output_dir": args.output_dir} if args.output_dir else None
    plan, output_dir = load_sweep_plan(args.config, overrides)
    os.makedirs(output_dir, exist_ok=True)
    result = convergence_sweep(plan)
    storage.write_sweep_csv(os.path.join(output_dir, "sweep.csv"), result)
    storage.write_ratefit_json(os.path.join(output_dir, "ratefit.json"), result)
    for row in result.rows:
        print(f"eps = {row.epsilon:<10g} e_inf = {row.e_inf:.6e} e_int = {row.e_int:.6e}")
    if result.zero_error:
        print("errors at the exact-agreement floor; no rate fit")
    elif result.fit_inf is not None:
        print(
            f"fitted orders: e_inf {result.fit_inf.slope:.3f}, "
            f"e_int {result.fit_int.slope:.3f} (expected {result.expected_order:g})"
        )
    if not result.monotone_inf:
        print("warning: e_inf is not monotone along the ladder", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# riccati


def _cmd_riccati(args) -> int:
    epsilons = args.epsilon if args.epsilon else [0.1, 0.01]
    if args.t:
        t_grid = tuple(args.t)
    else:
        t_grid = tuple(np.linspace(0.0, 5.0, 11))
    lines = ["epsilon,t,closed_form,integrated,abs_diff"]
    print(f"{'eps':>10} {'t':>8} {'closed form':>18} {'integrated':>18} {'diff':>10}")
    for eps in epsilons:
        case = RiccatiCase(y0=args.y0, epsilon=eps, t_grid=t_grid)
        exact = riccati_closed_form(case)
        approx = riccati_integrate(case)
        for t, ye, ya in zip(case.t_grid, map(float, exact), map(float, approx)):
            print(f"{eps:>10g} {t:>8g} {ye:>18.10e} {ya:>18.10e} {abs(ye - ya):>10.2e}")
            lines.append(f"{eps!r},{t!r},{ye!r},{ya!r},{abs(ye - ya)!r}")
    if args.csv:
        storage.atomic_write_text(args.csv, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# verify


def _cmd_verify(args) -> int:
    families = args.family if args.family else list(calming_mod.FAMILIES)
    epsilons = args.epsilon if args.epsilon else [1.0, 0.1, 0.01]
    failures = 0

    for family in families:
        if family == "identity":
            print("identity: skipped (exempt from calming bounds)")
            continue
        for eps in epsilons:
            spec = CalmingSpec(family, eps)
            constants = constants_for(spec)
            if args.corrupt_constants:
                constants = type(constants)(
                    m_eps=0.5 * constants.m_eps,
                    l_eps=constants.l_eps,
                    gamma=constants.gamma,
                    beta=constants.beta,
                    c_resid=constants.c_resid,
                )
            report = verify_properties(spec, constants, sample_count=args.samples, seed=args.seed)
            status = "ok" if report.passed else "FAIL"
            print(
                f"{family:<12} eps = {eps:<8g} worst violation = {report.worst():+.3e}  {status}"
            )
            failures += 0 if report.passed else 1

    grid = Grid(args.grid)
    for seed in (args.seed, args.seed + 1):
        state = builtin_initial_data("random-smooth", grid, seed)
        for rep in diagnostics.check_identities(state):
            status = "ok" if rep.passed else "FAIL"
            print(f"identity check {rep.name:<26} seed {seed}: {rep.residual:.3e}  {status}")
            failures += 0 if rep.passed else 1

    if failures:
        print(f"{failures} check(s) failed", file=sys.stderr)
        return 1
    print("all checks passed")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "riccati":
            return _cmd_riccati(args)
        if args.command == "verify":
            return _cmd_verify(args)
        parser.error(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
