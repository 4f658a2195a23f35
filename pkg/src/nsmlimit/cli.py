"""Command-line entry point.

Subcommands: run, sweep, audit, moser, reform-check.
Exit codes: 0 success, 2 config error, 3 numerical blow-up,
4 acceptance-fit failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .diagnostics import energy_identity_audit
from .errors import ConfigError
from .harness import (
    R2_MIN,
    REFORM_TOL,
    SLOPE_RANGE,
    default_config_text,
    load_snapshots,
    parse_config,
    parse_config_text,
    run_single,
    run_sweep,
    write_record,
)
from .model import Params, random_two_fluid_state, reformulation_check
from .spectral import Grid, moser_ensemble

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_ACCEPT = 4


def _load_config(args):
    if args.config is None:
        cfg = parse_config_text(default_config_text())
    else:
        cfg = parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, initial=replace(cfg.initial, seed=args.seed))
    if getattr(args, "out", None) is not None:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    kappa = args.kappa if args.kappa is not None else None
    rec = run_single(cfg, kappa=kappa)
    paths = write_record(rec, cfg.out_dir)
    print(f"status={rec.status} kappa={rec.kappa:g} steps={rec.n_steps}")
    print(f"sup sqrt(Gamma) = {rec.sup_sqrt_gamma():.6e}")
    print(f"wrote {paths['csv']} {paths['json']}")
    if rec.status != "completed":
        print(rec.message, file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    result = run_sweep(cfg, jobs=args.jobs)
    s = result.summary
    print("kappa      sup sqrt(Gamma)")
    for k, e in zip(s["kappa"], s["sup_error"]):
        print(f"{k:<10g} {e:.6e}")
    print(f"fitted slope = {s['slope']:.4f}  r2 = {s['r2']:.6f}")
    print(f"wrote {result.paths['summary']}")
    if result.failed:
        return EXIT_BLOWUP
    lo, hi = SLOPE_RANGE
    if not (lo <= s["slope"] <= hi) or s["r2"] < R2_MIN:
        print(
            f"acceptance fit failed: slope outside [{lo}, {hi}] or r2 < {R2_MIN}",
            file=sys.stderr,
        )
        return EXIT_ACCEPT
    return EXIT_OK


def _cmd_audit(args) -> int:
    cfg = _load_config(args)
    kappa, snaps = load_snapshots(args.record)
    p = replace(cfg.params, kappa=kappa)
    report = energy_identity_audit(snaps, p, drop_term=args.drop_term)
    print(f"snapshots: {len(snaps)}  interior points: {len(report.residuals)}")
    print(f"max residual  = {report.max_residual:.6e}")
    print(f"mean residual = {report.mean_residual:.6e}")
    for key in ("ddt", "dissipation", "T1", "T2", "T3", "T4", "T5", "T6"):
        print(f"  {key:12s} {report.terms[key]: .6e}")
    return EXIT_OK


def _cmd_moser(args) -> int:
    cfg = _load_config(args)
    grid = cfg.grid
    fine = Grid(grid.dims_active, grid.points_per_dim * 2, grid.period)
    seed = cfg.initial.seed
    s = int(cfg.l)
    c1, c2 = moser_ensemble(grid, s=s, n_pairs=args.pairs, seed=seed)
    f1, f2 = moser_ensemble(fine, s=s, n_pairs=args.pairs, seed=seed)
    g1 = abs(f1 / c1 - 1.0)
    g2 = abs(f2 / c2 - 1.0)
    print(f"pairs = {args.pairs}, s = {s}")
    print(f"product constant:    {c1:.6f} -> {f1:.6f}  (change {100*g1:.3f}%)")
    print(f"commutator constant: {c2:.6f} -> {f2:.6f}  (change {100*g2:.3f}%)")
    if max(g1, g2) >= 0.05:
        print("constants grew by >= 5% under resolution doubling", file=sys.stderr)
        return EXIT_ACCEPT
    return EXIT_OK


def _cmd_reform_check(args) -> int:
    cfg = _load_config(args)
    p: Params = cfg.params
    worst = 0.0
    for i in range(args.states):
        state = random_two_fluid_state(
            cfg.grid, p, seed=cfg.initial.seed + i,
            max_wavenumber=cfg.initial.max_wavenumber,
        )
        report = reformulation_check(state, p)
        worst = max(worst, report.max_residual)
        print(
            f"state {i}: recast max = {max(report.recast.values()):.3e}  "
            f"scaling max = {max(report.scaling.values()):.3e}"
        )
    print(f"worst residual = {worst:.3e} (tolerance {REFORM_TOL:g})")
    if worst > REFORM_TOL:
        print("reformulation residual above tolerance", file=sys.stderr)
        return EXIT_ACCEPT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsmlimit",
        description="Two-fluid Navier-Stokes-Maxwell solver and singular-limit harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, seed=True):
        sp.add_argument("--config", type=Path, default=None, help="INI config file")
        sp.add_argument("--out", type=str, default=None, help="output directory")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="override seed")

    sp = sub.add_parser("run", help="single paired full/limit run")
    add_common(sp)
    sp.add_argument("--kappa", type=float, default=None, help="override kappa")
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("sweep", help="kappa sweep with rate fit")
    add_common(sp)
    sp.add_argument("--jobs", type=int, default=1, help="parallel workers")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("audit", help="energy-identity audit on stored snapshots")
    add_common(sp)
    sp.add_argument("--record", type=Path, required=True, help="*_snapshots.npz file")
    sp.add_argument("--drop-term", type=int, default=None, dest="drop_term",
                    help="fault injection: delete right-hand term 1..6")
    sp.set_defaults(func=_cmd_audit)

    sp = sub.add_parser("moser", help="product/commutator inequality ensemble")
    add_common(sp)
    sp.add_argument("--pairs", type=int, default=100)
    sp.set_defaults(func=_cmd_moser)

    sp = sub.add_parser("reform-check", help="substitution/scaling algebra residuals")
    add_common(sp)
    sp.add_argument("--states", type=int, default=10)
    sp.set_defaults(func=_cmd_reform_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
