"""Command-line entry point: ``csc-sim {solve,sweep,figures,check}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import CSCError
from .mechanism import check_budget, check_ex_post_ir, check_rows_to_csv, fairness_score, payments


def _config(args) -> ex.ScenarioConfig:
    overrides = {"seed": args.seed, "scheme": args.scheme}
    if args.config:
        return ex.load_config(args.config, **overrides)
    return ex.parse_config(ex.default_config_text("default"), **overrides)


def _emit(text: str, out: str | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)
    print(f"wrote {path / name}", file=sys.stderr)


def solve_report(cfg: ex.ScenarioConfig) -> str:
    params = cfg.game_params()
    profile = ex.sample_bets(cfg, 0)
    out = payments(profile, cfg.scheme, params)
    budget = check_budget(out, params)
    ir = check_ex_post_ir(profile, cfg.scheme, params, cfg.ir_threshold, outcome=out)
    lines = [
        f"scheme          {cfg.scheme.value}",
        f"attackers       {profile.n}",
        f"award           {params.award:.6g}",
        f"theta           {profile.theta:.6g}",
        f"gamma           {params.gamma:.6g}",
        f"cost_factor_c   {params.cost_factor_c:.6g}",
        f"attack_result   {out.attack_result:.9f}",
        f"raw_total       {out.equilibrium.raw_total:.9f}",
        f"total_payment   {out.total_payment:.9f}",
        f"sponsor_residual {out.sponsor_residual:.9f}",
        f"budget_ok       {budget.ok}",
        f"fairness_d_rms  {fairness_score(profile, cfg.scheme, params, outcome=out):.9f}",
        f"ir_pass         {sum(ir)}/{len(ir)}",
        "",
        "i,type,bet,effort,payment,ir",
    ]
    bets = profile.bets(params.award)
    for i in range(profile.n):
        lines.append(f"{i},{profile.types[i]:.9f},{bets[i]:.9f},{out.equilibrium.efforts[i]:.9f},"
                     f"{out.payments[i]:.9f},{int(ir[i])}")
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="csc-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "equilibrium and payments of one scenario"),
        ("sweep", "parameter sweep to CSV"),
        ("figures", "all default figure panels to CSV"),
        ("check", "property suite on seeded random scenarios"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="scenario config file (flat key = value)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory (stdout when omitted)")
        p.add_argument("--scheme", choices=("linear", "square"), default=None)
        p.add_argument("--workers", type=int, default=1)
        if name == "check":
            p.add_argument("--count", type=int, default=200)
        if name == "figures":
            p.add_argument("--config-dir", default=None, help="directory holding fig3/fig4/fig5.cfg")
    args = parser.parse_args(argv)

    try:
        if args.command == "figures":
            out = args.out or "figures"
            for path in ex.figure_suite(args.config_dir, out, workers=args.workers, seed=args.seed).values():
                print(f"wrote {path}", file=sys.stderr)
            return 0
        cfg = _config(args)
        if args.command == "solve":
            _emit(solve_report(cfg), args.out, "solve.txt")
        elif args.command == "sweep":
            _emit(ex.sweep_to_csv(ex.sweep(cfg, workers=args.workers)), args.out, "sweep.csv")
        elif args.command == "check":
            rows = ex.property_suite(cfg, count=args.count)
            _emit(check_rows_to_csv(rows), args.out, "checks.csv")
            failed = sorted({r.check for r in rows if not r.passed})
            if failed:
                print(f"property violations: {', '.join(failed)}", file=sys.stderr)
                return 1
    except CSCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
