"""Command line: ``pesp-split {solve,oracle,check,restrict}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .engine import INFEASIBLE, EngineConfig, run, run_by_blocks
from .inequalities import TrivialCutError, alpha, flip_cut, violation
from .cycles import is_circulation
from .instance import InfeasibleError, PespError, preprocess, restrict_to_mu
from .io import dump_point, load_cuts, load_point, parse_activities, write_activities
from .oracle import BudgetExceeded, OracleBudget, ip_optimum, split_closure_optimum


def _load(args):
    return preprocess(parse_activities(args.file, args.period))


def cmd_solve(args) -> int:
    inst = _load(args)
    if args.mu is not None:
        inst = restrict_to_mu(inst, args.mu)
    cfg = EngineConfig(time_limit=args.time_limit, alpha_order=args.alpha_order,
                       heuristic_only=args.heuristic_only, threads=args.threads)
    rep = run_by_blocks(inst, cfg) if args.blocks else run(inst, cfg)
    print(f"instance     {rep.instance}")
    print(f"mu           {rep.mu}")
    print(f"status       {rep.status}")
    print(f"bound (w^Tx) {rep.bound_wx:.6f}")
    print(f"bound slack  {rep.bound_slack:.6f}")
    print(f"cuts         {rep.cuts_total} ({rep.cuts_exact} exact)")
    print(f"runtime      {rep.runtime_s:.3f} s")
    if args.log:
        rep.write_log(args.log)
    if args.json:
        data = rep.to_json()
        if rep.x is not None:
            data["x"] = dump_point(rep.x)
        Path(args.json).write_text(json.dumps(data, indent=1))
    return 1 if rep.status == INFEASIBLE else 0


def cmd_oracle(args) -> int:
    inst = _load(args)
    budget = OracleBudget()
    if args.mode == "ip":
        val, x = ip_optimum(inst, budget)
    else:
        val, x = split_closure_optimum(inst, budget)
    print(f"{args.mode} optimum {val} ({float(val):.6f})")
    if args.json:
        Path(args.json).write_text(json.dumps({"mode": args.mode, "value": str(val),
                                               "x": dump_point(x)}, indent=1))
    return 0


def cmd_check(args) -> int:
    inst = _load(args)
    cuts = load_cuts(args.cuts)
    x = load_point(args.point)
    bad = 0
    for k, c in enumerate(cuts):
        notes = []
        if not is_circulation(inst, c.gamma):
            notes.append("gamma is not a circulation")
        else:
            if alpha(inst, c.gamma, c.flipped) != c.alpha:
                notes.append("alpha mismatch")
            try:
                ref = flip_cut(inst, c.gamma, c.flipped)
                if ref.coefficients != c.coefficients or ref.rhs != c.rhs:
                    notes.append("coefficients differ from (gamma, F)")
            except TrivialCutError:
                notes.append("trivial (alpha = 0)")
        v = violation(c, x)
        valid = not notes
        bad += not valid
        state = "violated" if v > 0 else "satisfied"
        print(f"cut {k}: {'valid' if valid else 'INVALID'} {state} violation={float(v):.9g}"
              + (f" [{'; '.join(notes)}]" if notes else ""))
    return 1 if bad else 0


def cmd_restrict(args) -> int:
    inst = restrict_to_mu(_load(args), args.mu)
    write_activities(inst, args.out)
    print(f"wrote {args.out}: {len(inst.arcs)} arcs, mu = {inst.mu}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pesp-split", description="Split closure bounds for periodic timetabling.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("file")
        sp.add_argument("--period", type=int, required=True)
        sp.add_argument("--threads", type=int, default=1)

    s = sub.add_parser("solve", help="run the cutting plane loop")
    common(s)
    s.add_argument("--time-limit", type=float, default=3600.0)
    s.add_argument("--mu", type=int)
    s.add_argument("--alpha-order", choices=("desc", "asc"), default="desc")
    s.add_argument("--heuristic-only", action="store_true")
    s.add_argument("--blocks", action="store_true", help="solve biconnected blocks separately")
    s.add_argument("--log")
    s.add_argument("--json")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="brute-force optima of tiny instances")
    common(o)
    o.add_argument("--mode", choices=("ip", "split"), default="ip")
    o.add_argument("--json")
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("check", help="validate cuts and evaluate them at a point")
    common(c)
    c.add_argument("--cuts", required=True)
    c.add_argument("--point", required=True)
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("restrict", help="drop arcs until the cyclomatic number is reached")
    common(r)
    r.add_argument("--mu", type=int, required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_restrict)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (InfeasibleError, BudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PespError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
