"""Command-line interface.

Subcommands: ``generate`` (synthetic instances), ``solve`` (one model, one
method), ``sweep`` (parameter axis), ``benchmark`` (method comparison),
``report`` (CSV / SVG artifacts from a saved solve report).

Exit codes: 0 solved to optimality, 2 stopped at a time limit, 1 error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .instgen import GeneratorConfig, generate_instance, capacity_table
from .model import load_instance, save_instance
from .report import (METHODS, VARIANTS, SolveReport, benchmark, benchmark_csv,
                     benchmark_text, check_sweep_monotonicity, heatmap_csv,
                     heatmap_svg, run_solver, summarize, sweep, sweep_csv)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TIME_LIMIT = 2


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _build_parser():
    p = argparse.ArgumentParser(
        prog="carshare",
        description="Design car-sharing service regions and mixed fleets "
                    "under demand uncertainty.")
    sub = p.add_subparsers(required=True)

    g = sub.add_parser("generate", help="generate a synthetic instance")
    g.add_argument("--out", required=True, help="instance JSON path")
    g.add_argument("--grid-rows", type=int, default=3)
    g.add_argument("--grid-cols", type=int, default=3)
    g.add_argument("--periods", type=int, default=12)
    g.add_argument("--scenarios", type=int, default=50)
    g.add_argument("--budget", type=float, default=3_000_000.0)
    g.add_argument("--carbon", type=float, default=0.5)
    g.add_argument("--penalty", type=float, default=2.0,
                   help="hourly substitution discount")
    g.add_argument("--capacity-low", type=int, default=6)
    g.add_argument("--capacity-high", type=int, default=9)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--emit-table8", metavar="CSV",
                   help="also write the per-region capacity table")
    g.set_defaults(func=_cmd_generate)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("instance", help="instance JSON path")
    _solver_flags(s)
    s.add_argument("--out", help="write the operational report as JSON")
    s.set_defaults(func=_cmd_solve)

    w = sub.add_parser("sweep", help="re-solve along a parameter axis")
    w.add_argument("instance")
    w.add_argument("--axis", required=True, choices=["budget", "carbon", "penalty"])
    w.add_argument("--values", required=True,
                   help="comma-separated values; the penalty axis also accepts "
                        "'disabled'")
    w.add_argument("--variants", default="base,substitution",
                   help="comma-separated subset of base,substitution")
    _solver_flags(w, variant=False)
    w.add_argument("--out", help="write the sweep table as CSV")
    w.set_defaults(func=_cmd_sweep)

    b = sub.add_parser("benchmark", help="compare def / bc / bcplus")
    b.add_argument("instances", nargs="+", help="instance JSON paths")
    _solver_flags(b, method=False)
    b.add_argument("--methods", default="def,bc,bcplus")
    b.add_argument("--out", help="write the comparison as CSV")
    b.set_defaults(func=_cmd_benchmark)

    r = sub.add_parser("report", help="artifacts from a saved solve report")
    r.add_argument("report", help="report JSON produced by `solve --out`")
    r.add_argument("--heatmap", metavar="SVG",
                   help="write the demand-satisfaction heat grid")
    r.add_argument("--csv", metavar="CSV",
                   help="write per-region satisfaction as CSV")
    r.add_argument("--grid-rows", type=int, default=0,
                   help="grid geometry (default: square inferred)")
    r.add_argument("--grid-cols", type=int, default=0)
    r.set_defaults(func=_cmd_report)
    return p


def _solver_flags(sp, variant=True, method=True):
    if variant:
        sp.add_argument("--variant", choices=list(VARIANTS), default="substitution")
    if method:
        sp.add_argument("--method", choices=list(METHODS), default="bcplus")
    sp.add_argument("--time-limit", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--quiet", action="store_true")


def _log(args):
    return None if args.quiet else sys.stderr


def _status_code(status: str) -> int:
    if status == "optimal":
        return EXIT_OK
    if status in ("time_limit", "node_limit"):
        return EXIT_TIME_LIMIT
    return EXIT_ERROR


def _cmd_generate(args) -> int:
    cfg = GeneratorConfig(grid_rows=args.grid_rows, grid_cols=args.grid_cols,
                          n_periods=args.periods, n_scenarios=args.scenarios,
                          budget=args.budget, carbon_allowance=args.carbon,
                          substitution_penalty=args.penalty,
                          capacity_low=args.capacity_low,
                          capacity_high=args.capacity_high, seed=args.seed)
    inst = generate_instance(cfg)
    save_instance(inst, args.out)
    print(f"wrote {args.out}: {inst.n_regions} regions, {inst.periods} periods, "
          f"{len(inst.scenarios)} scenarios")
    if args.emit_table8:
        with open(args.emit_table8, "w") as fh:
            fh.write(capacity_table(inst))
        print(f"wrote {args.emit_table8}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    out = run_solver(inst, args.variant, args.method, args.time_limit,
                     args.seed, n_workers=args.workers, log=_log(args))
    if out.first_stage is None:
        print(f"no feasible design found (status: {out.status})", file=sys.stderr)
        return _status_code(out.status) or EXIT_ERROR
    rep = summarize(inst, out.first_stage, args.variant)
    print(f"status            {out.status}")
    print(f"objective         {out.objective:,.2f}")
    print(f"net profit        {rep.objective:,.2f}")
    print(f"revenue (1-way)   {rep.revenue_one_way:,.2f}")
    print(f"revenue (round)   {rep.revenue_round_trip:,.2f}")
    print(f"fixed cost        {rep.cost_fixed:,.2f}")
    print(f"relocation cost   {rep.cost_relocation:,.2f}")
    print(f"subst. discount   {rep.substitution_penalty_paid:,.2f}")
    print(f"regions opened    {rep.regions_opened}")
    print(f"fleet by type     {rep.fleet_by_type}")
    print(f"satisfaction      SR {rep.sr_percent:.1f}%  total {rep.total_percent:.1f}%")
    print(f"wall time         {out.wall_time:.1f}s  nodes {out.nodes}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2)
        print(f"wrote {args.out}")
    return _status_code(out.status)


def _parse_values(text: str):
    vals = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        vals.append(part if part == "disabled" else float(part))
    if not vals:
        raise ValueError("no values given")
    return vals


def _cmd_sweep(args) -> int:
    inst = load_instance(args.instance)
    values = _parse_values(args.values)
    variants = tuple(v.strip() for v in args.variants.split(",") if v.strip())
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}")
    cells = sweep(inst, args.axis, values, variants, method=args.method,
                  time_limit=args.time_limit, seed=args.seed,
                  n_workers=args.workers, log=_log(args))
    text = sweep_csv(cells)
    print(text, end="")
    for msg in check_sweep_monotonicity(cells):
        print(f"warning: monotonicity violated: {msg}", file=sys.stderr)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    worst = max((_status_code(c.status) for c in cells), default=EXIT_OK)
    return worst


def _cmd_benchmark(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    instances = [(path, load_instance(path)) for path in args.instances]
    rows = benchmark(instances, args.variant, methods,
                     time_limit=args.time_limit, seed=args.seed,
                     n_workers=args.workers, log=_log(args))
    print(benchmark_text(rows), end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(benchmark_csv(rows))
    worst = max((_status_code(r.status) for r in rows), default=EXIT_OK)
    return worst


def _infer_grid(n: int, rows: int, cols: int):
    if rows and cols:
        return rows, cols
    side = int(round(n ** 0.5))
    if side * side == n:
        return side, side
    raise ValueError("grid geometry is not square; pass --grid-rows/--grid-cols")


def _cmd_report(args) -> int:
    with open(args.report) as fh:
        rep = SolveReport.from_dict(json.load(fh))
    rows, cols = _infer_grid(rep.n_regions, args.grid_rows, args.grid_cols)
    if args.heatmap:
        with open(args.heatmap, "w") as fh:
            fh.write(heatmap_svg(rep, rows, cols))
        print(f"wrote {args.heatmap}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(heatmap_csv(rep, rows, cols))
        print(f"wrote {args.csv}")
    if not args.heatmap and not args.csv:
        print(json.dumps(rep.to_dict(), indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
