"""Result analytics: operational reports, parameter sweeps, solver benchmarks.

Everything here is derived from a first-stage design by re-solving the
operational second stage per scenario, so the numbers are exact for the
reported design regardless of which solver produced it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .model import (ArcKind, FirstStageSolution, Instance, SubstitutionPolicy,
                    effective_revenue)
from .stnet import build_network
from .formulations import build_def, build_def_base
from .branch_bound import solve_mip, MipOptions, OPTIMAL as MIP_OPTIMAL
from .benders import BendersOptions, benders_solve
from .subproblems import SecondStageSolver, _policy_for

METHODS = ("def", "bc", "bcplus")
VARIANTS = ("base", "substitution")


# ---------------------------------------------------------------------------
# Operational report


@dataclass
class SolveReport:
    """Profit decomposition and service metrics for a first-stage design.

    Money figures are expectations over scenarios scaled by operating days,
    i.e. the same units as the objective. ``revenue_*`` is net of any
    substitution discount (the price actually charged), so

        objective == revenue_total - cost_fixed - cost_relocation

    holds as an identity; ``substitution_penalty_paid`` quantifies the
    discount separately. Percentages are in [0, 100].
    """

    variant: str
    objective: float
    revenue_total: float
    revenue_one_way: float
    revenue_round_trip: float
    cost_fixed: float
    cost_relocation: float
    substitution_penalty_paid: float
    avg_flows: dict                 # arc-kind name -> expected trips/day
    avg_flows_by_commodity: dict    # "uses->serves" -> {kind: expected trips}
    substitution_rates: dict        # "uses->serves" -> % of serves-type demand
    substitution_rate_overall: float
    satisfaction_by_region: list    # % per region
    sr_percent: float               # satisfaction over opened regions
    total_percent: float            # satisfaction over all regions
    fleet_by_type: list
    regions_opened: list
    n_regions: int
    payback_years: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "SolveReport":
        return SolveReport(**d)


def operational_flows(inst: Instance, fs: FirstStageSolution, variant: str,
                      net=None, solver: SecondStageSolver | None = None):
    """Optimal per-scenario flows {(arc_id, commodity) -> count} at (z, x)."""
    net = net or build_network(inst)
    ss = solver or SecondStageSolver(inst, net, _policy_for(inst, variant))
    z = np.array(fs.open, dtype=bool)
    x = np.array(fs.fleet, dtype=float)
    return [ss.solve(z, x, w).flows for w in range(len(inst.scenarios))], net, ss


def summarize(inst: Instance, fs: FirstStageSolution, variant: str = "substitution",
              *, alt_denominator: bool = False, net=None,
              solver: SecondStageSolver | None = None) -> SolveReport:
    """Exact profit decomposition and service metrics for a design.

    ``alt_denominator`` switches the substitution-rate denominator from the
    demanded type's total demand to its satisfied demand.
    """
    if len(fs.open) != inst.n_regions:
        raise ValueError("first-stage solution does not match the instance")
    flows_by_w, net, ss = operational_flows(inst, fs, variant, net, solver)
    policy = ss.policy
    D = inst.operating_days
    n, m = inst.n_regions, inst.n_types

    rev = {ArcKind.ONE_WAY: 0.0, ArcKind.ROUND_TRIP: 0.0}
    cost_reloc = 0.0
    penalty_paid = 0.0
    avg_kind = {k.value: 0.0 for k in
                (ArcKind.ONE_WAY, ArcKind.ROUND_TRIP, ArcKind.RELOCATION)}
    avg_com: dict[str, dict[str, float]] = {}
    subs_num: dict[tuple[int, int], float] = {}
    sat_region = np.zeros(n)
    sat_type = np.zeros(m)

    for w, flows in enumerate(flows_by_w):
        pi = inst.scenarios[w].probability
        for (aid, l_idx), cnt in flows.items():
            if cnt == 0:
                continue
            arc = net.arcs[aid]
            if arc.kind is ArcKind.IDLE:
                continue
            com = policy.commodities[l_idx]
            if arc.kind is ArcKind.RELOCATION:
                cost_reloc += D * pi * (-net.base_revenue(arc, com.uses)) * cnt
                avg_kind[arc.kind.value] += pi * cnt
                continue
            r = effective_revenue(policy, inst.car_types, arc.kind, com,
                                  arc.duration, inst.period_length_hours)
            rev[arc.kind] += D * pi * r * cnt
            hours = arc.duration * inst.period_length_hours
            penalty_paid += D * pi * com.penalty * hours * cnt
            avg_kind[arc.kind.value] += pi * cnt
            key = f"{com.uses}->{com.serves}"
            avg_com.setdefault(key, {})
            avg_com[key][arc.kind.value] = avg_com[key].get(arc.kind.value, 0.0) + pi * cnt
            sat_region[arc.origin[0]] += pi * cnt
            sat_type[com.serves] += pi * cnt
            if com.uses != com.serves:
                subs_num[com.uses, com.serves] = \
                    subs_num.get((com.uses, com.serves), 0.0) + pi * cnt

    dem_region = np.zeros(n)
    dem_type = np.zeros(m)
    for sc in inst.scenarios:
        pi = sc.probability
        for (i, j, k, t, s), d in sc.one_way_demand.items():
            dem_region[i] += pi * d
            dem_type[k] += pi * d
        for (i, k, t, s), d in sc.round_trip_demand.items():
            dem_region[i] += pi * d
            dem_type[k] += pi * d

    open_mask = np.array(fs.open, dtype=bool)
    satisfaction = [
        (100.0 * sat_region[i] / dem_region[i]) if dem_region[i] > 0
        else (100.0 if open_mask[i] else 0.0)
        for i in range(n)
    ]
    def _pct(num, den):
        return 100.0 * num / den if den > 0 else 0.0
    sr = _pct(sat_region[open_mask].sum(), dem_region[open_mask].sum())
    total = _pct(sat_region.sum(), dem_region.sum())

    denom = sat_type if alt_denominator else dem_type
    rates = {f"{k1}->{k2}": _pct(v, denom[k2]) for (k1, k2), v in sorted(subs_num.items())}
    overall = _pct(sum(subs_num.values()), (sat_type if alt_denominator else dem_type).sum())

    cost_fixed = sum(inst.regions[i].fixed_cost for i in range(n) if fs.open[i])
    revenue_total = rev[ArcKind.ONE_WAY] + rev[ArcKind.ROUND_TRIP]
    objective = revenue_total - cost_fixed - cost_reloc
    payback = inst.budget / objective if objective > 0 else None
    return SolveReport(
        variant=variant, objective=objective,
        revenue_total=revenue_total,
        revenue_one_way=rev[ArcKind.ONE_WAY],
        revenue_round_trip=rev[ArcKind.ROUND_TRIP],
        cost_fixed=cost_fixed, cost_relocation=cost_reloc,
        substitution_penalty_paid=penalty_paid,
        avg_flows=avg_kind, avg_flows_by_commodity=avg_com,
        substitution_rates=rates, substitution_rate_overall=overall,
        satisfaction_by_region=satisfaction, sr_percent=sr, total_percent=total,
        fleet_by_type=[fs.total_by_type(k) for k in range(m)],
        regions_opened=[i for i in range(n) if fs.open[i]],
        n_regions=n, payback_years=payback)


# ---------------------------------------------------------------------------
# Uniform solver front end


@dataclass
class SolveOutcome:
    status: str            # optimal / time_limit / node_limit / error
    objective: float
    first_stage: FirstStageSolution | None
    gap: float
    nodes: int
    wall_time: float
    method: str
    variant: str


def run_solver(inst: Instance, variant: str = "substitution",
               method: str = "bcplus", time_limit: float | None = None,
               seed: int = 0, n_workers: int = 1, log=None,
               initial_design: FirstStageSolution | None = None) -> SolveOutcome:
    """Solve with the chosen method.

    ``def``: deterministic equivalent MIP. ``bc``: decomposition with plain
    optimality cuts. ``bcplus``: decomposition with warm start, initial cuts
    and root cuts enabled.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    t0 = time.time()
    if method == "def":
        model = build_def(inst) if variant == "substitution" else build_def_base(inst)
        res = solve_mip(model.mip(), MipOptions(time_limit=time_limit, log=log))
        fs = None
        if res.x is not None:
            z, fleet = model.first_stage(res.x)
            fs = FirstStageSolution(z, fleet)
        return SolveOutcome(res.status, res.objective, fs, res.gap, res.nodes,
                            time.time() - t0, method, variant)
    plus = method == "bcplus"
    opts = BendersOptions(variant=variant, enable_warm_start=plus,
                          enable_initial_cuts=plus, enable_root_cuts=plus,
                          time_limit=time_limit, seed=seed,
                          n_workers=n_workers, log=log,
                          initial_design=initial_design)
    res = benders_solve(inst, opts)
    return SolveOutcome(res.status, res.objective, res.first_stage, res.gap,
                        res.nodes, time.time() - t0, method, variant)


# ---------------------------------------------------------------------------
# Parameter sweeps


@dataclass
class SweepCell:
    axis: str
    value: float | str          # numeric, or "disabled" on the penalty axis
    variant: str
    status: str
    objective: float
    regions_opened: int
    fleet_by_type: list
    achieved_increase: str      # percent string, or "-" when undefined
    wall_time: float


def sweep(inst: Instance, axis: str, values, variants=VARIANTS,
          method: str = "bcplus", time_limit: float | None = None,
          seed: int = 0, n_workers: int = 1, log=None) -> list[SweepCell]:
    """Re-solve across one parameter axis.

    ``budget`` and ``carbon`` axes run every requested variant; the
    ``penalty`` axis always runs the substitution variant, with the string
    value "disabled" meaning substitution switched off entirely.
    """
    if axis not in ("budget", "carbon", "penalty"):
        raise ValueError("axis must be budget, carbon or penalty")
    if axis == "penalty":
        variants = ("substitution",)
    values = list(values)

    # Solve each variant's cells in the direction along which the feasible
    # set only grows (budget/allowance up; penalty down, "disabled" being an
    # infinite penalty). The previous cell's design is then feasible for the
    # next cell and seeds it, so a time-limited cell never reports a worse
    # objective than its predecessor's design already attains.
    def chain_key(value):
        if axis == "penalty":
            return -np.inf if isinstance(value, str) else -float(value)
        return float(value)

    done: dict[tuple, SweepCell] = {}
    for variant in variants:
        prev_design = None
        for value in sorted(values, key=chain_key):
            mod, var = _apply_axis(inst, axis, value, variant)
            t0 = time.time()
            out = run_solver(mod, var, method, time_limit, seed,
                             n_workers=n_workers, log=log,
                             initial_design=prev_design)
            if out.first_stage is not None:
                prev_design = out.first_stage
            fs = out.first_stage
            done[(repr(value), variant)] = SweepCell(
                axis=axis, value=value, variant=variant, status=out.status,
                objective=out.objective,
                regions_opened=sum(fs.open) if fs else 0,
                fleet_by_type=[fs.total_by_type(k) for k in range(inst.n_types)]
                if fs else [],
                achieved_increase="-", wall_time=time.time() - t0)
    cells = [done[(repr(value), variant)]
             for value in values for variant in variants]
    if axis == "penalty":
        _fill_achieved_increase(cells)
    return cells


def _apply_axis(inst, axis, value, variant):
    if axis == "budget":
        return inst.with_params(budget=float(value)), variant
    if axis == "carbon":
        return inst.with_params(carbon_allowance=float(value)), variant
    if isinstance(value, str) and value == "disabled":
        return inst, "base"
    pol = SubstitutionPolicy.full(inst.n_types, float(value))
    return inst.with_params(substitution=pol), "substitution"


def _fill_achieved_increase(cells):
    """Percent of the maximum attainable gain realized at each penalty level.

    100 * (obj(p) - obj(disabled)) / (obj(p_min) - obj(disabled)), with the
    smallest numeric penalty in the sweep standing in for p -> 0. Dash when
    the references are absent or the span is numerically zero.
    """
    base = next((c.objective for c in cells if c.value == "disabled"), None)
    numeric = [c for c in cells if not isinstance(c.value, str)]
    if base is None or not numeric:
        return
    p_min_cell = min(numeric, key=lambda c: float(c.value))
    span = p_min_cell.objective - base
    for c in cells:
        if isinstance(c.value, str):
            continue
        if abs(span) < 1e-9 * (1 + abs(base)):
            c.achieved_increase = "100.0" if abs(c.objective - base) < 1e-6 * (1 + abs(base)) else "-"
        else:
            c.achieved_increase = f"{100.0 * (c.objective - base) / span:.1f}"


def check_sweep_monotonicity(cells: list[SweepCell], rel_tol: float = 1e-6):
    """Violations of the containment-implied monotonicities.

    Objectives must be non-decreasing in budget and carbon allowance and
    non-increasing in the substitution penalty (with "disabled" treated as
    the largest penalty). Returns human-readable violation strings.
    """
    out = []
    by_variant: dict[str, list[SweepCell]] = {}
    for c in cells:
        if c.status not in ("optimal",):
            continue
        by_variant.setdefault(c.variant if c.axis != "penalty" else "substitution",
                              []).append(c)
    for variant, vc in by_variant.items():
        axis = vc[0].axis
        if axis == "penalty":
            key = lambda c: (np.inf if isinstance(c.value, str) else float(c.value))
            ordered = sorted(vc, key=key)
            for a, b in zip(ordered, ordered[1:]):
                if b.objective > a.objective + 1e-6 * (1 + abs(a.objective)):
                    out.append(f"penalty {a.value}->{b.value}: objective rose "
                               f"{a.objective:.2f} -> {b.objective:.2f}")
        else:
            ordered = sorted(vc, key=lambda c: float(c.value))
            for a, b in zip(ordered, ordered[1:]):
                if b.objective < a.objective - 1e-6 * (1 + abs(a.objective)):
                    out.append(f"{axis} {a.value}->{b.value} ({variant}): objective fell "
                               f"{a.objective:.2f} -> {b.objective:.2f}")
    return out


def sweep_csv(cells: list[SweepCell]) -> str:
    lines = ["axis,value,variant,status,objective,regions_opened,fleet_by_type,"
             "achieved_increase_pct,wall_seconds"]
    for c in cells:
        fleet = "/".join(str(v) for v in c.fleet_by_type)
        lines.append(f"{c.axis},{c.value},{c.variant},{c.status},"
                     f"{c.objective:.2f},{c.regions_opened},{fleet},"
                     f"{c.achieved_increase},{c.wall_time:.2f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solver benchmark


@dataclass
class BenchmarkRow:
    instance: str
    method: str
    variant: str
    status: str
    objective: float
    gap: float
    seconds: float
    nodes: int

    @property
    def st_text(self) -> str:
        return "TL" if self.status == "time_limit" else f"{self.seconds:.2f}"

    @property
    def gap_text(self) -> str:
        if self.status == "optimal":
            return "0.00"
        if self.first_found and np.isfinite(self.gap):
            return f"{100.0 * self.gap:.2f}"
        return "N/A"

    @property
    def first_found(self) -> bool:
        return np.isfinite(self.objective)


def benchmark(instances, variant: str = "substitution", methods=METHODS,
              time_limit: float | None = 300.0, seed: int = 0,
              n_workers: int = 1, log=None) -> list[BenchmarkRow]:
    """Run every method on every (label, instance) pair."""
    rows = []
    for label, inst in instances:
        for method in methods:
            out = run_solver(inst, variant, method, time_limit, seed,
                             n_workers=n_workers)
            rows.append(BenchmarkRow(label, method, variant, out.status,
                                     out.objective, out.gap, out.wall_time,
                                     out.nodes))
            if log is not None:
                print(f"benchmark {label} {method}: {out.status} "
                      f"obj={out.objective:.2f} {out.wall_time:.1f}s", file=log)
    return rows


def benchmark_text(rows: list[BenchmarkRow]) -> str:
    """Fixed-width comparison table; the fastest solved cell per instance is
    marked with an asterisk, time-limited cells show TL and N/A per custom."""
    by_inst: dict[str, list[BenchmarkRow]] = {}
    for r in rows:
        by_inst.setdefault(r.instance, []).append(r)
    lines = [f"{'instance':<22}{'method':<9}{'objective':>14}{'ST(s)':>10}{'Gap(%)':>9}{'nodes':>8}"]
    for label, group in by_inst.items():
        solved = [r for r in group if r.status == "optimal"]
        best = min(solved, key=lambda r: r.seconds) if solved else None
        for r in group:
            obj = f"{r.objective:.2f}" if r.first_found else "N/A"
            st = r.st_text + ("*" if best is r else "")
            lines.append(f"{label:<22}{r.method:<9}{obj:>14}{st:>10}{r.gap_text:>9}{r.nodes:>8}")
    return "\n".join(lines) + "\n"


def benchmark_csv(rows: list[BenchmarkRow]) -> str:
    lines = ["instance,method,variant,status,objective,st_seconds,gap_pct,nodes"]
    for r in rows:
        obj = f"{r.objective:.4f}" if r.first_found else "N/A"
        lines.append(f"{r.instance},{r.method},{r.variant},{r.status},{obj},"
                     f"{r.st_text},{r.gap_text},{r.nodes}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Demand-satisfaction heat grid


def region_label(i: int, grid_cols: int) -> str:
    """Row-major grid labels: 1-a, 1-b, ..., 2-a, ... (row number, column letter)."""
    return f"{i // grid_cols + 1}-{chr(ord('a') + i % grid_cols)}"


def heatmap_csv(report: SolveReport, grid_rows: int, grid_cols: int) -> str:
    if grid_rows * grid_cols != report.n_regions:
        raise ValueError("grid does not match the number of regions")
    lines = ["region,satisfaction_pct,opened"]
    opened = set(report.regions_opened)
    for i in range(report.n_regions):
        sat = report.satisfaction_by_region[i] if i in opened else 0.0
        lines.append(f"{region_label(i, grid_cols)},{sat:.4f},{int(i in opened)}")
    return "\n".join(lines) + "\n"


def heatmap_svg(report: SolveReport, grid_rows: int, grid_cols: int,
                cell: int = 80) -> str:
    """Grey-scale grid, darker = higher satisfaction; closed regions are
    hatch-marked white cells."""
    if grid_rows * grid_cols != report.n_regions:
        raise ValueError("grid does not match the number of regions")
    opened = set(report.regions_opened)
    pad = 30
    wpx = grid_cols * cell + 2 * pad
    hpx = grid_rows * cell + 2 * pad
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{wpx}" height="{hpx}">',
           '<defs><pattern id="closed" width="8" height="8" patternUnits="userSpaceOnUse">'
           '<path d="M0,8 L8,0" stroke="#999" stroke-width="1"/></pattern></defs>']
    for i in range(report.n_regions):
        r, c = divmod(i, grid_cols)
        x0, y0 = pad + c * cell, pad + r * cell
        if i in opened:
            sat = max(0.0, min(100.0, report.satisfaction_by_region[i]))
            shade = int(round(235 - 1.85 * sat))  # 0% -> light, 100% -> dark
            fill = f"rgb({shade},{shade},{shade})"
        else:
            sat = 0.0
            fill = "url(#closed)"
        out.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" '
                   f'fill="{fill}" stroke="black"/>')
        text_fill = "white" if i in opened and sat > 55 else "black"
        out.append(f'<text x="{x0 + cell / 2}" y="{y0 + cell / 2 - 6}" '
                   f'text-anchor="middle" font-size="13" fill="{text_fill}">'
                   f'{region_label(i, grid_cols)}</text>')
        out.append(f'<text x="{x0 + cell / 2}" y="{y0 + cell / 2 + 12}" '
                   f'text-anchor="middle" font-size="12" fill="{text_fill}">'
                   f'{sat:.0f}%</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
