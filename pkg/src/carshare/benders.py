"""Multicut Benders branch-and-cut for both program variants.

One master MIP over (z, x, Q_1..Q_|W|) is solved in a single search tree;
every integer candidate triggers the scenario subproblems, and each scenario
whose value variable overestimates the true second-stage revenue receives
its own optimality cut (multicut). The second stage is always feasible
(idle everything), so no feasibility cuts exist.

Optional accelerations:
  (i)  warm start — first stage of a single-scenario restriction of the
       problem, used as the initial incumbent;
  (ii) initial cuts — the optimality cuts generated at the warm-start point
       are added to the master before the search begins;
  (iii) root cuts — rounds of cuts separated at the (fractional) root
       relaxation, off by default.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from .branch_bound import MipOptions, TIME_LIMIT, solve_mip
from .formulations import MasterModel, build_master, build_network
from .model import FirstStageSolution, Instance, Scenario
from .simplex import DEFAULT_TOLS, OPTIMAL, Tolerances
from .subproblems import (OptimalityCut, SecondStageSolver, _policy_for,
                          build_optimality_cut, upper_bound_Uw)


@dataclass
class BendersOptions:
    variant: str = "substitution"
    enable_warm_start: bool = True
    enable_initial_cuts: bool = True
    enable_root_cuts: bool = False
    cut_tolerance: float = 1e-6
    time_limit: Optional[float] = None
    rel_gap: float = 1e-6
    seed: int = 0
    # A known-feasible design used as the starting incumbent instead of the
    # single-scenario warm start (e.g. the previous point of a sweep).
    initial_design: Optional[FirstStageSolution] = None
    n_workers: int = 1
    log: Optional[TextIO] = None
    tols: Tolerances = DEFAULT_TOLS

    def __post_init__(self):
        if self.cut_tolerance <= 0:
            raise ValueError("cut tolerance must be positive")


@dataclass
class BendersResult:
    status: str
    first_stage: Optional[FirstStageSolution]
    objective: float
    gap: float
    theta: np.ndarray           # per-scenario second-stage values at the end
    cuts_lazy: int
    cuts_initial: int
    cuts_root: int
    nodes: int
    wall_time: float
    timings: dict = field(default_factory=dict)


def warm_start(inst: Instance, variant: str = "substitution", seed: int = 0,
               time_limit: Optional[float] = None) -> FirstStageSolution:
    """First stage of the single-scenario problem for one random scenario.

    The single-scenario problem is itself solved by a plain cut loop (no
    nested enhancements), which scales far better than its deterministic
    equivalent would."""
    rng = np.random.default_rng(seed)
    w = int(rng.integers(0, len(inst.scenarios)))
    sc = inst.scenarios[w]
    single = inst.with_scenarios(
        [Scenario(1.0, sc.one_way_demand, sc.round_trip_demand)])
    res = benders_solve(single, BendersOptions(
        variant=variant, enable_warm_start=False, enable_initial_cuts=False,
        enable_root_cuts=True, time_limit=time_limit, seed=seed))
    if res.first_stage is not None:
        return res.first_stage
    n, m = inst.n_regions, inst.n_types
    return FirstStageSolution(tuple([False] * n),
                              tuple(tuple([0] * m) for _ in range(n)))


class _SubproblemPool:
    """Per-scenario solves, optionally fanned out to a thread pool."""

    def __init__(self, inst, net, policy, n_workers, tols):
        self.inst, self.net = inst, net
        self.n_workers = max(1, n_workers)
        self.solvers = [SecondStageSolver(inst, net, policy, tols)
                        for _ in range(self.n_workers)]
        self.pool = (ThreadPoolExecutor(self.n_workers)
                     if self.n_workers > 1 else None)
        self.wall = 0.0

    def solve_all(self, z, x):
        t0 = time.monotonic()
        nw = len(self.inst.scenarios)
        out = [None] * nw
        if self.pool is None:
            for w in range(nw):
                out[w] = self.solvers[0].solve(z, x, w)
        else:
            def run(slot, ws):
                for w in ws:
                    out[w] = self.solvers[slot].solve(z, x, w)
            chunks = [list(range(nw))[i::self.n_workers]
                      for i in range(self.n_workers)]
            futs = [self.pool.submit(run, s, ws) for s, ws in enumerate(chunks)]
            for f in futs:
                f.result()
        self.wall += time.monotonic() - t0
        return out

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def initial_cuts(pool: _SubproblemPool, master: MasterModel,
                 ws: FirstStageSolution) -> list[OptimalityCut]:
    """Optimality cuts generated at a given first stage, one per scenario."""
    sols = pool.solve_all(ws.open, ws.fleet)
    return [build_optimality_cut(s.duals, pool.inst, pool.net) for s in sols]


def benders_solve(inst: Instance, options: BendersOptions | None = None) -> BendersResult:
    opt = options or BendersOptions()
    t_start = time.monotonic()
    policy = _policy_for(inst, opt.variant)
    net = build_network(inst)
    pool = _SubproblemPool(inst, net, policy, opt.n_workers, opt.tols)
    n, m = inst.n_regions, inst.n_types
    nw = len(inst.scenarios)

    t0 = time.monotonic()
    Uw = [upper_bound_Uw(inst, w, variant=opt.variant, net=net) for w in range(nw)]
    master = build_master(inst, Uw)
    vx = master.vindex
    t_build = time.monotonic() - t0

    def log(line):
        if opt.log is not None:
            opt.log.write(line + "\n")

    # Enhancements (i) and (ii).
    t0 = time.monotonic()
    warm_vec = None
    n_initial = 0
    if opt.enable_warm_start or opt.enable_initial_cuts:
        if opt.initial_design is not None:
            ws = opt.initial_design
        else:
            ws_budget = None
            if opt.time_limit is not None:
                ws_budget = max(1.0, min(0.25 * _remaining(opt.time_limit,
                                                           t_start), 120.0))
            ws = warm_start(inst, opt.variant, opt.seed, ws_budget)
        sols = pool.solve_all(ws.open, ws.fleet)
        if opt.enable_initial_cuts:
            for s in sols:
                cut = build_optimality_cut(s.duals, inst, net)
                req = cut.as_row(vx)
                master.lp.add_row(req.coefs, req.sense, req.rhs, name=req.name)
                n_initial += 1
        if opt.enable_warm_start:
            warm_vec = np.zeros(master.lp.n_vars)
            for i in range(n):
                warm_vec[vx["z", i]] = 1.0 if ws.open[i] else 0.0
                for k in range(m):
                    warm_vec[vx["x", i, k]] = ws.fleet[i][k]
            for w, s in enumerate(sols):
                warm_vec[vx["Q", w]] = s.objective
            log(f"warm_start obj_estimate={_master_value(inst, ws, sols):.6g}")
    t_warm = time.monotonic() - t0

    def lazy(xvec, obj):
        z = tuple(xvec[vx["z", i]] > 0.5 for i in range(n))
        fleet = tuple(tuple(int(round(xvec[vx["x", i, k]])) for k in range(m))
                      for i in range(n))
        sols = pool.solve_all(z, fleet)
        cuts = []
        for w, s in enumerate(sols):
            qhat = xvec[vx["Q", w]]
            if qhat > s.objective + opt.cut_tolerance * (1.0 + abs(s.objective)):
                cuts.append(build_optimality_cut(s.duals, inst, net).as_row(vx))
        return cuts

    def root(xvec, obj):
        # Fractional (z, x) still yields valid cuts: the subproblem LP is
        # parametric in the first stage and weak duality needs no integrality.
        z = [float(xvec[vx["z", i]]) for i in range(n)]
        fleet = [[float(xvec[vx["x", i, k]]) for k in range(m)] for i in range(n)]
        sols = pool.solve_all(_frac_open(z), fleet)
        cuts = []
        for w, s in enumerate(sols):
            qhat = xvec[vx["Q", w]]
            if qhat > s.objective + opt.cut_tolerance * (1.0 + abs(s.objective)):
                cuts.append(build_optimality_cut(s.duals, inst, net).as_row(vx))
        return cuts

    emis = [ct.emission - inst.carbon_allowance for ct in inst.car_types]
    tried = set()

    def heuristic(xvec, obj):
        # Round the fractional node: open clearly-open regions, floor the
        # fleet, then shed high-emission cars until the fleet average is
        # back under the allowance. Second-stage values are computed
        # exactly, so the candidate needs no further cuts.
        z = [bool(xvec[vx["z", i]] > 0.5) for i in range(n)]
        fleet = [[int(np.floor(xvec[vx["x", i, k]] + 1e-9)) if z[i] else 0
                  for k in range(m)] for i in range(n)]
        order = sorted(((i, k) for i in range(n) for k in range(m)
                        if emis[k] > 0), key=lambda ik: -emis[ik[1]])
        excess = sum(emis[k] * fleet[i][k] for i in range(n) for k in range(m))
        for i, k in order:
            while excess > 1e-9 and fleet[i][k] > 0:
                fleet[i][k] -= 1
                excess -= emis[k]
        key = (tuple(z), tuple(map(tuple, fleet)))
        if key in tried:
            return None
        tried.add(key)
        sols = pool.solve_all(tuple(z), tuple(map(tuple, fleet)))
        cand = np.zeros(master.lp.n_vars)
        for i in range(n):
            cand[vx["z", i]] = 1.0 if z[i] else 0.0
            for k in range(m):
                cand[vx["x", i, k]] = fleet[i][k]
        for w, s in enumerate(sols):
            cand[vx["Q", w]] = s.objective
        return cand

    mip_opt = MipOptions(time_limit=_remaining(opt.time_limit, t_start),
                         rel_gap=opt.rel_gap, tols=opt.tols,
                         lazy_callback=lazy,
                         user_cut_callback=root if opt.enable_root_cuts else None,
                         heuristic_callback=heuristic, heuristic_every=25,
                         warm_start=warm_vec, log=opt.log)
    res = solve_mip(master.mip(), mip_opt)
    wall = time.monotonic() - t_start

    if res.x is None:
        return BendersResult(res.status, None, np.nan, np.nan, np.full(nw, np.nan),
                             res.lazy_cuts, n_initial, res.user_cuts, res.nodes,
                             wall, {"build": t_build, "warm": t_warm,
                                    "subproblems": pool.wall})
    z, fleet = _first_stage_from(res.x, vx, n, m)
    fs = FirstStageSolution(z, fleet)
    sols = pool.solve_all(z, fleet)
    theta = np.array([s.objective for s in sols])
    objective = _master_value(inst, fs, sols)
    pool.close()
    return BendersResult(res.status, fs, objective, res.gap, theta,
                         res.lazy_cuts, n_initial, res.user_cuts, res.nodes, wall,
                         {"build": t_build, "warm": t_warm,
                          "subproblems": pool.wall,
                          "master": wall - pool.wall - t_build})


def _frac_open(z):
    # The subproblem treats z multiplicatively in bounds/rhs; booleans or
    # fractions both work, but guard exact zeros for closed regions.
    return z


def _first_stage_from(xvec, vx, n, m):
    z = tuple(xvec[vx["z", i]] > 0.5 for i in range(n))
    fleet = tuple(tuple(int(round(xvec[vx["x", i, k]])) for k in range(m))
                  for i in range(n))
    return z, fleet


def _master_value(inst, fs: FirstStageSolution, sols) -> float:
    fixed = sum(r.fixed_cost for r, open_ in zip(inst.regions, fs.open) if open_)
    rev = inst.operating_days * sum(sc.probability * s.objective
                                    for sc, s in zip(inst.scenarios, sols))
    return rev - fixed


def _remaining(limit, t_start):
    if limit is None:
        return None
    return max(0.0, limit - (time.monotonic() - t_start))
