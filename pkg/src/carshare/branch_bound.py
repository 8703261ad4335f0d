"""Branch-and-bound for mixed-integer programs over the simplex engine.

Supports lazy constraint callbacks (called on every integer-feasible
candidate, which is what a single-tree Benders decomposition needs) and user
cut callbacks applied at the root relaxation. Node selection is best-bound;
branching picks the most fractional integer variable.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, TextIO

import numpy as np

from .simplex import (DEFAULT_TOLS, INFEASIBLE, ITERATION_LIMIT, NUMERICAL,
                      OPTIMAL, UNBOUNDED, LinearProgram, LpState, Tolerances,
                      solve_lp)

TIME_LIMIT = "time_limit"
NODE_LIMIT = "node_limit"


@dataclass(frozen=True)
class CutRequest:
    """A violated constraint returned by a callback, in row form."""

    coefs: dict
    sense: str
    rhs: float
    name: str = ""


@dataclass
class MipModel:
    lp: LinearProgram
    integer: list  # variable indices required integral
    crash: Optional[np.ndarray] = None  # row -> column of a feasible start basis

    def is_integral(self, x, tol: float) -> bool:
        xi = x[self.integer]
        return bool(np.all(np.abs(xi - np.round(xi)) <= tol))


@dataclass
class MipOptions:
    time_limit: Optional[float] = None
    node_limit: Optional[int] = None
    rel_gap: float = 1e-6
    tols: Tolerances = DEFAULT_TOLS
    lazy_callback: Optional[Callable] = None  # f(x, obj) -> list[CutRequest]
    user_cut_callback: Optional[Callable] = None  # f(x, obj) -> list[CutRequest]
    heuristic_callback: Optional[Callable] = None  # f(x, obj) -> vector | None
    heuristic_every: int = 50     # try the heuristic every N nodes
    warm_start: Optional[np.ndarray] = None
    log: Optional[TextIO] = None
    log_every: int = 50


@dataclass
class MipResult:
    status: str
    objective: float = np.nan
    x: Optional[np.ndarray] = None
    best_bound: float = np.nan
    nodes: int = 0
    lazy_cuts: int = 0
    user_cuts: int = 0
    gap: float = np.nan
    wall_time: float = 0.0


def _pad_state(state, lp):
    """Extend a basis snapshot over rows appended since it was taken.

    New rows (callback cuts) enter with their slacks basic: the old optimum
    stays dual feasible and the dual simplex repairs any cut violation."""
    if state is None:
        return None
    grown = lp.n_rows - len(state.active)
    if grown == 0:
        return state
    new_rows = np.arange(len(state.active), lp.n_rows)
    return LpState(
        np.concatenate([state.active, np.ones(grown, dtype=bool)]),
        np.concatenate([state.basis, lp.n_vars + new_rows]),
        np.concatenate([state.at_upper, np.zeros(grown, dtype=bool)]))


def _round_integral(x, integer, tol):
    out = x.copy()
    xi = np.round(out[integer])
    out[integer] = xi
    return out


def solve_mip(model: MipModel, options: MipOptions | None = None) -> MipResult:
    """Branch-and-bound search. Cuts from callbacks are added globally."""
    opt = options or MipOptions()
    lp = model.lp
    tols = opt.tols
    itol = tols.integrality
    t0 = time.monotonic()
    maximize = lp.sense == "max"
    better = (lambda a, b: a > b) if maximize else (lambda a, b: a < b)
    worst = -np.inf if maximize else np.inf

    incumbent = None
    inc_obj = worst
    n_lazy = 0
    n_user = 0
    nodes = 0
    active_mask = None  # lazy-row activations carried across node solves

    last_state = None  # optimal bases stay dual feasible across bound changes

    def _solve(lbv, ubv):
        nonlocal active_mask, last_state
        if active_mask is not None and len(active_mask) < lp.n_rows:
            active_mask = np.concatenate(
                [active_mask, np.zeros(lp.n_rows - len(active_mask), dtype=bool)])
        start = _pad_state(last_state, lp)
        sol = solve_lp(lp, lb=lbv, ub=ubv, tols=tols, initial_active=active_mask,
                       start=start, crash=model.crash)
        if sol.status in (NUMERICAL, ITERATION_LIMIT):
            # Retry from scratch: a fresh two-phase pass takes a different
            # path than the warm/crash attempts and usually recovers.
            last_state = None
            sol = solve_lp(lp, lb=lbv, ub=ubv, tols=tols,
                           initial_active=active_mask)
        if sol.active_rows is not None:
            active_mask = sol.active_rows
        if sol.state is not None:
            last_state = sol.state
        return sol

    def _log(event, bound, extra=""):
        if opt.log is None:
            return
        gap = _gap(bound, inc_obj)
        inc = f"{inc_obj:.6g}" if incumbent is not None else "-"
        opt.log.write(f"node={nodes} event={event} bound={bound:.6g} "
                      f"incumbent={inc} gap={gap:.3e} cuts={n_lazy + n_user}{extra}\n")

    def _gap(bound, inc):
        if not np.isfinite(inc) or not np.isfinite(bound):
            return np.inf
        return abs(bound - inc) / max(1.0, abs(bound))

    # Validate a supplied starting solution before adopting it as incumbent.
    if opt.warm_start is not None:
        ws = np.asarray(opt.warm_start, dtype=float)
        if _feasible_point(lp, model, ws, tols):
            wobj = float(np.asarray(lp.obj) @ ws)
            cuts = opt.lazy_callback(ws, wobj) if opt.lazy_callback else []
            for cut in cuts:
                lp.add_row(cut.coefs, cut.sense, cut.rhs, name=cut.name)
                n_lazy += 1
            if not cuts:
                incumbent = ws
                inc_obj = wobj

    _, _, _, _, _, base_lb, base_ub = lp.compiled()
    root = _solve(base_lb, base_ub)
    if root.status == INFEASIBLE:
        return MipResult(INFEASIBLE, nodes=1, wall_time=time.monotonic() - t0)
    if root.status == UNBOUNDED:
        return MipResult(UNBOUNDED, nodes=1, wall_time=time.monotonic() - t0)
    if root.status in (ITERATION_LIMIT, NUMERICAL):
        return MipResult(root.status, nodes=1, wall_time=time.monotonic() - t0)

    # Optional rounds of user cuts to tighten the root relaxation.
    if opt.user_cut_callback is not None:
        stall = 0
        prev = root.objective
        while stall < 3:
            cuts = opt.user_cut_callback(root.x, root.objective)
            if not cuts:
                break
            for cut in cuts:
                lp.add_row(cut.coefs, cut.sense, cut.rhs, name=cut.name)
                n_user += 1
            root = _solve(base_lb, base_ub)
            if root.status != OPTIMAL:
                break
            if abs(prev - root.objective) <= 1e-4 * (1.0 + abs(prev)):
                stall += 1
            else:
                stall = 0
            prev = root.objective

    # Heap of (key, tiebreak, lb, ub, bound); key orders best bound first.
    counter = 0
    heap = []

    def _push(lbv, ubv, bound):
        nonlocal counter
        key = -bound if maximize else bound
        heapq.heappush(heap, (key, counter, lbv, ubv, bound))
        counter += 1

    _push(base_lb, base_ub, root.objective if root.status == OPTIMAL else worst)

    status = OPTIMAL
    best_bound = root.objective
    while heap:
        if opt.time_limit is not None and time.monotonic() - t0 > opt.time_limit:
            status = TIME_LIMIT
            break
        if opt.node_limit is not None and nodes >= opt.node_limit:
            status = NODE_LIMIT
            break
        key, _, lbv, ubv, parent_bound = heapq.heappop(heap)
        best_bound = parent_bound
        if incumbent is not None and not better(parent_bound, inc_obj):
            best_bound = inc_obj
            break  # best-bound order: nothing left can improve
        nodes += 1

        sol = _solve(lbv, ubv)
        if sol.status == INFEASIBLE:
            continue
        if sol.status != OPTIMAL:
            status = sol.status
            break
        obj = sol.objective
        if incumbent is not None and (not better(obj, inc_obj)
                                      or _gap(obj, inc_obj) <= opt.rel_gap):
            continue

        if model.is_integral(sol.x, itol):
            cand = _round_integral(sol.x, model.integer, itol)
            cobj = float(np.asarray(lp.obj) @ cand)
            cuts = opt.lazy_callback(cand, cobj) if opt.lazy_callback else []
            if cuts:
                for cut in cuts:
                    lp.add_row(cut.coefs, cut.sense, cut.rhs, name=cut.name)
                    n_lazy += 1
                _push(lbv, ubv, obj)  # re-solve this subproblem with the cuts
                continue
            if incumbent is None or better(cobj, inc_obj):
                incumbent = cand
                inc_obj = cobj
                _log("incumbent", obj)
            continue

        # Periodic primal heuristic: let the caller propose a full integral
        # point built from this fractional relaxation.
        if (opt.heuristic_callback is not None and opt.heuristic_every
                and nodes % opt.heuristic_every == 0):
            cand = opt.heuristic_callback(sol.x, obj)
            if cand is not None:
                cand = np.asarray(cand, dtype=float)
                if _feasible_point(lp, model, cand, tols):
                    cobj = float(np.asarray(lp.obj) @ cand)
                    if incumbent is None or better(cobj, inc_obj):
                        cuts = (opt.lazy_callback(cand, cobj)
                                if opt.lazy_callback else [])
                        for cut in cuts:
                            lp.add_row(cut.coefs, cut.sense, cut.rhs,
                                       name=cut.name)
                            n_lazy += 1
                        if not cuts:
                            incumbent = cand
                            inc_obj = cobj
                            _log("heuristic", obj)

        # Branch on the most fractional integer variable.
        xi = sol.x[model.integer]
        frac = np.abs(xi - np.round(xi))
        fscore = np.minimum(frac, 1.0 - frac)
        pick = int(np.argmax(fscore))
        j = model.integer[pick]
        xv = sol.x[j]
        lo = np.floor(xv)

        lb_up = lbv.copy()
        lb_up[j] = lo + 1.0
        ub_dn = ubv.copy()
        ub_dn[j] = lo
        if lb_up[j] <= ubv[j]:
            _push(lb_up, ubv, obj)
        if ub_dn[j] >= lbv[j]:
            _push(lbv, ub_dn, obj)

        if nodes % opt.log_every == 0:
            _log("node", obj)

    wall = time.monotonic() - t0
    if status == OPTIMAL and heap:
        # Left the loop via bound-based stop; remaining nodes cannot improve.
        pass
    if incumbent is None:
        if status == OPTIMAL:
            status = INFEASIBLE
        return MipResult(status, nodes=nodes, lazy_cuts=n_lazy, user_cuts=n_user,
                         best_bound=best_bound, wall_time=wall)
    if status == OPTIMAL:
        best_bound = inc_obj
    gap = abs(best_bound - inc_obj) / max(1.0, abs(best_bound))
    res = MipResult(status, objective=inc_obj, x=incumbent, best_bound=best_bound,
                    nodes=nodes, lazy_cuts=n_lazy, user_cuts=n_user, gap=gap,
                    wall_time=wall)
    _log("done", best_bound)
    return res


def _feasible_point(lp: LinearProgram, model: MipModel, x, tols: Tolerances) -> bool:
    A, senses, rhs, _, _, lb, ub = lp.compiled()
    if len(x) != lp.n_vars:
        return False
    if np.any(x < lb - tols.feasibility) or np.any(x > ub + tols.feasibility):
        return False
    if not model.is_integral(x, tols.integrality):
        return False
    resid = A @ x
    tol = tols.feasibility * (1.0 + np.abs(rhs))
    if np.any((senses == "<") & (resid > rhs + tol)):
        return False
    if np.any((senses == ">") & (resid < rhs - tol)):
        return False
    if np.any((senses == "=") & (np.abs(resid - rhs) > tol)):
        return False
    return True
