"""Second-stage solves, dual extraction, and optimality-cut construction.

For a fixed first stage (z, x) the second stage decomposes by scenario into
max-revenue flow LPs on the spatial-temporal network. Their constraint
matrices are totally unimodular, so the basic optimal solutions found by the
simplex engine are integral.

Performance notes. Row counts dominate simplex cost, so every capacity
constraint whose left-hand side is a single variable (all of them without
substitution; idle arcs and single-commodity demand groups with it) is folded
into a variable bound, and the remaining multi-commodity demand rows are
activated lazily. Duals for folded rows are recovered from reduced costs,
duals for never-activated rows are zero; both are feasible for the explicit
dual program, which is what cut validity rests on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .branch_bound import CutRequest
from .model import (ArcKind, Instance, SubstitutionPolicy, effective_revenue)
from .simplex import DEFAULT_TOLS, INF, OPTIMAL, LinearProgram, Tolerances, solve_lp
from .stnet import SpatialTemporalNetwork, build_network
from .formulations import VariableIndex, flow_groups, _identity_index


def _policy_for(inst: Instance, variant: str) -> SubstitutionPolicy:
    if variant == "base":
        return SubstitutionPolicy.identity(inst.n_types)
    if variant == "substitution":
        return inst.substitution
    raise ValueError(f"variant must be 'base' or 'substitution', got {variant!r}")


@dataclass
class DualSolution:
    """Duals of one scenario subproblem, in the sign convention of the
    explicit dual program (balance free; all capacity duals >= 0)."""

    scenario: int
    beta: dict    # (i, t, k) -> float
    alpha: dict   # (arc_id, demand_type) -> float, round-trip caps
    gamma1: dict  # (arc_id, demand_type) -> float, one-way origin caps
    gamma2: dict  # (arc_id, demand_type) -> float, one-way destination caps
    lam: dict     # (arc_id, car_type) -> float, idle caps
    objective: float = np.nan


@dataclass
class SecondStageSolution:
    objective: float
    flows: dict  # (arc_id, commodity_idx) -> int
    duals: DualSolution
    status: str = OPTIMAL
    iterations: int = 0


@dataclass(frozen=True)
class OptimalityCut:
    """Affine inequality  sum coef·(z, x) − Q_w >= 0  valid for all feasible
    first stages by LP weak duality."""

    scenario: int
    coef_x: dict  # (i, k) -> float
    coef_z: dict  # i -> float

    def value(self, z, x) -> float:
        """The cut's upper estimate of the scenario value at (z, x)."""
        tot = sum(c * x[i][k] for (i, k), c in self.coef_x.items())
        tot += sum(c * (1.0 if z[i] else 0.0) for i, c in self.coef_z.items())
        return tot

    def as_row(self, vindex: VariableIndex) -> CutRequest:
        coefs = {vindex["Q", self.scenario]: -1.0}
        for (i, k), c in self.coef_x.items():
            if c != 0.0:
                coefs[vindex["x", i, k]] = c
        for i, c in self.coef_z.items():
            if c != 0.0:
                coefs[vindex["z", i]] = c
        # Normalize: raw coefficients span ~1 (the Q column) to ~1e6 (dual
        # prices times demand); equilibrated rows keep master bases
        # well-conditioned.
        scale = max(abs(c) for c in coefs.values())
        if scale > 1.0:
            coefs = {j: c / scale for j, c in coefs.items()}
        return CutRequest(coefs, ">", 0.0, name=f"opt_cut_w{self.scenario}")


class SecondStageSolver:
    """Repeated second-stage solves against a fixed instance and network.

    The per-scenario LP skeleton is built once; each solve only rewrites
    bounds and right-hand sides. Lazy-row activations are remembered across
    calls, which pays off inside Benders where consecutive first stages are
    similar. Instances of this class are not thread-safe; use one per worker.
    """

    def __init__(self, inst: Instance, net: SpatialTemporalNetwork | None = None,
                 policy: SubstitutionPolicy | None = None,
                 tols: Tolerances = DEFAULT_TOLS):
        self.inst = inst
        self.net = net or build_network(inst)
        self.policy = policy if policy is not None else inst.substitution
        self.tols = tols
        self._scen: dict[int, _ScenarioProblem] = {}
        self._active: dict[int, np.ndarray] = {}
        self._state: dict[int, object] = {}

    def _problem(self, w: int) -> "_ScenarioProblem":
        if w not in self._scen:
            self._scen[w] = _ScenarioProblem(self.inst, self.net, self.policy, w)
        return self._scen[w]

    def solve(self, z, x, w: int) -> SecondStageSolution:
        """Optimal scenario revenue and integral flows for first stage (z, x)."""
        prob = self._problem(w)
        lb, ub, rhs = prob.parametrize(z, x)
        # Warm-start from the previous optimal basis of this scenario; the
        # first solve crashes on the always-feasible all-idle flow instead
        # of running phase 1.
        start = self._state.get(w)
        sol = solve_lp(prob.lp, lb=lb, ub=ub, rhs=rhs, tols=self.tols,
                       initial_active=self._active.get(w), start=start,
                       crash=None if start is not None else prob.crash)
        if sol.status != OPTIMAL:
            raise RuntimeError(f"second-stage solve failed: {sol.status}")
        self._active[w] = sol.active_rows
        self._state[w] = sol.state
        duals = prob.extract_duals(sol, z)
        flows = {key: int(round(sol.x[col])) for key, col in prob.flow_cols.items()}
        duals.objective = sol.objective
        return SecondStageSolution(sol.objective, flows, duals,
                                   iterations=sol.iterations)


class _ScenarioProblem:
    """LP skeleton plus the metadata needed to re-bound it and read duals."""

    def __init__(self, inst, net, policy, w):
        self.inst, self.net, self.policy, self.w = inst, net, policy, w
        n, m, T = inst.n_regions, inst.n_types, inst.periods
        groups = flow_groups(net, policy, w)
        ident = _identity_index(policy)
        lp = LinearProgram("max")
        vx = VariableIndex()
        self.flow_cols = {}      # (arc_id, l_idx) -> col
        self.idle_vars = []      # (col, arc_id, k, cap, region)
        self.single_caps = []    # (col, arc_id, kdem, demand, i, j_or_None, kind)
        self.cap_rows = []       # (row, arc_id, kdem, demand, i, j_or_None, kind)

        def add_flow(aid, l_idx, ub, rev):
            col = lp.add_var(0.0, ub, rev, name=f"y{aid}_{l_idx}")
            vx.add(("y", aid, l_idx, self.w), col)
            self.flow_cols[aid, l_idx] = col
            return col

        for aid in net.by_kind[ArcKind.IDLE]:
            arc = net.arcs[aid]
            i = arc.origin[0]
            for k in range(m):
                cap = inst.capacity(i, k)
                if cap == 0:
                    continue
                col = add_flow(aid, ident[k], float(cap), 0.0)
                self.idle_vars.append((col, aid, k, float(cap), i))
        for aid in net.by_kind[ArcKind.RELOCATION]:
            arc = net.arcs[aid]
            for k in range(m):
                # Unbounded, as in the flow model; negative-revenue cycles
                # keep the LP bounded. A finite stand-in would create a
                # capacity with no dual counterpart in the cuts.
                add_flow(aid, ident[k], INF, net.base_revenue(arc, k))
        for (aid, kdem), members in groups.rental_groups.items():
            arc = net.arcs[aid]
            d = float(net.capacity(arc, kdem, self.w))
            i, j = arc.origin[0], arc.dest[0]
            jj = j if arc.kind is ArcKind.ONE_WAY else None
            cols = {}
            for l_idx in members:
                com = policy.commodities[l_idx]
                rev = effective_revenue(policy, inst.car_types, arc.kind, com,
                                        arc.duration, inst.period_length_hours)
                ub = d if len(members) == 1 else INF
                cols[add_flow(aid, l_idx, ub, rev)] = 1.0
            if len(members) == 1:
                col = next(iter(cols))
                self.single_caps.append((col, aid, kdem, d, i, jj, arc.kind))
            else:
                row = lp.add_row(cols, "<", d, lazy=True, name=f"cap{aid}_{kdem}")
                self.cap_rows.append((row, aid, kdem, d, i, jj, arc.kind))

        self.bal_row = {}
        from .formulations import _balance_coefs
        for i in range(n):
            for k in range(m):
                for t in range(T + 1):
                    coefs = _balance_coefs(net, vx, groups, i, t, k, self.w)
                    self.bal_row[i, t, k] = lp.add_row(coefs, "=", 0.0,
                                                       name=f"bal{i}_{t}_{k}")
        self.lp = lp
        self.vindex = vx
        _, _, self.rhs0, _, _, self.lb0, self.ub0 = lp.compiled()
        # Crash basis: the all-idle flow (idle chains carry the fleet through
        # every period) is feasible for any first stage satisfying the
        # linking constraints, so the simplex can skip phase 1 entirely.
        self.crash = np.full(lp.n_rows, -1, dtype=np.int64)
        for col, aid, k, cap, i in self.idle_vars:
            t = net.arcs[aid].origin[1]
            self.crash[self.bal_row[i, t, k]] = col

    def parametrize(self, z, x):
        """Bound and rhs vectors realizing the first stage (z, x)."""
        lb = self.lb0
        ub = self.ub0.copy()
        rhs = self.rhs0.copy()
        zf = np.asarray([1.0 if zi else 0.0 for zi in z])
        for col, aid, k, cap, i in self.idle_vars:
            ub[col] = cap * zf[i]
        for col, aid, kdem, d, i, jj, kind in self.single_caps:
            open_ = zf[i] if jj is None else zf[i] * zf[jj]
            ub[col] = d * open_
        for row, aid, kdem, d, i, jj, kind in self.cap_rows:
            open_ = zf[i] if jj is None else zf[i] * zf[jj]
            rhs[row] = d * open_
        T = self.inst.periods
        for i in range(self.inst.n_regions):
            for k in range(self.inst.n_types):
                rhs[self.bal_row[i, 0, k]] = float(x[i][k])
                rhs[self.bal_row[i, T, k]] = -float(x[i][k])
        return lb, ub, rhs

    def extract_duals(self, sol, z) -> DualSolution:
        """Duals of the explicit second-stage dual program.

        Folded bounds contribute through reduced costs; a variable pinned at
        an upper bound has reduced cost equal to the missing capacity dual.
        max(0, ·) guards roundoff and stays dual-feasible.
        """
        beta = {key: float(sol.duals[row]) for key, row in self.bal_row.items()}
        alpha, gamma1, gamma2, lam = {}, {}, {}, {}

        def assign(aid, kdem, i, jj, g):
            if jj is None:
                alpha[aid, kdem] = g
            elif not z[i]:
                gamma1[aid, kdem] = g
            elif not z[jj]:
                gamma2[aid, kdem] = g
            else:
                gamma1[aid, kdem] = g

        for col, aid, k, cap, i in self.idle_vars:
            lam[aid, k] = max(0.0, float(sol.reduced_costs[col]))
        for col, aid, kdem, d, i, jj, kind in self.single_caps:
            assign(aid, kdem, i, jj, max(0.0, float(sol.reduced_costs[col])))
        for row, aid, kdem, d, i, jj, kind in self.cap_rows:
            assign(aid, kdem, i, jj, max(0.0, float(sol.duals[row])))
        return DualSolution(self.w, beta, alpha, gamma1, gamma2, lam)


def solve_second_stage(inst: Instance, z, x, w: int, *, variant: str = "substitution",
                       net: SpatialTemporalNetwork | None = None) -> SecondStageSolution:
    """One-off scenario solve; see SecondStageSolver for the repeated form."""
    solver = SecondStageSolver(inst, net, _policy_for(inst, variant))
    return solver.solve(z, x, w)


def solve_second_stage_dual(inst: Instance, z, x, w: int, *,
                            variant: str = "substitution",
                            net: SpatialTemporalNetwork | None = None,
                            explicit: bool = False) -> DualSolution:
    """Optimal subproblem duals.

    By default extracted from the primal simplex solve; with ``explicit``
    the dual program is built and solved as its own LP (a slower independent
    cross-check of the primal-derived duals).
    """
    net = net or build_network(inst)
    policy = _policy_for(inst, variant)
    if not explicit:
        return SecondStageSolver(inst, net, policy).solve(z, x, w).duals
    return _solve_dual_explicit(inst, net, policy, z, x, w)


def _solve_dual_explicit(inst, net, policy, z, x, w) -> DualSolution:
    """The dual program stated directly: one constraint per primal flow."""
    n, m, T = inst.n_regions, inst.n_types, inst.periods
    groups = flow_groups(net, policy, w)
    lp = LinearProgram("min")
    zf = [1.0 if zi else 0.0 for zi in z]

    beta_col = {}
    for i in range(n):
        for k in range(m):
            for t in range(T + 1):
                if t == 0:
                    obj = float(x[i][k])
                elif t == T:
                    obj = -float(x[i][k])
                else:
                    obj = 0.0
                beta_col[i, t, k] = lp.add_var(-INF, INF, obj, name=f"b{i}_{t}_{k}")

    alpha_col, g1_col, g2_col, lam_col = {}, {}, {}, {}
    for (aid, kdem), members in groups.rental_groups.items():
        arc = net.arcs[aid]
        d = float(net.capacity(arc, kdem, w))
        i, j = arc.origin[0], arc.dest[0]
        if arc.kind is ArcKind.ROUND_TRIP:
            alpha_col[aid, kdem] = lp.add_var(0.0, INF, d * zf[i])
        else:
            g1_col[aid, kdem] = lp.add_var(0.0, INF, d * zf[i])
            g2_col[aid, kdem] = lp.add_var(0.0, INF, d * zf[j])
    for aid in net.by_kind[ArcKind.IDLE]:
        arc = net.arcs[aid]
        i = arc.origin[0]
        for k in range(m):
            cap = inst.capacity(i, k)
            if cap:
                lam_col[aid, k] = lp.add_var(0.0, INF, cap * zf[i])

    # One >= constraint per primal flow variable.
    for (aid, kdem), members in groups.rental_groups.items():
        arc = net.arcs[aid]
        (i, t), (j, s) = arc.origin, arc.dest
        for l_idx in members:
            com = policy.commodities[l_idx]
            rev = effective_revenue(policy, inst.car_types, arc.kind, com,
                                    arc.duration, inst.period_length_hours)
            k1 = com.uses
            coefs = {beta_col[i, t, k1]: 1.0, beta_col[j, s, k1]: -1.0}
            if arc.kind is ArcKind.ROUND_TRIP:
                coefs = {beta_col[i, t, k1]: 1.0}
                coefs[beta_col[i, s, k1]] = coefs.get(beta_col[i, s, k1], 0.0) - 1.0
                coefs[alpha_col[aid, kdem]] = 1.0
            else:
                coefs[g1_col[aid, kdem]] = 1.0
                coefs[g2_col[aid, kdem]] = 1.0
            lp.add_row(coefs, ">", rev)
    for aid in net.by_kind[ArcKind.RELOCATION]:
        arc = net.arcs[aid]
        (i, t), (j, s) = arc.origin, arc.dest
        for k in range(m):
            lp.add_row({beta_col[i, t, k]: 1.0, beta_col[j, s, k]: -1.0}, ">",
                       net.base_revenue(arc, k))
    for (aid, k), col in lam_col.items():
        arc = net.arcs[aid]
        (i, t), (_, s) = arc.origin, arc.dest
        lp.add_row({beta_col[i, t, k]: 1.0, beta_col[i, s, k]: -1.0, col: 1.0},
                   ">", 0.0)

    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        raise RuntimeError(f"explicit dual solve failed: {sol.status}")
    pick = lambda cols: {key: float(sol.x[c]) for key, c in cols.items()}
    return DualSolution(w, pick(beta_col), pick(alpha_col), pick(g1_col),
                        pick(g2_col), pick(lam_col), objective=sol.objective)


def upper_bound_Uw(inst: Instance, w: int, *, variant: str = "substitution",
                   net: SpatialTemporalNetwork | None = None) -> float:
    """Revenue from serving every demand at the best admissible rate,
    ignoring fleet, budget and openness — a static cap on the scenario value."""
    net = net or build_network(inst)
    policy = _policy_for(inst, variant)
    groups = flow_groups(net, policy, w)
    total = 0.0
    for (aid, kdem), members in groups.rental_groups.items():
        arc = net.arcs[aid]
        d = net.capacity(arc, kdem, w)
        best = max(effective_revenue(policy, inst.car_types, arc.kind,
                                     policy.commodities[l_idx], arc.duration,
                                     inst.period_length_hours)
                   for l_idx in members)
        total += d * max(0.0, best)
    return total


def build_optimality_cut(duals: DualSolution, inst: Instance,
                         net: SpatialTemporalNetwork) -> OptimalityCut:
    """Aggregate subproblem duals into a cut on (z, x, Q_w)."""
    T = inst.periods
    w = duals.scenario
    coef_x = {}
    for i in range(inst.n_regions):
        for k in range(inst.n_types):
            c = duals.beta.get((i, 0, k), 0.0) - duals.beta.get((i, T, k), 0.0)
            coef_x[i, k] = c
    coef_z = {i: 0.0 for i in range(inst.n_regions)}
    for (aid, kdem), a in duals.alpha.items():
        arc = net.arcs[aid]
        coef_z[arc.origin[0]] += a * net.capacity(arc, kdem, w)
    for (aid, kdem), g in duals.gamma1.items():
        arc = net.arcs[aid]
        coef_z[arc.origin[0]] += g * net.capacity(arc, kdem, w)
    for (aid, kdem), g in duals.gamma2.items():
        arc = net.arcs[aid]
        coef_z[arc.dest[0]] += g * net.capacity(arc, kdem, w)
    for (aid, k), lm in duals.lam.items():
        arc = net.arcs[aid]
        coef_z[arc.origin[0]] += lm * inst.capacity(arc.origin[0], k)
    return OptimalityCut(w, coef_x, coef_z)


def check_total_unimodularity(inst: Instance, *, variant: str = "substitution",
                              w: int = 0, samples: int = 200,
                              max_order: int = 12, seed: int = 0) -> bool:
    """Determinant test of the second-stage constraint matrix.

    Samples square submatrices (all of them when the matrix has few columns)
    and checks every determinant lies in {−1, 0, 1}. A size guard rejects
    matrices too large to sample meaningfully.
    """
    net = build_network(inst)
    policy = _policy_for(inst, variant)
    A = second_stage_matrix(inst, net, policy, w)
    m, n = A.shape
    if m * n > 500_000:
        raise ValueError(f"constraint matrix {m}x{n} too large for the determinant test")

    def ok(det):
        return abs(det - round(det)) < 1e-6 and round(det) in (-1, 0, 1)

    if n <= 8:
        from itertools import combinations
        for order in range(1, min(m, n) + 1):
            for cols in combinations(range(n), order):
                sub = A[:, cols]
                for rows in combinations(range(m), order):
                    if not ok(np.linalg.det(sub[rows, :])):
                        return False
        return True

    rng = np.random.default_rng(seed)
    for _ in range(samples):
        order = int(rng.integers(1, min(max_order, m, n) + 1))
        rows = rng.choice(m, size=order, replace=False)
        cols = rng.choice(n, size=order, replace=False)
        if not ok(np.linalg.det(A[np.ix_(rows, cols)])):
            return False
    return True


def second_stage_matrix(inst, net, policy, w) -> np.ndarray:
    """Dense constraint matrix of one scenario subproblem with every
    capacity written as a row (the form the structural results speak about)."""
    n, m, T = inst.n_regions, inst.n_types, inst.periods
    groups = flow_groups(net, policy, w)
    ident = _identity_index(policy)
    cols = {}
    for aid in net.by_kind[ArcKind.IDLE]:
        i = net.arcs[aid].origin[0]
        for k in range(m):
            if inst.capacity(i, k):
                cols[aid, ident[k]] = len(cols)
    for aid in net.by_kind[ArcKind.RELOCATION]:
        for k in range(m):
            cols[aid, ident[k]] = len(cols)
    for (aid, kdem), members in groups.rental_groups.items():
        for l_idx in members:
            cols[aid, l_idx] = len(cols)

    rows = []
    for i in range(n):
        for k in range(m):
            for t in range(T + 1):
                node = net.node_index(i, t)
                row = np.zeros(len(cols))
                for aid in net.out_arcs[node]:
                    for l_idx in groups.using[k]:
                        if (aid, l_idx) in cols:
                            row[cols[aid, l_idx]] += 1.0
                for aid in net.in_arcs[node]:
                    for l_idx in groups.using[k]:
                        if (aid, l_idx) in cols:
                            row[cols[aid, l_idx]] -= 1.0
                rows.append(row)
    for (aid, kdem), members in groups.rental_groups.items():
        row = np.zeros(len(cols))
        for l_idx in members:
            row[cols[aid, l_idx]] = 1.0
        rows.append(row)
    for aid in net.by_kind[ArcKind.IDLE]:
        i = net.arcs[aid].origin[0]
        for k in range(m):
            if (aid, ident[k]) in cols:
                row = np.zeros(len(cols))
                row[cols[aid, ident[k]]] = 1.0
                rows.append(row)
    return np.array(rows)
