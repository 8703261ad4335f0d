"""MIP formulations: deterministic equivalents and the Benders master.

Both two-stage programs share a first stage (region opening decisions z_i
and fleet sizing x_ik under budget, emission-average and parking-capacity
constraints) and differ in the second stage: the base program routes each
car type independently, while the substitution variant routes commodities
l = (uses, serves) so that demand for one type may be served by another at
a price discount.

Variable columns are addressed by semantic keys through a VariableIndex:
("z", i), ("x", i, k), ("y", arc_id, l_idx, w) and ("Q", w).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .branch_bound import MipModel
from .model import ArcKind, Instance, SubstitutionPolicy, effective_revenue
from .simplex import INF, LinearProgram
from .stnet import SpatialTemporalNetwork, build_network


class VariableIndex:
    """Bidirectional map between semantic keys and LP columns."""

    def __init__(self):
        self.by_key: dict = {}
        self.key_of: list = []

    def add(self, key, col: int):
        self.by_key[key] = col
        self.key_of.append(key)
        return col

    def __getitem__(self, key):
        return self.by_key[key]

    def __contains__(self, key):
        return key in self.by_key

    def get(self, key, default=None):
        return self.by_key.get(key, default)


@dataclass
class FlowGroups:
    """Per-scenario flow variable layout shared by DEF and subproblems.

    ``rental_groups`` maps (arc_id, demand_type) to the commodity indices
    whose flow counts against that demand; idle and relocation arcs carry
    one identity commodity per car type.
    """

    policy: SubstitutionPolicy
    serving: list  # serving[k] = sorted commodity indices with serves == k
    using: list    # using[k] = sorted commodity indices with uses == k
    rental_groups: dict  # (arc_id, k) -> list of l_idx, only where demand > 0


def flow_groups(net: SpatialTemporalNetwork, policy: SubstitutionPolicy,
                w: int) -> FlowGroups:
    m = net.inst.n_types
    serving = [[] for _ in range(m)]
    using = [[] for _ in range(m)]
    for l_idx, c in enumerate(policy.commodities):
        serving[c.serves].append(l_idx)
        using[c.uses].append(l_idx)
    groups = {}
    for kind in (ArcKind.ROUND_TRIP, ArcKind.ONE_WAY):
        for aid in net.by_kind[kind]:
            arc = net.arcs[aid]
            for k in range(m):
                if net.capacity(arc, k, w) > 0:
                    groups[aid, k] = serving[k]
    return FlowGroups(policy, serving, using, groups)


def _identity_index(policy: SubstitutionPolicy) -> dict:
    out = {}
    for l_idx, c in enumerate(policy.commodities):
        if c.is_identity:
            out[c.uses] = l_idx
    return out


def _add_first_stage(lp: LinearProgram, vx: VariableIndex, inst: Instance):
    n, m = inst.n_regions, inst.n_types
    for i in range(n):
        vx.add(("z", i), lp.add_var(0.0, 1.0, -inst.regions[i].fixed_cost,
                                    name=f"z_{i}"))
    for i in range(n):
        for k in range(m):
            vx.add(("x", i, k), lp.add_var(0.0, float(inst.capacity(i, k)),
                                           0.0, name=f"x_{i}_{k}"))
    lp.add_row({vx["x", i, k]: inst.car_types[k].purchase_cost
                for i in range(n) for k in range(m)}, "<", inst.budget,
               name="budget")
    lp.add_row({vx["x", i, k]: inst.car_types[k].emission - inst.carbon_allowance
                for i in range(n) for k in range(m)}, "<", 0.0, name="carbon")
    for i in range(n):
        for k in range(m):
            lp.add_row({vx["x", i, k]: 1.0, vx["z", i]: -float(inst.capacity(i, k))},
                       "<", 0.0, name=f"link_{i}_{k}")


@dataclass
class DefModel:
    """A deterministic-equivalent MIP plus its addressing metadata."""

    instance: Instance
    network: SpatialTemporalNetwork
    policy: SubstitutionPolicy
    lp: LinearProgram
    vindex: VariableIndex
    integer: list = field(default_factory=list)
    crash: np.ndarray | None = None

    def mip(self) -> MipModel:
        return MipModel(self.lp, self.integer, crash=self.crash)

    def first_stage(self, x: np.ndarray):
        inst = self.instance
        z = tuple(x[self.vindex["z", i]] > 0.5 for i in range(inst.n_regions))
        fleet = tuple(tuple(int(round(x[self.vindex["x", i, k]]))
                            for k in range(inst.n_types))
                      for i in range(inst.n_regions))
        return z, fleet


def build_def(inst: Instance, net: SpatialTemporalNetwork | None = None,
              policy: SubstitutionPolicy | None = None) -> DefModel:
    """Deterministic equivalent of the substitution-aware program.

    With an identity policy this is exactly the base program's DEF.
    """
    net = net or build_network(inst)
    policy = policy or inst.substitution
    n, m, T = inst.n_regions, inst.n_types, inst.periods
    D = inst.operating_days
    lp = LinearProgram("max")
    vx = VariableIndex()
    _add_first_stage(lp, vx, inst)
    ident = _identity_index(policy)
    crash_map: dict[int, int] = {}  # balance row -> idle column basic at start

    for w, sc in enumerate(inst.scenarios):
        groups = flow_groups(net, policy, w)
        scale = D * sc.probability
        idle_of: dict[tuple, int] = {}
        # Idle and relocation flows: identity commodities only.
        for aid in net.by_kind[ArcKind.IDLE]:
            arc = net.arcs[aid]
            i = arc.origin[0]
            for k in range(m):
                cap = inst.capacity(i, k)
                if cap == 0:
                    continue
                col = lp.add_var(0.0, float(cap), 0.0, name=f"y{aid}_{k}_{w}")
                vx.add(("y", aid, ident[k], w), col)
                idle_of[i, arc.origin[1], k] = col
                lp.add_row({col: 1.0, vx["z", i]: -float(cap)}, "<", 0.0,
                           lazy=True, name=f"idle{aid}_{k}_{w}")
        for aid in net.by_kind[ArcKind.RELOCATION]:
            arc = net.arcs[aid]
            for k in range(m):
                cap = net.capacity(arc, k, w)
                if cap == 0:
                    continue
                rev = scale * net.base_revenue(arc, k)
                vx.add(("y", aid, ident[k], w),
                       lp.add_var(0.0, float(cap), rev, name=f"y{aid}_{k}_{w}"))
        # Rental flows, one group of commodities per positive demand entry.
        for (aid, k), members in groups.rental_groups.items():
            arc = net.arcs[aid]
            d = float(net.capacity(arc, k, w))
            row = {}
            for l_idx in members:
                com = policy.commodities[l_idx]
                rev = scale * effective_revenue(policy, inst.car_types, arc.kind,
                                                com, arc.duration,
                                                inst.period_length_hours)
                col = lp.add_var(0.0, d, rev, name=f"y{aid}_{l_idx}_{w}")
                vx.add(("y", aid, l_idx, w), col)
                row[col] = 1.0
            i, j = arc.origin[0], arc.dest[0]
            rowi = dict(row)
            rowi[vx["z", i]] = -d
            lp.add_row(rowi, "<", 0.0, lazy=True, name=f"cap{aid}_{k}_{w}o")
            if arc.kind is ArcKind.ONE_WAY:
                rowj = dict(row)
                rowj[vx["z", j]] = -d
                lp.add_row(rowj, "<", 0.0, lazy=True, name=f"cap{aid}_{k}_{w}d")
        # Flow balance per (region, period, car type): out − in = x at t=0,
        # −x at t=T, 0 between (cars start and end parked in their region).
        for i in range(n):
            for k in range(m):
                for t in range(T + 1):
                    row = _balance_coefs(net, vx, groups, i, t, k, w)
                    if t == 0:
                        row[vx["x", i, k]] = -1.0
                    elif t == T:
                        row[vx["x", i, k]] = 1.0
                    r = lp.add_row(row, "=", 0.0, name=f"bal{i}_{t}_{k}_{w}")
                    if t < T and (i, t, k) in idle_of:
                        crash_map[r] = idle_of[i, t, k]

    integer = [vx["z", i] for i in range(n)]
    integer += [vx["x", i, k] for i in range(n) for k in range(m)]
    crash = np.full(lp.n_rows, -1, dtype=np.int64)
    for r, col in crash_map.items():
        crash[r] = col
    return DefModel(inst, net, policy, lp, vx, integer, crash)


def _balance_coefs(net, vx, groups, i, t, k, w):
    """Out-minus-in coefficients of the conservation row at node (i, t) for
    used car type k. Column lookups key on ("y", arc, commodity, scenario)."""
    node = net.node_index(i, t)
    row: dict[int, float] = {}

    def _accumulate(aid, sign):
        for l_idx in groups.using[k]:
            col = vx.get(("y", aid, l_idx, w))
            if col is not None:
                row[col] = row.get(col, 0.0) + sign

    for aid in net.out_arcs[node]:
        _accumulate(aid, 1.0)
    for aid in net.in_arcs[node]:
        _accumulate(aid, -1.0)
    return row


def build_def_base(inst: Instance,
                   net: SpatialTemporalNetwork | None = None) -> DefModel:
    """DEF without substitution: each car type is routed independently."""
    return build_def(inst, net, SubstitutionPolicy.identity(inst.n_types))


@dataclass
class MasterModel:
    """Benders restricted master: first stage plus one value variable Q_w
    per scenario, bounded above by a static revenue cap."""

    instance: Instance
    lp: LinearProgram
    vindex: VariableIndex
    integer: list
    upper_bounds: np.ndarray

    def mip(self) -> MipModel:
        return MipModel(self.lp, self.integer)


def build_master(inst: Instance, scenario_upper_bounds) -> MasterModel:
    Uw = np.asarray(scenario_upper_bounds, dtype=float)
    if len(Uw) != len(inst.scenarios):
        raise ValueError("need one upper bound per scenario")
    lp = LinearProgram("max")
    vx = VariableIndex()
    _add_first_stage(lp, vx, inst)
    D = inst.operating_days
    for w, sc in enumerate(inst.scenarios):
        vx.add(("Q", w), lp.add_var(0.0, float(Uw[w]), D * sc.probability,
                                    name=f"Q_{w}"))
    n, m = inst.n_regions, inst.n_types
    integer = [vx["z", i] for i in range(n)]
    integer += [vx["x", i, k] for i in range(n) for k in range(m)]
    return MasterModel(inst, lp, vx, integer, Uw)
