"""Brute-force verifiers for tiny instances.

These enumerators are intentionally naive and exponential; they exist to
anchor the optimization stack (LP integrality, deterministic equivalents,
decomposition) against ground truth on problems small enough to enumerate.
Size guards are hard errors — a silent week-long enumeration helps nobody.
"""

from __future__ import annotations

import itertools

import numpy as np

from .model import ArcKind, Instance
from .stnet import SpatialTemporalNetwork, build_network
from .subproblems import SecondStageSolver, _policy_for
from .formulations import flow_groups, _identity_index


def enumerate_first_stage_optimum(inst: Instance, variant: str = "substitution",
                                  max_points: int = 200_000):
    """Exhaustive search over all feasible (z, x) lattice points.

    The second stage is still solved as an LP (its optima are integral), so
    this is an oracle for the first-stage optimization, not for the flows.
    Returns (objective, z, x).
    """
    n, m = inst.n_regions, inst.n_types
    lattice = 2 ** n
    for i in range(n):
        for k in range(m):
            lattice *= inst.capacity(i, k) + 1
    if lattice > max_points:
        raise ValueError(f"first-stage lattice has ~{lattice} points; "
                         f"refusing to enumerate more than {max_points}")

    net = build_network(inst)
    solver = SecondStageSolver(inst, net, _policy_for(inst, variant))
    best, best_z, best_x = -np.inf, None, None
    for zbits in itertools.product([False, True], repeat=n):
        ranges = [range((inst.capacity(i, k) if zbits[i] else 0) + 1)
                  for i in range(n) for k in range(m)]
        for flat in itertools.product(*ranges):
            x = tuple(tuple(flat[i * m + k] for k in range(m)) for i in range(n))
            cost = sum(inst.car_types[k].purchase_cost * x[i][k]
                       for i in range(n) for k in range(m))
            if cost > inst.budget + 1e-9:
                continue
            emis = sum((inst.car_types[k].emission - inst.carbon_allowance) * x[i][k]
                       for i in range(n) for k in range(m))
            if emis > 1e-9:
                continue
            obj = -sum(inst.regions[i].fixed_cost for i in range(n) if zbits[i])
            obj += inst.operating_days * sum(
                sc.probability * solver.solve(zbits, x, w).objective
                for w, sc in enumerate(inst.scenarios))
            if obj > best + 1e-12:
                best, best_z, best_x = obj, zbits, x
    return best, best_z, best_x


def enumerate_flows_tiny(inst: Instance, z, x, w: int,
                         variant: str = "substitution",
                         net: SpatialTemporalNetwork | None = None,
                         max_points: int = 5_000_000) -> float:
    """Optimal objective over all integral flows, by exhaustive enumeration.

    Flow variables are enumerated over their capacity ranges; balance is
    checked per assignment. Only viable for a handful of arcs.
    """
    net = net or build_network(inst)
    policy = _policy_for(inst, variant)
    groups = flow_groups(net, policy, w)
    ident = _identity_index(policy)
    inst_caps = inst

    # Columns: (arc_id, l_idx, revenue, cap).
    from .model import effective_revenue
    cols = []
    total_fleet = [sum(x[i][k] for i in range(inst.n_regions))
                   for k in range(inst.n_types)]
    for aid in net.by_kind[ArcKind.IDLE]:
        arc = net.arcs[aid]
        i = arc.origin[0]
        for k in range(inst.n_types):
            cap = inst.capacity(i, k) if z[i] else 0
            if cap:
                cols.append((aid, ident[k], 0.0, min(cap, total_fleet[k])))
    for aid in net.by_kind[ArcKind.RELOCATION]:
        arc = net.arcs[aid]
        for k in range(inst.n_types):
            if total_fleet[k]:
                cols.append((aid, ident[k], net.base_revenue(arc, k),
                             total_fleet[k]))
    for (aid, kdem), members in groups.rental_groups.items():
        arc = net.arcs[aid]
        d = net.capacity(arc, kdem, w)
        i, j = arc.origin[0], arc.dest[0]
        open_ = z[i] and (arc.kind is ArcKind.ROUND_TRIP or z[j])
        for l_idx in members:
            com = policy.commodities[l_idx]
            rev = effective_revenue(policy, inst.car_types, arc.kind, com,
                                    arc.duration, inst.period_length_hours)
            cap = min(d if open_ else 0, total_fleet[com.uses])
            cols.append((aid, l_idx, rev, cap))

    points = 1
    for _, _, _, cap in cols:
        points *= cap + 1
        if points > max_points:
            raise ValueError(f"flow lattice exceeds {max_points} points")

    n, m, T = inst.n_regions, inst.n_types, inst.periods
    best = -np.inf
    for values in itertools.product(*[range(cap + 1) for _, _, _, cap in cols]):
        flows = {}
        for (aid, l_idx, _, _), v in zip(cols, values):
            flows[aid, l_idx] = v
        if not _balanced(inst, net, groups, flows, z, x, w):
            continue
        obj = sum(rev * v for (_, _, rev, _), v in zip(cols, values))
        best = max(best, obj)
    return best


def _balanced(inst, net, groups, flows, z, x, w) -> bool:
    T = inst.periods
    for i in range(inst.n_regions):
        for k in range(inst.n_types):
            for t in range(T + 1):
                node = net.node_index(i, t)
                tot = 0
                for aid in net.out_arcs[node]:
                    for l_idx in groups.using[k]:
                        tot += flows.get((aid, l_idx), 0)
                for aid in net.in_arcs[node]:
                    for l_idx in groups.using[k]:
                        tot -= flows.get((aid, l_idx), 0)
                want = x[i][k] if t == 0 else (-x[i][k] if t == T else 0)
                if tot != want:
                    return False
    # Shared demand capacity across commodities serving the same cell.
    for (aid, kdem), members in groups.rental_groups.items():
        arc = net.arcs[aid]
        if sum(flows.get((aid, l_idx), 0) for l_idx in members) > \
                net.capacity(arc, kdem, w):
            return False
    return True
