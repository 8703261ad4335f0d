"""Spatial-temporal network G = (N, A) with the four arc classes.

Nodes are (region, period) pairs; arcs encode one-way rentals, round-trips,
company relocations and idle parking. The network is immutable after build
and shared read-only by the formulations and the Benders subproblems.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import ArcKind, Instance


@dataclass(frozen=True)
class Arc:
    id: int
    kind: ArcKind
    origin: tuple[int, int]  # (region, period)
    dest: tuple[int, int]

    @property
    def duration(self) -> int:
        return self.dest[1] - self.origin[1]


class SpatialTemporalNetwork:
    """Arc-partitioned network with incidence and region-filtered views."""

    def __init__(self, inst: Instance, arcs: list[Arc]):
        self.inst = inst
        self.arcs = tuple(arcs)
        T, n = inst.periods, inst.n_regions
        self.n_nodes = n * (T + 1)

        self.by_kind: dict[ArcKind, list[int]] = {kind: [] for kind in ArcKind}
        self.out_arcs: list[list[int]] = [[] for _ in range(self.n_nodes)]
        self.in_arcs: list[list[int]] = [[] for _ in range(self.n_nodes)]
        # Region views used by the dual subproblem and the optimality cuts.
        self.round_trip_at: list[list[int]] = [[] for _ in range(n)]   # A^two(i)
        self.one_way_from: list[list[int]] = [[] for _ in range(n)]    # A^one(i+)
        self.one_way_to: list[list[int]] = [[] for _ in range(n)]      # A^one(i-)
        self.idle_at: list[list[int]] = [[] for _ in range(n)]         # A^idle(i)

        for a in self.arcs:
            self.by_kind[a.kind].append(a.id)
            self.out_arcs[self.node_index(*a.origin)].append(a.id)
            self.in_arcs[self.node_index(*a.dest)].append(a.id)
            if a.kind is ArcKind.ROUND_TRIP:
                self.round_trip_at[a.origin[0]].append(a.id)
            elif a.kind is ArcKind.ONE_WAY:
                self.one_way_from[a.origin[0]].append(a.id)
                self.one_way_to[a.dest[0]].append(a.id)
            elif a.kind is ArcKind.IDLE:
                self.idle_at[a.origin[0]].append(a.id)

    def node_index(self, i: int, t: int) -> int:
        return i * (self.inst.periods + 1) + t

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    def capacity(self, arc: Arc, k: int, w: int) -> int:
        """u_akw: demand for rental arcs, parking capacity for idle arcs.

        Relocation arcs use the total type-k parking capacity as a finite
        stand-in for the paper's unbounded capacity; no flow can exceed the
        fleet size, so the substitution is lossless.
        """
        inst = self.inst
        if arc.kind is ArcKind.IDLE:
            return inst.capacity(arc.origin[0], k)
        if arc.kind is ArcKind.RELOCATION:
            return sum(r.capacity_per_type[k] for r in inst.regions)
        i, t = arc.origin
        j, s = arc.dest
        sc = inst.scenarios[w]
        if arc.kind is ArcKind.ONE_WAY:
            return sc.one_way_demand.get((i, j, k, t, s), 0)
        return sc.round_trip_demand.get((i, k, t, s), 0)

    def base_revenue(self, arc: Arc, k: int) -> float:
        """r_ak: per-unit flow revenue (negative cost for relocation arcs)."""
        inst = self.inst
        hours = arc.duration * inst.period_length_hours
        ct = inst.car_types[k]
        if arc.kind is ArcKind.IDLE:
            return 0.0
        if arc.kind is ArcKind.RELOCATION:
            return -ct.relocation_cost * hours
        if arc.kind is ArcKind.ONE_WAY:
            return ct.revenue_one_way * hours
        return ct.revenue_round_trip * hours

    # -- debug exports ------------------------------------------------------

    def edge_list(self) -> str:
        lines = [f"{a.id}\t{a.kind.value}\t{a.origin[0]},{a.origin[1]}"
                 f"\t{a.dest[0]},{a.dest[1]}" for a in self.arcs]
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        style = {ArcKind.IDLE: "dashed", ArcKind.RELOCATION: "dotted",
                 ArcKind.ROUND_TRIP: "bold", ArcKind.ONE_WAY: "solid"}
        out = ["digraph stnet {"]
        for a in self.arcs:
            out.append(f'  "n{a.origin[0]}_{a.origin[1]}" -> "n{a.dest[0]}_{a.dest[1]}"'
                       f' [style={style[a.kind]}, label="{a.kind.value}"];')
        out.append("}")
        return "\n".join(out) + "\n"


def build_network(inst: Instance, dense: bool = False) -> SpatialTemporalNetwork:
    """Construct the network for an instance.

    One-way and round-trip arcs with zero demand in every scenario are
    omitted unless ``dense`` is set (their flow is forced to zero by capacity
    anyway); relocation arcs that would arrive past the horizon are never
    generated. Idle arcs cover t = 0..T-1 so that cars allocated at t = 0 can
    wait for later rentals.
    """
    n, T = inst.n_regions, inst.periods
    arcs: list[Arc] = []

    def add(kind: ArcKind, i: int, t: int, j: int, s: int) -> None:
        arcs.append(Arc(len(arcs), kind, (i, t), (j, s)))

    for i in range(n):
        for t in range(T):
            add(ArcKind.IDLE, i, t, i, t + 1)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            zeta = inst.relocation_time[i][j]
            for t in range(T):
                if t + zeta <= T:
                    add(ArcKind.RELOCATION, i, t, j, t + zeta)
    for i in range(n):
        for t in range(T):
            for s in range(t + 1, T + 1):
                if dense or any(sc.round_trip_demand.get((i, k, t, s), 0)
                                for sc in inst.scenarios for k in range(inst.n_types)):
                    add(ArcKind.ROUND_TRIP, i, t, i, s)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            for t in range(T):
                for s in range(t + 1, T + 1):
                    if dense or any(sc.one_way_demand.get((i, j, k, t, s), 0)
                                    for sc in inst.scenarios for k in range(inst.n_types)):
                        add(ArcKind.ONE_WAY, i, t, j, s)
    return SpatialTemporalNetwork(inst, arcs)
