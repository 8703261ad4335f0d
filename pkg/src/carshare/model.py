"""Problem data types: regions, car types, substitution commodities, scenarios.

All types are immutable after construction and safe to share across workers.
Region and car-type ids are contiguous integers starting at 0; demand tensors
are stored sparsely as {index-tuple: count} maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

MONEY_TOL = 1e-6
PROB_TOL = 1e-9


class ArcKind(str, Enum):
    ONE_WAY = "one_way"
    ROUND_TRIP = "round_trip"
    RELOCATION = "relocation"
    IDLE = "idle"


@dataclass(frozen=True)
class CarType:
    """A purchasable vehicle type with its cost, emission and rental rates.

    Rates are dollars per hour; ``relocation_cost`` is per hour of empty
    travel and may differ per type (defaults to one shared value in the
    standard generator).
    """

    id: int
    purchase_cost: float
    emission: float
    revenue_one_way: float
    revenue_round_trip: float
    relocation_cost: float
    name: str = ""


@dataclass(frozen=True)
class Region:
    id: int
    fixed_cost: float
    capacity_per_type: tuple[int, ...]  # indexed by car-type id


@dataclass(frozen=True)
class Commodity:
    """Flow of car type ``uses`` satisfying demand of car type ``serves``.

    ``penalty`` is the per-hour price discount the operator grants when the
    two types differ; identity commodities carry no penalty.
    """

    uses: int
    serves: int
    penalty: float = 0.0

    @property
    def is_identity(self) -> bool:
        return self.uses == self.serves


@dataclass(frozen=True)
class SubstitutionPolicy:
    """The commodity set L together with F^k / F-hat^k queries."""

    commodities: tuple[Commodity, ...]

    @staticmethod
    def identity(n_types: int) -> "SubstitutionPolicy":
        return SubstitutionPolicy(tuple(Commodity(k, k, 0.0) for k in range(n_types)))

    @staticmethod
    def full(n_types: int, penalty: float) -> "SubstitutionPolicy":
        """Every ordered pair of distinct types substitutes, at a flat penalty."""
        comms = []
        for k1 in range(n_types):
            for k2 in range(n_types):
                comms.append(Commodity(k1, k2, 0.0 if k1 == k2 else penalty))
        return SubstitutionPolicy(tuple(comms))

    @staticmethod
    def from_pairs(n_types: int, pairs: Iterable[tuple[int, int]],
                   penalty: float) -> "SubstitutionPolicy":
        """Identity commodities plus the given (uses, serves) pairs."""
        comms = [Commodity(k, k, 0.0) for k in range(n_types)]
        for k1, k2 in pairs:
            if k1 != k2:
                comms.append(Commodity(k1, k2, penalty))
        return SubstitutionPolicy(tuple(comms))

    def allowed(self, uses: int, serves: int) -> bool:
        return any(c.uses == uses and c.serves == serves for c in self.commodities)


def commodities_using(policy: SubstitutionPolicy, k: int) -> set[Commodity]:
    """F^k: commodities whose flow consists of type-k cars."""
    found = {c for c in policy.commodities if c.uses == k}
    if not found:
        raise KeyError(f"unknown car type {k}")
    return found


def commodities_serving(policy: SubstitutionPolicy, k: int) -> set[Commodity]:
    """F-hat^k: commodities that satisfy demand for type k."""
    found = {c for c in policy.commodities if c.serves == k}
    if not found:
        raise KeyError(f"unknown car type {k}")
    return found


def effective_revenue(policy: SubstitutionPolicy, car_types: tuple[CarType, ...],
                      arc_kind: ArcKind, commodity: Commodity,
                      duration_periods: int, period_length_hours: float) -> float:
    """Objective coefficient of one unit of commodity flow on an arc.

    Rental arcs pay the using type's hourly rate minus the commodity penalty;
    relocation arcs cost the per-type relocation rate; idle arcs are free.
    Substitution commodities are undefined on idle/relocation arcs.
    """
    hours = duration_periods * period_length_hours
    ct = car_types[commodity.uses]
    if arc_kind in (ArcKind.IDLE, ArcKind.RELOCATION):
        if not commodity.is_identity:
            raise ValueError(
                f"substitution commodity {commodity.uses}->{commodity.serves} "
                f"not defined on {arc_kind.value} arcs")
        return 0.0 if arc_kind is ArcKind.IDLE else -ct.relocation_cost * hours
    rate = ct.revenue_one_way if arc_kind is ArcKind.ONE_WAY else ct.revenue_round_trip
    return (rate - commodity.penalty) * hours


@dataclass(frozen=True)
class Scenario:
    """One demand realization.

    ``one_way_demand`` maps (i, j, k, t, s) to a trip count for i != j and
    0 <= t < s <= T; ``round_trip_demand`` maps (i, k, t, s) likewise.
    Absent keys mean zero demand.
    """

    probability: float
    one_way_demand: Mapping[tuple[int, int, int, int, int], int] = field(default_factory=dict)
    round_trip_demand: Mapping[tuple[int, int, int, int], int] = field(default_factory=dict)


@dataclass(frozen=True)
class Instance:
    regions: tuple[Region, ...]
    car_types: tuple[CarType, ...]
    budget: float
    carbon_allowance: float
    periods: int
    period_length_hours: float
    operating_days: int
    relocation_time: tuple[tuple[int, ...], ...]  # zeta[i][j], whole periods
    substitution: SubstitutionPolicy
    scenarios: tuple[Scenario, ...]

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def n_types(self) -> int:
        return len(self.car_types)

    def capacity(self, i: int, k: int) -> int:
        return self.regions[i].capacity_per_type[k]

    def with_scenarios(self, scenarios: Iterable[Scenario]) -> "Instance":
        return Instance(self.regions, self.car_types, self.budget,
                        self.carbon_allowance, self.periods,
                        self.period_length_hours, self.operating_days,
                        self.relocation_time, self.substitution,
                        tuple(scenarios))

    def with_params(self, *, budget: float | None = None,
                    carbon_allowance: float | None = None,
                    substitution: SubstitutionPolicy | None = None) -> "Instance":
        return Instance(self.regions, self.car_types,
                        self.budget if budget is None else budget,
                        self.carbon_allowance if carbon_allowance is None else carbon_allowance,
                        self.periods, self.period_length_hours, self.operating_days,
                        self.relocation_time,
                        self.substitution if substitution is None else substitution,
                        self.scenarios)


@dataclass(frozen=True)
class FirstStageSolution:
    """Region-open indicators z_i and fleet allocation x_ik."""

    open: tuple[bool, ...]
    fleet: tuple[tuple[int, ...], ...]  # fleet[i][k]

    def total_by_type(self, k: int) -> int:
        return sum(row[k] for row in self.fleet)

    @property
    def total_cars(self) -> int:
        return sum(sum(row) for row in self.fleet)


def first_stage_violations(inst: Instance, sol: FirstStageSolution) -> list[str]:
    """Check (z, x) against capacity link, budget and carbon constraints."""
    out = []
    for i, region in enumerate(inst.regions):
        for k in range(inst.n_types):
            cap = region.capacity_per_type[k] if sol.open[i] else 0
            if sol.fleet[i][k] > cap:
                out.append(f"fleet[{i}][{k}]={sol.fleet[i][k]} exceeds capacity {cap}")
            if sol.fleet[i][k] < 0:
                out.append(f"fleet[{i}][{k}] negative")
    cost = sum(inst.car_types[k].purchase_cost * sol.fleet[i][k]
               for i in range(inst.n_regions) for k in range(inst.n_types))
    if cost > inst.budget + MONEY_TOL:
        out.append(f"fleet cost {cost} exceeds budget {inst.budget}")
    emis = sum((inst.car_types[k].emission - inst.carbon_allowance) * sol.fleet[i][k]
               for i in range(inst.n_regions) for k in range(inst.n_types))
    if emis > MONEY_TOL:
        out.append("fleet average emission exceeds carbon allowance")
    return out


def validate_instance(inst: Instance) -> list[str]:
    """Diagnose invariant violations; returns [] when the instance is sound."""
    out = []
    n, m, T = inst.n_regions, inst.n_types, inst.periods
    for idx, r in enumerate(inst.regions):
        if r.id != idx:
            out.append(f"region ids must be contiguous from 0 (got {r.id} at {idx})")
        if r.fixed_cost < 0:
            out.append(f"region {r.id}: fixed cost must be >= 0")
        if len(r.capacity_per_type) != m:
            out.append(f"region {r.id}: capacity_per_type must have one entry per car type")
        if any(c < 0 or int(c) != c for c in r.capacity_per_type):
            out.append(f"region {r.id}: capacities must be nonnegative integers")
    for idx, ct in enumerate(inst.car_types):
        if ct.id != idx:
            out.append(f"car type ids must be contiguous from 0 (got {ct.id} at {idx})")
        if ct.purchase_cost <= 0:
            out.append(f"car type {ct.id}: purchase cost must be > 0")
        if ct.emission < 0:
            out.append(f"car type {ct.id}: emission must be >= 0")
        if ct.revenue_one_way <= 0 or ct.revenue_round_trip <= 0:
            out.append(f"car type {ct.id}: rental rates must be > 0")
    if T < 1:
        out.append("horizon must have at least one period")
    if inst.period_length_hours <= 0:
        out.append("period length must be positive")
    if inst.operating_days < 1:
        out.append("operating days must be >= 1")
    if inst.budget <= 0:
        out.append("budget must be positive")
    if len(inst.relocation_time) != n or any(len(row) != n for row in inst.relocation_time):
        out.append("relocation time matrix must be n_regions x n_regions")
    else:
        for i in range(n):
            for j in range(n):
                if i != j and inst.relocation_time[i][j] < 1:
                    out.append(f"relocation time must be >= 1 period (zeta[{i}][{j}])")

    out.extend(_validate_policy(inst.substitution, m))
    out.extend(_validate_scenarios(inst, n, m, T))
    return out


def _validate_policy(policy: SubstitutionPolicy, n_types: int) -> list[str]:
    out = []
    seen = set()
    for c in policy.commodities:
        if not (0 <= c.uses < n_types and 0 <= c.serves < n_types):
            out.append(f"commodity {c.uses}->{c.serves} references unknown car type")
            continue
        if (c.uses, c.serves) in seen:
            out.append(f"duplicate commodity {c.uses}->{c.serves}")
        seen.add((c.uses, c.serves))
        if c.penalty < 0:
            out.append(f"commodity {c.uses}->{c.serves}: penalty must be >= 0")
        if c.is_identity and c.penalty != 0:
            out.append(f"identity commodity {c.uses}->{c.uses} must have zero penalty")
    for k in range(n_types):
        if (k, k) not in seen:
            out.append(f"identity commodity ({k},{k}) missing from policy")
    return out


def _validate_scenarios(inst: Instance, n: int, m: int, T: int) -> list[str]:
    out = []
    if not inst.scenarios:
        out.append("at least one scenario is required")
        return out
    total = 0.0
    for w, sc in enumerate(inst.scenarios):
        if not (0.0 <= sc.probability <= 1.0):
            out.append(f"scenario {w}: probability out of [0,1]")
        total += sc.probability
        for (i, j, k, t, s), v in sc.one_way_demand.items():
            if i == j or not (0 <= i < n and 0 <= j < n and 0 <= k < m and 0 <= t < s <= T):
                out.append(f"scenario {w}: bad one-way demand index {(i, j, k, t, s)}")
            if v < 0 or int(v) != v:
                out.append(f"scenario {w}: demand values must be nonnegative integers")
        for (i, k, t, s), v in sc.round_trip_demand.items():
            if not (0 <= i < n and 0 <= k < m and 0 <= t < s <= T):
                out.append(f"scenario {w}: bad round-trip demand index {(i, k, t, s)}")
            if v < 0 or int(v) != v:
                out.append(f"scenario {w}: demand values must be nonnegative integers")
    if abs(total - 1.0) > PROB_TOL:
        out.append(f"scenario probabilities sum to {total:g}")
    return out


# ---------------------------------------------------------------------------
# JSON serialization (schema documented in README)

def instance_to_dict(inst: Instance) -> dict:
    return {
        "regions": [{"id": r.id, "fixed_cost": r.fixed_cost,
                     "capacity_per_type": list(r.capacity_per_type)}
                    for r in inst.regions],
        "car_types": [{"id": c.id, "name": c.name, "purchase_cost": c.purchase_cost,
                       "emission": c.emission, "revenue_one_way": c.revenue_one_way,
                       "revenue_round_trip": c.revenue_round_trip,
                       "relocation_cost": c.relocation_cost}
                      for c in inst.car_types],
        "budget": inst.budget,
        "carbon_allowance": inst.carbon_allowance,
        "periods": inst.periods,
        "period_length_hours": inst.period_length_hours,
        "operating_days": inst.operating_days,
        "relocation_time": [list(row) for row in inst.relocation_time],
        "substitution": [{"uses": c.uses, "serves": c.serves, "penalty": c.penalty}
                         for c in inst.substitution.commodities],
        "scenarios": [{
            "probability": sc.probability,
            "one_way_demand": [{"i": i, "j": j, "k": k, "t": t, "s": s, "value": v}
                               for (i, j, k, t, s), v in sorted(sc.one_way_demand.items())
                               if v],
            "round_trip_demand": [{"i": i, "k": k, "t": t, "s": s, "value": v}
                                  for (i, k, t, s), v in sorted(sc.round_trip_demand.items())
                                  if v],
        } for sc in inst.scenarios],
    }


def instance_from_dict(d: dict) -> Instance:
    regions = tuple(Region(r["id"], r["fixed_cost"], tuple(r["capacity_per_type"]))
                    for r in d["regions"])
    car_types = tuple(CarType(c["id"], c["purchase_cost"], c["emission"],
                              c["revenue_one_way"], c["revenue_round_trip"],
                              c["relocation_cost"], c.get("name", ""))
                      for c in d["car_types"])
    policy = SubstitutionPolicy(tuple(Commodity(c["uses"], c["serves"], c["penalty"])
                                      for c in d["substitution"]))
    scenarios = tuple(Scenario(
        probability=sc["probability"],
        one_way_demand={(r["i"], r["j"], r["k"], r["t"], r["s"]): r["value"]
                        for r in sc["one_way_demand"]},
        round_trip_demand={(r["i"], r["k"], r["t"], r["s"]): r["value"]
                           for r in sc["round_trip_demand"]},
    ) for sc in d["scenarios"])
    return Instance(regions=regions, car_types=car_types, budget=d["budget"],
                    carbon_allowance=d["carbon_allowance"], periods=d["periods"],
                    period_length_hours=d["period_length_hours"],
                    operating_days=d["operating_days"],
                    relocation_time=tuple(tuple(row) for row in d["relocation_time"]),
                    substitution=policy, scenarios=scenarios)


def save_instance(inst: Instance, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)


def load_instance(path: str) -> Instance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
