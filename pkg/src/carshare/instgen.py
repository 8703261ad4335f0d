"""Seeded random instance generator.

Reproduces the benchmark recipe: a 3×3 grid of candidate regions, two car
types (electric and gasoline), duration-dependent demand distributions,
travel times from grid adjacency, and fixed region costs derived from
parking capacity. Everything is overridable through GeneratorConfig, and
identical (config, seed) pairs produce identical instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (CarType, Instance, Region, Scenario, SubstitutionPolicy)


@dataclass(frozen=True)
class CarTypeSpec:
    name: str
    purchase_cost: float
    emission: float
    parking_cost: float  # per stall, priced into the region fixed cost


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of the synthetic benchmark family.

    Defaults follow the published experiment setup: electric cars cost 34K
    with zero emission and 4K parking stalls, gasoline cars 27K with
    emission 0.75 and 3.5K stalls; one-way rentals earn $12/h, round trips
    $7.75/h, relocation costs $8/h, substitution is discounted $2/h.
    """

    grid_rows: int = 3
    grid_cols: int = 3
    n_periods: int = 12
    period_length_hours: float = 2.0
    n_scenarios: int = 50
    budget: float = 3_000_000.0
    carbon_allowance: float = 0.5
    operating_days: int = 365
    revenue_one_way: float = 12.0
    revenue_round_trip: float = 7.75
    relocation_cost: float = 8.0
    substitution_penalty: float = 2.0
    capacity_low: int = 6
    capacity_high: int = 9
    region_base_cost: float = 300_000.0
    car_types: tuple[CarTypeSpec, ...] = (
        CarTypeSpec("electric", 34_000.0, 0.0, 4_000.0),
        CarTypeSpec("gasoline", 27_000.0, 0.75, 3_500.0),
    )
    eight_neighbors: bool = True      # grid adjacency used for travel times
    shared_capacity_draw: bool = True  # one capacity draw per region for all types
    seed: int = 0

    @property
    def n_regions(self) -> int:
        return self.grid_rows * self.grid_cols


def _neighbors(cfg: GeneratorConfig, i: int, j: int) -> bool:
    ri, ci = divmod(i, cfg.grid_cols)
    rj, cj = divmod(j, cfg.grid_cols)
    dr, dc = abs(ri - rj), abs(ci - cj)
    if cfg.eight_neighbors:
        return max(dr, dc) == 1
    return dr + dc == 1


def relocation_times(cfg: GeneratorConfig) -> tuple[tuple[int, ...], ...]:
    """ζ_ij: 1 period between grid neighbors, 2 otherwise."""
    n = cfg.n_regions
    return tuple(tuple(0 if i == j else (1 if _neighbors(cfg, i, j) else 2)
                       for j in range(n)) for i in range(n))


def sample_demand(cfg: GeneratorConfig, rng: np.random.Generator,
                  probability: float) -> Scenario:
    """Draw one scenario: every rental cell i.i.d. from a duration-dependent
    distribution — short trips (duration ≤ T/3, inclusive) are 0/1/2 with
    probabilities .8/.15/.05, longer ones 0/1 with .8/.2."""
    T = cfg.n_periods
    n, m = cfg.n_regions, len(cfg.car_types)
    short_cut = T / 3.0
    one_way, round_trip = {}, {}

    def draw(duration: int) -> int:
        u = rng.random()
        if duration <= short_cut:
            return 0 if u < 0.8 else (1 if u < 0.95 else 2)
        return 0 if u < 0.8 else 1

    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            for k in range(m):
                for t in range(T):
                    for s in range(t + 1, T + 1):
                        v = draw(s - t)
                        if v:
                            one_way[i, j, k, t, s] = v
    for i in range(n):
        for k in range(m):
            for t in range(T):
                for s in range(t + 1, T + 1):
                    v = draw(s - t)
                    if v:
                        round_trip[i, k, t, s] = v
    return Scenario(probability, one_way, round_trip)


def generate_instance(cfg: GeneratorConfig | None = None) -> Instance:
    cfg = cfg or GeneratorConfig()
    rng = np.random.default_rng(cfg.seed)
    m = len(cfg.car_types)

    regions = []
    for i in range(cfg.n_regions):
        if cfg.shared_capacity_draw:
            c = int(rng.integers(cfg.capacity_low, cfg.capacity_high + 1))
            caps = tuple([c] * m)
        else:
            caps = tuple(int(rng.integers(cfg.capacity_low, cfg.capacity_high + 1))
                         for _ in range(m))
        fixed = cfg.region_base_cost + sum(
            caps[k] * cfg.car_types[k].parking_cost for k in range(m))
        regions.append(Region(i, fixed, caps))

    types = tuple(CarType(k, spec.purchase_cost, spec.emission,
                          cfg.revenue_one_way, cfg.revenue_round_trip,
                          cfg.relocation_cost, name=spec.name)
                  for k, spec in enumerate(cfg.car_types))
    scenarios = tuple(sample_demand(cfg, rng, 1.0 / cfg.n_scenarios)
                      for _ in range(cfg.n_scenarios))
    return Instance(tuple(regions), types, cfg.budget, cfg.carbon_allowance,
                    cfg.n_periods, cfg.period_length_hours, cfg.operating_days,
                    relocation_times(cfg),
                    SubstitutionPolicy.full(m, cfg.substitution_penalty),
                    scenarios)


def capacity_table(inst: Instance) -> str:
    """Region capacity / fixed-cost table in the benchmark's layout."""
    lines = ["region  " + "  ".join(f"C_{ct.name or ct.id}" for ct in inst.car_types)
             + "  fixed_cost"]
    for r in inst.regions:
        caps = "  ".join(f"{c:5d}" for c in r.capacity_per_type)
        lines.append(f"{r.id + 1:6d}  {caps}  {r.fixed_cost:10.0f}")
    return "\n".join(lines) + "\n"
