import numpy as np
import pytest

from carshare.instgen import GeneratorConfig, generate_instance


def make_instance(*, rows=1, cols=3, periods=4, scenarios=3, cap_low=1,
                  cap_high=2, budget=120_000.0, carbon=0.5, penalty=2.0,
                  region_base_cost=20_000.0, seed=0):
    cfg = GeneratorConfig(grid_rows=rows, grid_cols=cols, n_periods=periods,
                          n_scenarios=scenarios, capacity_low=cap_low,
                          capacity_high=cap_high, budget=budget,
                          carbon_allowance=carbon, substitution_penalty=penalty,
                          region_base_cost=region_base_cost, seed=seed)
    return generate_instance(cfg)


@pytest.fixture
def tiny_instance():
    """3 regions, 4 periods, 3 scenarios, capacities <= 2: enumerable."""
    return make_instance(seed=0)


@pytest.fixture
def medium_instance():
    """5 regions, 8 periods, 10 scenarios: decomposition-sized."""
    return make_instance(cols=5, periods=8, scenarios=10, cap_low=3,
                         cap_high=5, budget=600_000.0, seed=1)


def random_first_stage(inst, rng, open_prob=0.7):
    """A random feasible-by-construction (z, x) respecting capacity links."""
    z = rng.random(inst.n_regions) < open_prob
    x = np.zeros((inst.n_regions, inst.n_types), dtype=int)
    for i in range(inst.n_regions):
        if z[i]:
            for k in range(inst.n_types):
                x[i, k] = int(rng.integers(0, inst.capacity(i, k) + 1))
    return z, x
