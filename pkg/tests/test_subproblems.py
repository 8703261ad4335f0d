"""Unit tests for second-stage solves, duals and optimality cuts."""

import numpy as np
import pytest

from carshare.model import FirstStageSolution
from carshare.oracle import enumerate_first_stage_optimum, enumerate_flows_tiny
from carshare.stnet import build_network
from carshare.subproblems import (SecondStageSolver, _policy_for,
                                  build_optimality_cut,
                                  check_total_unimodularity,
                                  solve_second_stage, solve_second_stage_dual,
                                  upper_bound_Uw)

from conftest import make_instance, random_first_stage


@pytest.fixture(scope="module")
def tiny():
    return make_instance(seed=21)


@pytest.fixture(scope="module")
def medium():
    return make_instance(cols=5, periods=8, scenarios=4, cap_low=3, cap_high=5,
                         seed=22)


def _fleet(inst, rng, z=None):
    return random_first_stage(inst, rng)


def test_matches_flow_enumeration_tiny():
    inst = make_instance(cols=2, periods=3, scenarios=2, cap_low=1, cap_high=1,
                         seed=20)
    rng = np.random.default_rng(0)
    net = build_network(inst)
    checked = 0
    for variant in ("base", "substitution"):
        ss = SecondStageSolver(inst, net, _policy_for(inst, variant))
        for rep in range(4):
            z, x = random_first_stage(inst, rng)
            for w in range(len(inst.scenarios)):
                got = ss.solve(z, x, w).objective
                try:
                    ref = enumerate_flows_tiny(inst, z, x, w, variant=variant,
                                               net=net)
                except ValueError:
                    continue  # lattice too large for brute force this draw
                assert got == pytest.approx(ref, rel=1e-9, abs=1e-7)
                checked += 1
    assert checked >= 8


def test_strong_duality_explicit_dual(tiny):
    rng = np.random.default_rng(1)
    net = build_network(tiny)
    for variant in ("base", "substitution"):
        ss = SecondStageSolver(tiny, net, _policy_for(tiny, variant))
        for rep in range(3):
            z, x = random_first_stage(tiny, rng)
            for w in range(len(tiny.scenarios)):
                primal = ss.solve(z, x, w)
                dual = solve_second_stage_dual(tiny, z, x, w, variant=variant,
                                               net=net, explicit=True)
                assert primal.objective == pytest.approx(dual.objective,
                                                         rel=1e-7, abs=1e-6)


def test_cut_tight_at_generation_point(medium):
    rng = np.random.default_rng(2)
    net = build_network(medium)
    ss = SecondStageSolver(medium, net, _policy_for(medium, "substitution"))
    for rep in range(4):
        z, x = random_first_stage(medium, rng)
        for w in range(len(medium.scenarios)):
            sol = ss.solve(z, x, w)
            cut = build_optimality_cut(sol.duals, medium, net)
            assert cut.value(z, x) == pytest.approx(sol.objective,
                                                    rel=1e-7, abs=1e-6)


def test_cut_valid_everywhere(tiny):
    """Weak duality: every generated cut over-estimates the scenario value
    at every other first stage."""
    rng = np.random.default_rng(3)
    net = build_network(tiny)
    ss = SecondStageSolver(tiny, net, _policy_for(tiny, "substitution"))
    points = [random_first_stage(tiny, rng) for _ in range(5)]
    for z0, x0 in points:
        for w in range(len(tiny.scenarios)):
            cut = build_optimality_cut(ss.solve(z0, x0, w).duals, tiny, net)
            for z1, x1 in points:
                val = ss.solve(z1, x1, w).objective
                assert cut.value(z1, x1) >= val - 1e-6 * (1 + abs(val))


def test_cut_never_cuts_off_optimum(tiny):
    net = build_network(tiny)
    for variant in ("base", "substitution"):
        obj, z_opt, x_opt = enumerate_first_stage_optimum(tiny, variant)
        ss = SecondStageSolver(tiny, net, _policy_for(tiny, variant))
        rng = np.random.default_rng(4)
        for rep in range(4):
            z, x = random_first_stage(tiny, rng)
            for w in range(len(tiny.scenarios)):
                cut = build_optimality_cut(ss.solve(z, x, w).duals, tiny, net)
                theta_opt = ss.solve(np.array(z_opt), np.array(x_opt), w).objective
                assert cut.value(np.array(z_opt), np.array(x_opt)) >= \
                    theta_opt - 1e-6 * (1 + abs(theta_opt))


def test_upper_bound_dominates(tiny, medium):
    rng = np.random.default_rng(5)
    for inst in (tiny, medium):
        net = build_network(inst)
        for variant in ("base", "substitution"):
            ss = SecondStageSolver(inst, net, _policy_for(inst, variant))
            caps = [upper_bound_Uw(inst, w, variant=variant, net=net)
                    for w in range(len(inst.scenarios))]
            for rep in range(3):
                z, x = random_first_stage(inst, rng)
                for w in range(len(inst.scenarios)):
                    val = ss.solve(z, x, w).objective
                    assert caps[w] >= val - 1e-9


def test_all_idle_always_feasible_closed_regions(tiny):
    # Nothing open: value must be exactly zero, not infeasible.
    ss = SecondStageSolver(tiny)
    z = np.zeros(tiny.n_regions, dtype=bool)
    x = np.zeros((tiny.n_regions, tiny.n_types), dtype=int)
    for w in range(len(tiny.scenarios)):
        assert ss.solve(z, x, w).objective == pytest.approx(0.0, abs=1e-9)


def test_flows_are_integral(medium):
    rng = np.random.default_rng(6)
    ss = SecondStageSolver(medium)
    for rep in range(3):
        z, x = random_first_stage(medium, rng)
        sol = ss.solve(z, x, 0)
        # flows dict is produced by rounding; re-check against the LP values
        # via the reported objective's exactness in the integral test below.
        assert all(isinstance(v, int) for v in sol.flows.values())


def test_total_unimodularity_tiny(tiny):
    for variant in ("base", "substitution"):
        assert check_total_unimodularity(tiny, variant=variant, w=0,
                                         samples=300, seed=0)


def test_module_level_wrapper(tiny):
    rng = np.random.default_rng(7)
    z, x = random_first_stage(tiny, rng)
    a = solve_second_stage(tiny, z, x, 0, variant="substitution")
    ss = SecondStageSolver(tiny)
    b = ss.solve(z, x, 0)
    assert a.objective == pytest.approx(b.objective, rel=1e-9, abs=1e-9)
