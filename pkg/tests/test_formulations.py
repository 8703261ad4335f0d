"""Unit tests for the deterministic-equivalent and master formulations."""

import numpy as np
import pytest

from carshare.branch_bound import MipOptions, solve_mip
from carshare.formulations import (build_def, build_def_base, build_master,
                                   flow_groups, _identity_index)
from carshare.model import ArcKind, SubstitutionPolicy
from carshare.oracle import enumerate_first_stage_optimum
from carshare.stnet import build_network
from carshare.subproblems import upper_bound_Uw

from conftest import make_instance


@pytest.fixture(scope="module")
def tiny():
    return make_instance(seed=11)


def test_flow_groups_cover_demand(tiny):
    net = build_network(tiny)
    groups = flow_groups(net, tiny.substitution, 0)
    for (aid, kdem), members in groups.rental_groups.items():
        arc = net.arcs[aid]
        assert net.capacity(arc, kdem, 0) > 0
        for l_idx in members:
            assert tiny.substitution.commodities[l_idx].serves == kdem


def test_identity_index_maps_types(tiny):
    ident = _identity_index(tiny.substitution)
    for k, l_idx in ident.items():
        com = tiny.substitution.commodities[l_idx]
        assert com.uses == com.serves == k


def test_def_first_stage_variables_and_rows(tiny):
    model = build_def(tiny)
    n, m = tiny.n_regions, tiny.n_types
    for i in range(n):
        assert ("z", i) in model.vindex
        for k in range(m):
            assert ("x", i, k) in model.vindex
    # budget + carbon + n*m links at least
    assert model.lp.n_rows >= 2 + n * m


def test_def_matches_enumeration_base_and_substitution(tiny):
    for variant, builder in (("base", build_def_base), ("substitution", build_def)):
        obj_o, z_o, x_o = enumerate_first_stage_optimum(tiny, variant)
        model = builder(tiny)
        res = solve_mip(model.mip(), MipOptions())
        assert res.status == "optimal"
        assert res.objective == pytest.approx(obj_o, rel=1e-6, abs=1e-6)


def test_substitution_never_worse(tiny):
    base, _, _ = enumerate_first_stage_optimum(tiny, "base")
    subs, _, _ = enumerate_first_stage_optimum(tiny, "substitution")
    assert subs >= base - 1e-6 * (1 + abs(base))


def test_substitution_collapses_at_prohibitive_penalty(tiny):
    # Discount at least the best hourly rate => substituted trips never earn
    # more than zero, so the optimum matches the no-substitution program.
    p = max(max(ct.revenue_one_way, ct.revenue_round_trip)
            for ct in tiny.car_types)
    inst = tiny.with_params(
        substitution=SubstitutionPolicy.full(tiny.n_types, p))
    obj_base, _, _ = enumerate_first_stage_optimum(inst, "base")
    obj_subs, _, _ = enumerate_first_stage_optimum(inst, "substitution")
    assert obj_subs == pytest.approx(obj_base, rel=1e-9, abs=1e-6)


def test_def_budget_binding(tiny):
    # With a zero budget no cars can be bought: profit can only come from
    # not opening anything.
    inst = tiny.with_params(budget=0.0)
    model = build_def(inst)
    res = solve_mip(model.mip(), MipOptions())
    z, fleet = model.first_stage(res.x)
    assert sum(sum(r) for r in fleet) == 0
    assert res.objective == pytest.approx(0.0, abs=1e-9)


def test_master_upper_bounds_theta(tiny):
    Uw = [upper_bound_Uw(tiny, w) for w in range(len(tiny.scenarios))]
    master = build_master(tiny, Uw)
    res = solve_mip(master.mip(), MipOptions())
    assert res.status == "optimal"
    # Without cuts the master uses every Q_w at its static cap.
    for w, u in enumerate(Uw):
        q = res.x[master.vindex["Q", w]]
        assert q <= u + 1e-6 * (1 + abs(u))
    # Master relaxation dominates the true optimum.
    obj_true, _, _ = enumerate_first_stage_optimum(tiny, "substitution")
    assert res.objective >= obj_true - 1e-6 * (1 + abs(obj_true))


def test_def_respects_carbon(tiny):
    # Force a strict carbon allowance below the dirty type's emission:
    # gasoline cars then need matching clean cars.
    inst = tiny.with_params(carbon_allowance=0.0)
    model = build_def(inst)
    res = solve_mip(model.mip(), MipOptions())
    z, fleet = model.first_stage(res.x)
    emitted = sum(fleet[i][k] * inst.car_types[k].emission
                  for i in range(inst.n_regions) for k in range(inst.n_types))
    assert emitted <= 1e-9
