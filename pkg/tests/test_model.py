"""Unit tests for the core data model."""

import numpy as np
import pytest

from carshare.model import (ArcKind, Commodity, FirstStageSolution,
                            SubstitutionPolicy, commodities_serving,
                            commodities_using, effective_revenue,
                            first_stage_violations, instance_from_dict,
                            instance_to_dict, load_instance, save_instance,
                            validate_instance)

from conftest import make_instance


def test_identity_policy():
    pol = SubstitutionPolicy.identity(3)
    assert len(pol.commodities) == 3
    assert all(c.is_identity and c.penalty == 0.0 for c in pol.commodities)
    assert pol.allowed(1, 1) and not pol.allowed(0, 1)


def test_full_policy():
    pol = SubstitutionPolicy.full(2, 2.0)
    assert len(pol.commodities) == 4
    assert pol.allowed(0, 1) and pol.allowed(1, 0)
    penalties = {(c.uses, c.serves): c.penalty for c in pol.commodities}
    assert penalties[0, 0] == 0.0 and penalties[0, 1] == 2.0


def test_from_pairs_policy():
    pol = SubstitutionPolicy.from_pairs(3, [(0, 1)], 1.5)
    assert pol.allowed(0, 1) and not pol.allowed(1, 0)
    assert len(pol.commodities) == 4


def test_commodity_queries():
    pol = SubstitutionPolicy.full(2, 2.0)
    using0 = {(c.uses, c.serves) for c in commodities_using(pol, 0)}
    serving0 = {(c.uses, c.serves) for c in commodities_serving(pol, 0)}
    assert using0 == {(0, 0), (0, 1)}
    assert serving0 == {(0, 0), (1, 0)}


def test_effective_revenue_rental_and_discount(tiny_instance):
    inst = tiny_instance
    pol = inst.substitution
    ident = next(c for c in pol.commodities if c.uses == 0 and c.serves == 0)
    subst = next(c for c in pol.commodities if c.uses == 0 and c.serves == 1)
    hours = 2 * inst.period_length_hours
    r_id = effective_revenue(pol, inst.car_types, ArcKind.ONE_WAY, ident, 2,
                             inst.period_length_hours)
    r_sub = effective_revenue(pol, inst.car_types, ArcKind.ONE_WAY, subst, 2,
                              inst.period_length_hours)
    assert r_id == pytest.approx(inst.car_types[0].revenue_one_way * hours)
    assert r_id - r_sub == pytest.approx(subst.penalty * hours)


def test_effective_revenue_rejects_substitution_on_relocation(tiny_instance):
    inst = tiny_instance
    subst = Commodity(0, 1, 2.0)
    with pytest.raises(ValueError):
        effective_revenue(inst.substitution, inst.car_types,
                          ArcKind.RELOCATION, subst, 1, 2.0)


def test_relocation_revenue_is_negative_cost(tiny_instance):
    inst = tiny_instance
    ident = Commodity(1, 1, 0.0)
    r = effective_revenue(inst.substitution, inst.car_types,
                          ArcKind.RELOCATION, ident, 1, 2.0)
    assert r == pytest.approx(-inst.car_types[1].relocation_cost * 2.0)


def test_validate_instance_clean(tiny_instance):
    assert validate_instance(tiny_instance) == []


def test_validate_instance_flags_bad_policy(tiny_instance):
    bad = tiny_instance.with_params(
        substitution=SubstitutionPolicy((Commodity(0, 0, 1.0),)))
    assert validate_instance(bad)  # identity commodity with nonzero penalty


def test_first_stage_violations(tiny_instance):
    inst = tiny_instance
    n, m = inst.n_regions, inst.n_types
    ok = FirstStageSolution(tuple([False] * n), tuple(tuple([0] * m) for _ in range(n)))
    assert first_stage_violations(inst, ok) == []
    # Fleet in a closed region exceeding capacity-times-open.
    fleet = [[0] * m for _ in range(n)]
    fleet[0][0] = 1
    bad = FirstStageSolution(tuple([False] * n), tuple(tuple(r) for r in fleet))
    assert first_stage_violations(inst, bad)


def test_budget_violation_detected(tiny_instance):
    inst = tiny_instance.with_params(budget=0.0)
    n, m = inst.n_regions, inst.n_types
    fleet = [[0] * m for _ in range(n)]
    fleet[0][0] = min(1, inst.capacity(0, 0))
    sol = FirstStageSolution(tuple([True] + [False] * (n - 1)),
                             tuple(tuple(r) for r in fleet))
    msgs = first_stage_violations(inst, sol)
    assert any("budget" in msg.lower() for msg in msgs)


def test_instance_json_round_trip(tmp_path, tiny_instance):
    path = tmp_path / "inst.json"
    save_instance(tiny_instance, str(path))
    back = load_instance(str(path))
    assert back == tiny_instance


def test_instance_dict_round_trip(medium_instance):
    assert instance_from_dict(instance_to_dict(medium_instance)) == medium_instance


def test_first_stage_solution_totals():
    fs = FirstStageSolution((True, True), ((1, 2), (3, 4)))
    assert fs.total_by_type(0) == 4
    assert fs.total_by_type(1) == 6
    assert fs.total_cars == 10


def test_with_params_immutable(tiny_instance):
    other = tiny_instance.with_params(budget=1.0)
    assert other.budget == 1.0
    assert tiny_instance.budget != 1.0 or tiny_instance.budget == 120_000.0
    assert other.regions is tiny_instance.regions
