"""Unit tests for the decomposition solver."""

import numpy as np
import pytest

from carshare.benders import BendersOptions, benders_solve, warm_start
from carshare.branch_bound import MipOptions, solve_mip
from carshare.formulations import build_def, build_def_base
from carshare.model import first_stage_violations
from carshare.oracle import enumerate_first_stage_optimum

from conftest import make_instance


@pytest.fixture(scope="module")
def tiny():
    return make_instance(seed=31)


@pytest.fixture(scope="module")
def tiny2():
    return make_instance(cols=3, periods=4, scenarios=4, cap_low=1, cap_high=2,
                         budget=150_000.0, seed=32)


def test_matches_enumeration_both_variants(tiny):
    for variant in ("base", "substitution"):
        obj, _, _ = enumerate_first_stage_optimum(tiny, variant)
        res = benders_solve(tiny, BendersOptions(variant=variant))
        assert res.status == "optimal"
        assert res.objective == pytest.approx(obj, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("warm,init,root", [
    (False, False, False), (True, False, False), (False, True, False),
    (False, False, True), (True, True, True),
])
def test_enhancement_combinations_agree(tiny2, warm, init, root):
    ref = benders_solve(tiny2, BendersOptions(
        variant="substitution", enable_warm_start=False,
        enable_initial_cuts=False, enable_root_cuts=False))
    res = benders_solve(tiny2, BendersOptions(
        variant="substitution", enable_warm_start=warm,
        enable_initial_cuts=init, enable_root_cuts=root))
    assert res.status == ref.status == "optimal"
    assert res.objective == pytest.approx(ref.objective, rel=1e-6, abs=1e-6)


def test_matches_def(tiny2):
    for variant, builder in (("base", build_def_base),
                             ("substitution", build_def)):
        mip = solve_mip(builder(tiny2).mip(), MipOptions())
        res = benders_solve(tiny2, BendersOptions(variant=variant))
        assert res.objective == pytest.approx(mip.objective, rel=1e-6, abs=1e-6)


def test_incumbent_is_feasible(tiny2):
    res = benders_solve(tiny2, BendersOptions(variant="substitution"))
    assert res.first_stage is not None
    assert first_stage_violations(tiny2, res.first_stage) == []


def test_warm_start_is_feasible(tiny2):
    for variant in ("base", "substitution"):
        fs = warm_start(tiny2, variant=variant, seed=3)
        assert first_stage_violations(tiny2, fs) == []


def test_theta_matches_objective_decomposition(tiny):
    res = benders_solve(tiny, BendersOptions(variant="substitution"))
    fs = res.first_stage
    fixed = sum(tiny.regions[i].fixed_cost
                for i in range(tiny.n_regions) if fs.open[i])
    D = tiny.operating_days
    expect = -fixed + D * sum(sc.probability * res.theta[w]
                              for w, sc in enumerate(tiny.scenarios))
    assert res.objective == pytest.approx(expect, rel=1e-6, abs=1e-5)


def test_deterministic_across_runs(tiny2):
    a = benders_solve(tiny2, BendersOptions(variant="substitution", seed=5))
    b = benders_solve(tiny2, BendersOptions(variant="substitution", seed=5))
    assert a.objective == b.objective
    assert a.first_stage == b.first_stage


def test_parallel_workers_agree(tiny2):
    a = benders_solve(tiny2, BendersOptions(variant="substitution", n_workers=1))
    b = benders_solve(tiny2, BendersOptions(variant="substitution", n_workers=3))
    assert a.objective == pytest.approx(b.objective, rel=1e-6, abs=1e-6)


def test_rejects_bad_cut_tolerance():
    with pytest.raises(ValueError):
        BendersOptions(cut_tolerance=0.0)


def test_cut_counters_populate(tiny2):
    res = benders_solve(tiny2, BendersOptions(
        variant="substitution", enable_initial_cuts=True,
        enable_root_cuts=True))
    assert res.cuts_initial > 0
    assert res.cuts_lazy >= 0
    assert res.nodes >= 1
