"""Reporting and CLI behavior.

The profit decomposition is cross-checked against the solver objective,
which is computed by an entirely different path (scenario value variables
instead of per-arc flow accounting).
"""

import json

import numpy as np
import pytest

from carshare.benders import BendersOptions, benders_solve
from carshare.cli import main
from carshare.model import FirstStageSolution
from carshare.report import (BenchmarkRow, SolveReport, benchmark,
                             benchmark_csv, benchmark_text,
                             check_sweep_monotonicity, heatmap_csv,
                             heatmap_svg, region_label, run_solver, summarize,
                             sweep, sweep_csv)

from conftest import make_instance, random_first_stage


def _solved(inst, variant="base"):
    res = benders_solve(inst, BendersOptions(variant=variant))
    assert res.status == "optimal"
    return res


def _random_fs(inst, seed=3):
    z, x = random_first_stage(inst, np.random.default_rng(seed))
    return FirstStageSolution(tuple(bool(v) for v in z),
                              tuple(tuple(int(v) for v in row) for row in x))


# -- profit decomposition ----------------------------------------------------


def test_report_objective_matches_solver(tiny_instance):
    # Flow-level accounting must reproduce the optimizer's objective, which
    # is assembled from scenario values, not arc revenues.
    for variant in ("base", "substitution"):
        res = _solved(tiny_instance, variant)
        rep = summarize(tiny_instance, res.first_stage, variant)
        assert rep.objective == pytest.approx(res.objective, abs=1e-5)


def test_report_identity_and_signs(tiny_instance):
    fs = _random_fs(tiny_instance)
    rep = summarize(tiny_instance, fs, "substitution")
    assert rep.objective == pytest.approx(
        rep.revenue_total - rep.cost_fixed - rep.cost_relocation, abs=1e-9)
    assert rep.revenue_total == pytest.approx(
        rep.revenue_one_way + rep.revenue_round_trip, abs=1e-9)
    assert rep.cost_relocation >= 0.0
    assert rep.substitution_penalty_paid >= 0.0
    assert rep.fleet_by_type == [fs.total_by_type(k)
                                 for k in range(tiny_instance.n_types)]


def test_satisfaction_bounds_and_sr_dominates_total(tiny_instance):
    # Closing a region zeroes its numerator but keeps its demand in the
    # all-regions denominator, so SR (opened only) >= Total.
    fs = _random_fs(tiny_instance, seed=5)
    if all(fs.open):  # make sure at least one region is closed
        fs = FirstStageSolution((False,) + fs.open[1:],
                                ((0,) * tiny_instance.n_types,) + fs.fleet[1:])
    rep = summarize(tiny_instance, fs, "base")
    for s in rep.satisfaction_by_region:
        assert 0.0 <= s <= 100.0 + 1e-9
    assert rep.sr_percent >= rep.total_percent - 1e-9


def test_base_variant_has_no_substitution(tiny_instance):
    res = _solved(tiny_instance, "base")
    rep = summarize(tiny_instance, res.first_stage, "base")
    assert rep.substitution_rates == {}
    assert rep.substitution_rate_overall == 0.0
    assert rep.substitution_penalty_paid == 0.0


def test_scenario_weighting_of_average_flows():
    # With two equiprobable scenarios the daily averages are plain means of
    # the per-scenario totals.
    inst = make_instance(scenarios=2, seed=4)
    fs = _random_fs(inst)
    from carshare.report import operational_flows
    from carshare.stnet import ArcKind
    flows_by_w, net, _ = operational_flows(inst, fs, "base")
    expect = {k.value: 0.0 for k in
              (ArcKind.ONE_WAY, ArcKind.ROUND_TRIP, ArcKind.RELOCATION)}
    for w, flows in enumerate(flows_by_w):
        pi = inst.scenarios[w].probability
        assert pi == pytest.approx(0.5)
        for (aid, _), cnt in flows.items():
            kind = net.arcs[aid].kind
            if kind.value in expect:
                expect[kind.value] += pi * cnt
    rep = summarize(inst, fs, "base")
    for kind, v in expect.items():
        assert rep.avg_flows[kind] == pytest.approx(v, abs=1e-9)


def test_payback_years(tiny_instance):
    res = _solved(tiny_instance, "base")
    rep = summarize(tiny_instance, res.first_stage, "base")
    if rep.objective > 0:
        assert rep.payback_years == pytest.approx(
            tiny_instance.budget / rep.objective)
    else:
        assert rep.payback_years is None


def test_report_json_round_trip(tiny_instance):
    rep = summarize(tiny_instance, _random_fs(tiny_instance), "base")
    clone = SolveReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert clone == rep


# -- sweeps -------------------------------------------------------------------


def test_budget_sweep_monotone_and_csv(tiny_instance):
    cells = sweep(tiny_instance, "budget", [60_000.0, 120_000.0],
                  variants=("base",), method="bc")
    assert [c.status for c in cells] == ["optimal", "optimal"]
    assert cells[1].objective >= cells[0].objective - 1e-6
    assert check_sweep_monotonicity(cells) == []
    text = sweep_csv(cells)
    assert text.startswith("axis,value,variant,status,objective")
    assert text.count("\n") == 3


def test_penalty_sweep_achieved_increase(tiny_instance):
    rate = max(max(ct.revenue_one_way, ct.revenue_round_trip)
               for ct in tiny_instance.car_types)
    cells = sweep(tiny_instance, "penalty", [0.001, rate, "disabled"],
                  method="bc")
    assert all(c.variant in ("base", "substitution") for c in cells)
    by_val = {c.value: c for c in cells}
    # p -> 0 realizes the full attainable gain by definition.
    assert by_val[0.001].achieved_increase in ("100.0", "-")
    assert by_val["disabled"].achieved_increase == "-"
    # Non-increasing in the penalty, "disabled" largest of all.
    assert by_val[0.001].objective >= by_val[rate].objective - 1e-6
    assert by_val[rate].objective >= by_val["disabled"].objective - 1e-6
    assert check_sweep_monotonicity(cells) == []


def test_sweep_rejects_unknown_axis(tiny_instance):
    with pytest.raises(ValueError):
        sweep(tiny_instance, "weather", [1.0])


# -- benchmark ----------------------------------------------------------------


def test_benchmark_methods_agree(tiny_instance):
    rows = benchmark([("tiny", tiny_instance)], "base", ("def", "bc"),
                     time_limit=600.0)
    assert [r.status for r in rows] == ["optimal", "optimal"]
    assert rows[0].objective == pytest.approx(rows[1].objective, abs=1e-5)
    text = benchmark_text(rows)
    assert "*" in text  # fastest solved cell is starred
    csv = benchmark_csv(rows)
    assert csv.startswith("instance,method,variant,status,")


def test_benchmark_row_textual_conventions():
    tl = BenchmarkRow("i", "def", "base", "time_limit", np.nan, np.inf, 301.0, 9)
    assert tl.st_text == "TL"
    assert tl.gap_text == "N/A"  # no feasible design found in time
    found = BenchmarkRow("i", "bc", "base", "time_limit", 5.0, 0.1234, 301.0, 9)
    assert found.st_text == "TL"
    assert found.gap_text == "12.34"
    solved = BenchmarkRow("i", "bc", "base", "optimal", 5.0, 0.0, 2.5, 9)
    assert solved.st_text == "2.50"
    assert solved.gap_text == "0.00"


# -- heat grid ----------------------------------------------------------------


def test_region_labels_row_major():
    assert [region_label(i, 3) for i in range(9)] == [
        "1-a", "1-b", "1-c", "2-a", "2-b", "2-c", "3-a", "3-b", "3-c"]


def test_heatmap_artifacts():
    inst = make_instance(rows=3, cols=3, periods=4, scenarios=2,
                         budget=500_000.0, seed=7)
    fs = _random_fs(inst, seed=2)
    rep = summarize(inst, fs, "base")
    csv = heatmap_csv(rep, 3, 3)
    lines = csv.strip().splitlines()
    assert lines[0] == "region,satisfaction_pct,opened"
    assert len(lines) == 10
    for i, line in enumerate(lines[1:]):
        label, sat, opened = line.split(",")
        assert label == region_label(i, 3)
        assert (opened == "1") == (i in rep.regions_opened)
        if opened == "0":
            assert float(sat) == 0.0
    svg = heatmap_svg(rep, 3, 3)
    assert svg.startswith("<svg")
    assert svg.count("<rect") == 9
    if len(rep.regions_opened) < 9:
        assert 'url(#closed)' in svg
    with pytest.raises(ValueError):
        heatmap_csv(rep, 2, 2)


# -- solver front end ----------------------------------------------------------


def test_run_solver_methods_match(tiny_instance):
    outs = [run_solver(tiny_instance, "substitution", m) for m in
            ("def", "bc", "bcplus")]
    assert all(o.status == "optimal" for o in outs)
    for o in outs[1:]:
        assert o.objective == pytest.approx(outs[0].objective, abs=1e-5)


def test_run_solver_rejects_bad_arguments(tiny_instance):
    with pytest.raises(ValueError):
        run_solver(tiny_instance, "bogus", "bc")
    with pytest.raises(ValueError):
        run_solver(tiny_instance, "base", "bogus")


# -- CLI -----------------------------------------------------------------------


def test_cli_end_to_end(tmp_path, capsys):
    instance = tmp_path / "inst.json"
    report = tmp_path / "rep.json"
    heat = tmp_path / "heat.svg"
    grid = tmp_path / "heat.csv"
    code = main(["generate", "--out", str(instance), "--grid-rows", "1",
                 "--grid-cols", "3", "--periods", "4", "--scenarios", "2",
                 "--capacity-low", "1", "--capacity-high", "2",
                 "--budget", "120000", "--seed", "0"])
    assert code == 0
    assert instance.exists()
    code = main(["solve", str(instance), "--variant", "base", "--method", "bc",
                 "--quiet", "--out", str(report)])
    assert code == 0
    out = capsys.readouterr().out
    assert "objective" in out and "regions opened" in out
    rep = SolveReport.from_dict(json.loads(report.read_text()))
    assert rep.n_regions == 3
    code = main(["report", str(report), "--heatmap", str(heat), "--csv",
                 str(grid), "--grid-rows", "1", "--grid-cols", "3"])
    assert code == 0
    assert heat.read_text().startswith("<svg")
    assert grid.read_text().startswith("region,")


def test_cli_sweep_and_benchmark(tmp_path, capsys):
    instance = tmp_path / "inst.json"
    main(["generate", "--out", str(instance), "--grid-rows", "1",
          "--grid-cols", "3", "--periods", "4", "--scenarios", "2",
          "--capacity-low", "1", "--capacity-high", "2",
          "--budget", "120000", "--seed", "0"])
    capsys.readouterr()
    code = main(["sweep", str(instance), "--axis", "budget", "--values",
                 "60000,120000", "--variants", "base", "--method", "bc",
                 "--quiet"])
    assert code == 0
    assert capsys.readouterr().out.startswith("axis,value,")
    out_csv = tmp_path / "bench.csv"
    code = main(["benchmark", str(instance), "--variant", "base",
                 "--methods", "def,bc", "--quiet", "--out", str(out_csv)])
    assert code == 0
    assert "instance" in capsys.readouterr().out
    assert out_csv.read_text().startswith("instance,method,")


def test_cli_exit_codes(tmp_path, capsys):
    # Missing file -> 1; hitting the time limit -> 2.
    assert main(["solve", str(tmp_path / "absent.json")]) == 1
    instance = tmp_path / "inst.json"
    main(["generate", "--out", str(instance), "--grid-rows", "1",
          "--grid-cols", "3", "--periods", "4", "--scenarios", "2",
          "--capacity-low", "1", "--capacity-high", "2",
          "--budget", "120000", "--seed", "0"])
    capsys.readouterr()
    code = main(["solve", str(instance), "--method", "bc", "--quiet",
                 "--time-limit", "0"])
    assert code == 2
