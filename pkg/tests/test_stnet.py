"""Unit tests for the spatial-temporal network."""

import pytest

from carshare.model import ArcKind
from carshare.stnet import build_network

from conftest import make_instance


@pytest.fixture
def net_and_inst():
    inst = make_instance(cols=3, periods=4, scenarios=2, seed=3)
    return build_network(inst), inst


def test_idle_arcs_span_every_period(net_and_inst):
    net, inst = net_and_inst
    T, n = inst.periods, inst.n_regions
    idles = [net.arcs[a] for a in net.by_kind[ArcKind.IDLE]]
    assert len(idles) == n * T  # one per region per period boundary
    for a in idles:
        assert a.dest == (a.origin[0], a.origin[1] + 1)


def test_relocation_arcs_respect_travel_time(net_and_inst):
    net, inst = net_and_inst
    T = inst.periods
    for aid in net.by_kind[ArcKind.RELOCATION]:
        a = net.arcs[aid]
        i, t = a.origin
        j, s = a.dest
        assert i != j
        assert s - t == inst.relocation_time[i][j]
        assert s <= T


def test_rental_arcs_cover_demand_supports(net_and_inst):
    net, inst = net_and_inst
    # Every demanded (i,j,t,s) cell has a matching one-way arc.
    one_way = {(a.origin[0], a.dest[0], a.origin[1], a.dest[1])
               for a in (net.arcs[x] for x in net.by_kind[ArcKind.ONE_WAY])}
    for sc in inst.scenarios:
        for (i, j, k, t, s), d in sc.one_way_demand.items():
            if d > 0:
                assert (i, j, t, s) in one_way


def test_capacity_lookup_matches_scenario(net_and_inst):
    net, inst = net_and_inst
    sc = inst.scenarios[0]
    for aid in net.by_kind[ArcKind.ONE_WAY]:
        a = net.arcs[aid]
        for k in range(inst.n_types):
            expect = sc.one_way_demand.get(
                (a.origin[0], a.dest[0], k, a.origin[1], a.dest[1]), 0)
            assert net.capacity(a, k, 0) == expect


def test_idle_capacity_is_parking(net_and_inst):
    net, inst = net_and_inst
    aid = net.by_kind[ArcKind.IDLE][0]
    a = net.arcs[aid]
    for k in range(inst.n_types):
        assert net.capacity(a, k, 0) == inst.capacity(a.origin[0], k)


def test_node_index_bijective(net_and_inst):
    net, inst = net_and_inst
    seen = set()
    for i in range(inst.n_regions):
        for t in range(inst.periods + 1):
            idx = net.node_index(i, t)
            assert idx not in seen
            seen.add(idx)


def test_arc_adjacency_consistent(net_and_inst):
    net, inst = net_and_inst
    for aid, arc in enumerate(net.arcs):
        assert arc.id == aid
        assert aid in net.out_arcs[net.node_index(*arc.origin)]
        assert aid in net.in_arcs[net.node_index(*arc.dest)]


def test_base_revenue_signs(net_and_inst):
    net, inst = net_and_inst
    for kind, sign in ((ArcKind.ONE_WAY, 1), (ArcKind.ROUND_TRIP, 1),
                       (ArcKind.RELOCATION, -1)):
        for aid in net.by_kind[kind][:3]:
            for k in range(inst.n_types):
                r = net.base_revenue(net.arcs[aid], k)
                assert sign * r > 0


def test_round_trip_arcs_return_to_origin(net_and_inst):
    net, _ = net_and_inst
    for aid in net.by_kind[ArcKind.ROUND_TRIP]:
        a = net.arcs[aid]
        assert a.origin[0] == a.dest[0]
        assert a.dest[1] > a.origin[1]


def test_edge_list_and_dot_exports(net_and_inst):
    net, _ = net_and_inst
    el = net.edge_list()
    assert len(el.strip().splitlines()) == net.n_arcs
    assert net.to_dot().startswith("digraph")
