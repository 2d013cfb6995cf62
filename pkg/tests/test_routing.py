"""Traffic graph derivation, weights, next-hop tables vs. a min-plus oracle."""

import random

import numpy as np
import pytest

from urbanflow.errors import DegreeOverflow, Unreachable
from urbanflow.ingest import generate_synthetic
from urbanflow.ingest.network import AttributeRecord, Direction
from urbanflow.routing import (
    NextHopTable,
    RoutingParams,
    SELF_HOP,
    TrafficGraph,
    UNREACHABLE,
    build_next_hop_tables,
    derive_traffic_graph,
    edge_weight,
    edge_weights_csv,
    local_retable,
    path_cost,
    shortest_path,
)

from conftest import build_raw, graph_from_raw


def floyd_warshall(n, edge_list):
    """Min-plus closure over the dense weight matrix; the independent oracle."""
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v, w in edge_list:
        dist[u, v] = min(dist[u, v], w)
    for k in range(n):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    return dist


def random_strongly_connected(rng, n):
    """A random permutation cycle guarantees strong connectivity."""
    order = list(range(n))
    rng.shuffle(order)
    edges = []
    for i in range(n):
        edges.append((order[i], order[(i + 1) % n], rng.uniform(1.0, 10.0)))
    for _ in range(rng.randint(n, 3 * n)):
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            edges.append((u, v, rng.uniform(1.0, 10.0)))
    return edges


class TestDerive:
    def test_two_way_street_expands_both_senses(self):
        raw = build_raw([[(0, 0), (100, 0)]])
        graph, _, _ = graph_from_raw(raw)
        assert len(graph.edges) == 2
        assert {(e.src, e.dst) for e in graph.edges} == {(0, 1), (1, 0)}
        assert graph.edges[0].reverse_id == graph.edges[1].id

    def test_forward_only_reverse_unreachable(self):
        raw = build_raw([[(0, 0), (100, 0)]], direction=Direction.FORWARD)
        graph, _, _ = graph_from_raw(raw)
        assert len(graph.edges) == 1
        table = build_next_hop_tables(graph)
        e = graph.edges[0]
        assert table.hop(e.src, e.dst) != UNREACHABLE
        assert table.hop(e.dst, e.src) == UNREACHABLE

    def test_grid_3x3_has_24_directed_edges(self):
        raw = generate_synthetic({"kind": "grid", "rows": 3, "cols": 3, "edge_length": 100.0}, 0)
        graph, _, _ = graph_from_raw(raw)
        assert len(graph.edges) == 24

    def test_container_capacity_monotone_in_lane_sum(self):
        one = graph_from_raw(build_raw([[(0, 0), (100, 0)], [(100, 0), (200, 0)]], lanes=1))[0]
        two = graph_from_raw(build_raw([[(0, 0), (100, 0)], [(100, 0), (200, 0)]], lanes=2))[0]
        for v1, v2 in zip(one.vertices, two.vertices):
            assert v2.container_capacity >= v1.container_capacity

    def test_edge_capacity_from_slot_length(self):
        graph, _, _ = graph_from_raw(build_raw([[(0, 0), (100, 0)]], lanes=2))
        assert graph.edges[0].capacity == int(2 * 100 / 7.5)


class TestWeight:
    def test_formula(self):
        params = RoutingParams()
        assert edge_weight(100.0, 13.9, 1, params) == pytest.approx(100 / (0.9 * 13.9))
        assert edge_weight(100.0, 13.9, 1, params) == pytest.approx(7.9936, abs=5e-4)

    def test_extra_lane_strictly_lowers_weight(self):
        params = RoutingParams()
        w1 = edge_weight(100.0, 13.9, 1, params)
        w2 = edge_weight(100.0, 13.9, 2, params)
        assert w2 < w1
        assert w2 == pytest.approx(w1 / 1.25)

    def test_all_weights_positive(self):
        graph, _, _ = graph_from_raw(
            build_raw([[(0, 0), (3, 0)], [(3, 0), (3, 4)]], speed=36.0, lanes=3))
        assert all(e.weight > 0 for e in graph.edges)


class TestNextHop:
    def triangle(self):
        return TrafficGraph.from_edge_list(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)])

    def test_triangle_prefers_two_hop_path(self):
        g = self.triangle()
        table = build_next_hop_tables(g)
        path = shortest_path(table, g, 0, 2)
        assert [g.edges[e].dst for e in path] == [1, 2]
        assert path_cost(g, path) == pytest.approx(2.0)

    def test_self_query_is_empty(self):
        g = self.triangle()
        table = build_next_hop_tables(g)
        assert table.hop(1, 1) == SELF_HOP
        assert shortest_path(table, g, 1, 1) == []

    def test_unreachable(self):
        g = TrafficGraph.from_edge_list(3, [(0, 1, 1.0)])
        table = build_next_hop_tables(g)
        assert table.hop(1, 0) == UNREACHABLE
        with pytest.raises(Unreachable):
            shortest_path(table, g, 1, 0)

    def test_byte_bound_is_exact(self):
        for n in (3, 17, 50):
            g = TrafficGraph.from_edge_list(n, random_strongly_connected(random.Random(n), n))
            assert build_next_hop_tables(g).nbytes() == n * n

    def test_degree_overflow(self):
        edges = [(0, i, 1.0) for i in range(1, 256)]
        g = TrafficGraph.from_edge_list(256, edges)
        with pytest.raises(DegreeOverflow):
            build_next_hop_tables(g)

    def test_optimality_against_floyd_warshall(self):
        rng = random.Random(12)
        for _ in range(10):
            n = rng.randint(5, 50)
            edge_list = random_strongly_connected(rng, n)
            g = TrafficGraph.from_edge_list(n, edge_list)
            table = build_next_hop_tables(g)
            oracle = floyd_warshall(n, [(e.src, e.dst, e.weight) for e in g.edges])
            for s in range(n):
                for t in range(n):
                    if s == t:
                        continue
                    cost = path_cost(g, shortest_path(table, g, s, t))
                    assert cost == pytest.approx(oracle[s, t], rel=1e-9)

    def test_hop_following_terminates(self):
        rng = random.Random(5)
        n = 100
        g = TrafficGraph.from_edge_list(n, random_strongly_connected(rng, n))
        table = build_next_hop_tables(g)
        for s in range(n):
            for t in range(n):
                assert len(shortest_path(table, g, s, t)) <= n

    def test_deterministic_rebuild(self):
        g = TrafficGraph.from_edge_list(30, random_strongly_connected(random.Random(1), 30))
        assert build_next_hop_tables(g).data == build_next_hop_tables(g).data


class TestRetable:
    def detour_fixture(self):
        # 0 -> 1 -> 4 direct, or around via 2 and 3
        edges = [(0, 1, 1.0), (1, 4, 1.0), (0, 2, 2.0), (2, 3, 2.0), (3, 4, 2.0), (1, 2, 0.5)]
        return TrafficGraph.from_edge_list(5, edges)

    def test_barring_routes_around(self):
        g = self.detour_fixture()
        table = build_next_hop_tables(g)
        direct = g.out_edges[1][table.hop(1, 4)]
        assert g.edges[direct].dst == 4
        row = local_retable(g, 1, {direct: 1e6})
        table.replace_row(1, row)
        detour = g.out_edges[1][table.hop(1, 4)]
        assert g.edges[detour].dst == 2  # around via 2 -> 3 -> 4

    def test_no_detour_still_finite(self):
        g = TrafficGraph.from_edge_list(2, [(0, 1, 1.0)])
        table = build_next_hop_tables(g)
        row = local_retable(g, 0, {0: 1e6})
        table.replace_row(0, bytes(row))
        assert table.hop(0, 1) == 0  # hop still points through; cost is prohibitive

    def test_empty_overlay_is_identity(self):
        g = self.detour_fixture()
        table = build_next_hop_tables(g)
        assert local_retable(g, 0, {}) == table.row(0)

    def test_overlay_restore_bit_for_bit(self):
        g = self.detour_fixture()
        table = build_next_hop_tables(g)
        original = table.row(1)
        table.replace_row(1, local_retable(g, 1, {1: 1e6}))
        table.replace_row(1, local_retable(g, 1, {}))
        assert table.row(1) == original

    def test_unrelated_overlay_leaves_destinations_unchanged(self):
        edges = [(0, 1, 1.0), (1, 4, 1.0), (0, 2, 2.0), (2, 3, 2.0), (3, 4, 2.0),
                 (1, 2, 0.5), (0, 3, 4.6)]
        g = TrafficGraph.from_edge_list(5, edges)
        table = build_next_hop_tables(g)
        row = local_retable(g, 0, {3: 50.0})  # edge 2->3 serves only destination 3
        for t in (0, 1, 2, 4):
            assert row[t] == table.row(0)[t]
        assert row[3] != table.row(0)[3]  # flips to the direct fallback


class TestSerialization:
    def test_dump_load_round_trip(self):
        g = TrafficGraph.from_edge_list(10, random_strongly_connected(random.Random(2), 10))
        table = build_next_hop_tables(g)
        again = NextHopTable.load(table.dump())
        assert again.n == table.n
        assert again.data == table.data

    def test_weights_csv(self):
        graph, _, _ = graph_from_raw(build_raw([[(0, 0), (100, 0)]]))
        csv = edge_weights_csv(graph)
        lines = csv.strip().splitlines()
        assert lines[0] == "edge_id,from,to,length_m,lanes,speed_limit_ms,weight_s"
        assert len(lines) == 3
