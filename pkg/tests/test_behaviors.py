"""Strategic draws, crisis reactions, per-mode edge choices, patience rules."""

import math
import random

import pytest
from scipy import stats

from urbanflow.behaviors import (
    CrisisEvent,
    NEXT_EXIT,
    OdSampler,
    angle_between,
    chicken_next_edge,
    jam_escape_next_edge,
    local_next_edge,
    nearest_vertex,
    on_crisis,
    parse_mixture,
    planar_next_edge,
    strategic_plan,
)
from urbanflow.errors import NoFeasiblePair
from urbanflow.ingest import generate_synthetic
from urbanflow.routing import TrafficGraph, build_next_hop_tables, shortest_path
from urbanflow.sim.vehicle import Distribution, Mode

from conftest import build_raw, graph_from_raw, grid_world, make_world, uniform_fleet


def grid_graph(rows=5, cols=5, edge_length=100.0):
    raw = generate_synthetic({"kind": "grid", "rows": rows, "cols": cols,
                              "edge_length": edge_length}, 0)
    graph, _, _ = graph_from_raw(raw)
    return graph


class TestDrawOd:
    def test_uniform_preset_is_uniform(self):
        graph = grid_graph()
        table = build_next_hop_tables(graph)
        sampler = OdSampler(graph, table, preset="uniform")
        rng = random.Random(0)
        n = 100_000
        counts = [0] * len(graph.vertices)
        for _ in range(n):
            origin, _ = sampler.draw(rng)
            counts[origin] += 1
        _, p = stats.chisquare(counts)
        assert p > 0.01

    def test_morning_inbound_pulls_inward(self):
        graph = grid_graph()
        table = build_next_hop_tables(graph)
        sampler = OdSampler(graph, table, preset="morning-inbound")
        rng = random.Random(1)
        cx, cy = sampler.center

        def radius(vid):
            v = graph.vertices[vid]
            return math.hypot(v.x - cx, v.y - cy)

        origins, dests = 0.0, 0.0
        n = 10_000
        for _ in range(n):
            o, d = sampler.draw(rng)
            origins += radius(o)
            dests += radius(d)
        assert origins / n > dests / n

    def test_degenerate_graph_has_no_feasible_pair(self):
        g = TrafficGraph.from_edge_list(1, [])
        table = build_next_hop_tables(g)
        sampler = OdSampler(g, table)
        with pytest.raises(NoFeasiblePair):
            sampler.draw(random.Random(0))

    def test_draws_are_reachable_and_distinct(self):
        raw = build_raw([[(0, 0), (100, 0)]])  # two vertices, both directions
        graph, _, _ = graph_from_raw(raw)
        table = build_next_hop_tables(graph)
        sampler = OdSampler(graph, table)
        rng = random.Random(2)
        for _ in range(200):
            o, d = sampler.draw(rng)
            assert o != d


class TestStrategicPlan:
    def test_triangle_plan_matches_table(self):
        g = TrafficGraph.from_edge_list(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)])
        table = build_next_hop_tables(g)
        plan = strategic_plan(g, table, 0, 2)
        assert plan == shortest_path(table, g, 0, 2)
        assert g.edges[plan[0]].src == 0

    def test_first_edge_leaves_origin(self):
        graph = grid_graph()
        table = build_next_hop_tables(graph)
        sampler = OdSampler(graph, table)
        rng = random.Random(3)
        for _ in range(50):
            o, d = sampler.draw(rng)
            plan = strategic_plan(graph, table, o, d)
            assert plan and graph.edges[plan[0]].src == o
            assert graph.edges[plan[-1]].dst == d


class TestCrisisOnset:
    def _vehicle(self, world, x):
        # place on a straight edge at given x; edge 0 runs along the x axis
        return world.place_vehicle(0, 0, x, dest=world.graph.edges[0].dst)

    def straight(self):
        raw = build_raw([[(0, 0), (1000, 0)]])
        graph, _, _ = graph_from_raw(raw)
        return make_world(graph, sampler=None)

    def test_full_intensity_inside_all_switch(self):
        world = self.straight()
        event = CrisisEvent(0, 0, 500, 1.0, 0, parse_mixture({"chicken": 1.0}),
                            parse_mixture({"normal": 1.0}))
        vehicles = [self._vehicle(world, 10.0 + 8 * k) for k in range(20)]
        world.add_crisis(event)
        assert all(v.mode == Mode.CHICKEN for v in vehicles)
        assert all(v.crisis_x == 0 for v in vehicles)

    def test_zero_intensity_changes_nobody(self):
        world = self.straight()
        event = CrisisEvent(0, 0, 2000, 0.0, 0, parse_mixture({"chicken": 1.0}),
                            parse_mixture({"normal": 1.0}))
        vehicles = [self._vehicle(world, 10.0 + 8 * k) for k in range(20)]
        world.add_crisis(event)
        assert all(v.mode == Mode.NORMAL for v in vehicles)

    def test_outside_mixture_frequencies(self):
        world = self.straight()
        mixture = {"normal": 0.6, "spectator": 0.2, "chicken": 0.2}
        event = CrisisEvent(-5000, 0, 10, 1.0, 0, parse_mixture({"chicken": 1.0}),
                            parse_mixture(mixture))
        vehicles = [self._vehicle(world, 5.0 + 0.09 * k) for k in range(10_000)]
        world.vehicles and world.add_crisis(event)
        counts = {m: 0 for m in ("normal", "spectator", "chicken")}
        for veh in vehicles:
            counts[veh.mode.name.lower()] += 1
        n = len(vehicles)
        for name, p in mixture.items():
            sigma = math.sqrt(p * (1 - p) * n)
            assert abs(counts[name] - p * n) <= 3 * sigma

    def test_mixture_must_sum_to_one(self):
        with pytest.raises(ValueError):
            parse_mixture({"chicken": 0.5})


class TestChicken:
    def test_collinear_opposite_wins(self):
        raw = build_raw([
            [(0, 0), (-5, 0)],
            [(0, 0), (0, 5)],
            [(0, 0), (5, 0)],
        ])
        graph, _, _ = graph_from_raw(raw)
        origin = next(v.id for v in graph.vertices if (v.x, v.y) == (0.0, 0.0))
        pick = chicken_next_edge(graph, origin, (10.0, 0.0), set())
        assert graph.vertices[graph.edges[pick].dst].x == -5.0

    def test_single_outgoing_edge(self):
        raw = build_raw([[(0, 0), (5, 0)]])
        graph, _, _ = graph_from_raw(raw)
        origin = next(v.id for v in graph.vertices if v.x == 0)
        pick = chicken_next_edge(graph, origin, (-100.0, 0.0), set())
        assert pick is not None

    def test_matches_brute_force_argmax(self):
        rng = random.Random(9)
        for _ in range(30):
            n_spokes = rng.randint(2, 7)
            pts = [(rng.uniform(-100, 100), rng.uniform(-100, 100)) for _ in range(n_spokes)]
            raw = build_raw([[(0.0, 0.0), p] for p in pts])
            graph, _, _ = graph_from_raw(raw)
            origin = next(v.id for v in graph.vertices if (v.x, v.y) == (0.0, 0.0))
            event = (rng.uniform(-100, 100), rng.uniform(-100, 100))
            pick = chicken_next_edge(graph, origin, event, set())
            best = None
            for eid in graph.out_edges[origin]:
                far = graph.vertices[graph.edges[eid].dst]
                ang = angle_between(event[0], event[1], far.x, far.y)
                if best is None or (-ang, eid) < best[:2]:
                    best = (-ang, eid)
            assert pick == best[1]


class TestPlanar:
    def test_two_hop_bearing_on_grid(self):
        graph = grid_graph(5, 5, 100.0)
        origin = next(v.id for v in graph.vertices if (v.x, v.y) == (200.0, 200.0))
        pick = planar_next_edge(graph, origin, math.pi / 2, "hops", 2, [], set())
        dst = graph.vertices[graph.edges[pick].dst]
        assert (dst.x, dst.y) == (200.0, 300.0)  # due north

    def test_one_hop_degenerates_to_edge_angles(self):
        graph = grid_graph(3, 3, 100.0)
        origin = next(v.id for v in graph.vertices if (v.x, v.y) == (100.0, 100.0))
        pick = planar_next_edge(graph, origin, 0.0, "hops", 1, [], set())
        dst = graph.vertices[graph.edges[pick].dst]
        assert (dst.x, dst.y) == (200.0, 100.0)  # due east neighbor

    def test_barred_direction_falls_back(self):
        graph = grid_graph(3, 3, 100.0)
        origin = next(v.id for v in graph.vertices if (v.x, v.y) == (100.0, 100.0))
        east = next(e.id for e in graph.edges
                    if e.src == origin and graph.vertices[e.dst].x == 200.0
                    and graph.vertices[e.dst].y == 100.0)
        pick = planar_next_edge(graph, origin, 0.0, "hops", 1, [], {east})
        assert pick != east
        dst = graph.vertices[graph.edges[pick].dst]
        assert dst.y in (0.0, 200.0)  # next-best angular candidates

    def test_matches_exhaustive_candidate_scan(self):
        graph = grid_graph(5, 5, 100.0)
        table = build_next_hop_tables(graph)
        rng = random.Random(4)
        for _ in range(30):
            origin = rng.randrange(len(graph.vertices))
            bearing = rng.uniform(-math.pi, math.pi)
            pick = planar_next_edge(graph, origin, bearing, "hops", 2, [], set())
            # oracle: BFS to depth 2, min angular deviation, ties by vertex id
            seen = {origin: None}
            frontier = [(origin, None)]
            for _ in range(2):
                nxt = []
                for u, first in frontier:
                    for eid in graph.out_edges[u]:
                        w = graph.edges[eid].dst
                        if w not in seen:
                            seen[w] = first if first is not None else eid
                            nxt.append((w, seen[w]))
                frontier = nxt
            o = graph.vertices[origin]

            def dev(w):
                vw = graph.vertices[w]
                d = math.atan2(vw.y - o.y, vw.x - o.x) - bearing
                return abs((d + math.pi) % (2 * math.pi) - math.pi)

            best = min((w for w in seen if w != origin), key=lambda w: (dev(w), w))
            assert pick == seen[best]

    def test_euclidean_horizon(self):
        graph = grid_graph(5, 5, 100.0)
        origin = next(v.id for v in graph.vertices if (v.x, v.y) == (200.0, 200.0))
        pick = planar_next_edge(graph, origin, math.pi / 2, "euclidean", 150.0, [], set())
        dst = graph.vertices[graph.edges[pick].dst]
        assert (dst.x, dst.y) == (200.0, 300.0)


class TestLocalModes:
    def cross(self):
        raw = build_raw([
            [(0, 0), (100, 0)],
            [(0, 0), (0, 100)],
            [(0, 0), (-100, 0)],
            [(0, 0), (0, -100)],
        ])
        graph, _, _ = graph_from_raw(raw)
        center = next(v.id for v in graph.vertices if (v.x, v.y) == (0.0, 0.0))
        return graph, center

    def test_roadrunner_ties_break_by_lowest_id(self):
        graph, center = self.cross()
        density = [0.0] * len(graph.edges)
        flow = [0] * len(graph.edges)
        pick = local_next_edge(Mode.ROADRUNNER, graph, center, density, flow, [], set(),
                               random.Random(0))
        assert pick == min(graph.out_edges[center])

    def test_roadrunner_avoids_recent_then_falls_back(self):
        graph, center = self.cross()
        density = [0.0] * len(graph.edges)
        flow = [0] * len(graph.edges)
        recent = list(graph.out_edges[center][:3])
        pick = local_next_edge(Mode.ROADRUNNER, graph, center, density, flow, recent, set(),
                               random.Random(0))
        assert pick == graph.out_edges[center][3]
        all_recent = list(graph.out_edges[center])
        pick = local_next_edge(Mode.ROADRUNNER, graph, center, density, flow, all_recent,
                               set(), random.Random(0))
        assert pick in all_recent  # preference, not a deadlock

    def test_sheep_follows_the_flow(self):
        graph, center = self.cross()
        density = [0.0] * len(graph.edges)
        flow = [0] * len(graph.edges)
        busy = graph.out_edges[center][2]
        flow[busy] = 30
        for other in graph.out_edges[center]:
            if other != busy:
                flow[other] = 5
        pick = local_next_edge(Mode.SHEEP, graph, center, density, flow, [], set(),
                               random.Random(0))
        assert pick == busy

    def test_wandering_is_uniform(self):
        graph, center = self.cross()
        density = [0.0] * len(graph.edges)
        flow = [0] * len(graph.edges)
        rng = random.Random(5)
        n = 10_000
        counts = {}
        for _ in range(n):
            pick = local_next_edge(Mode.WANDERING, graph, center, density, flow, [], set(), rng)
            counts[pick] = counts.get(pick, 0) + 1
        for eid in graph.out_edges[center]:
            sigma = math.sqrt(0.25 * 0.75 * n)
            assert abs(counts.get(eid, 0) - n / 4) <= 3 * sigma


class TestJamEscapeAndBdi:
    def test_free_flowing_agent_stays_normal(self):
        world = grid_world(rows=4, cols=4, edge_length=150, rate=0.2, seed=6,
                           drivers=uniform_fleet(saturation_threshold=Distribution(90.0)))
        for _ in range(240):
            world.tick()
        assert all(v.mode == Mode.NORMAL for v in world.vehicles.values())

    def test_stopped_vehicle_trips_saturation(self):
        raw = build_raw([[(0, 0), (300, 0)], [(300, 0), (600, 0)], [(300, 0), (300, 300)]])
        graph, _, _ = graph_from_raw(raw)
        world = make_world(graph, sampler=None,
                           drivers=uniform_fleet(saturation_threshold=Distribution(90.0),
                                                 blocker_tendency=Distribution(0.0)))
        feeder = next(e for e in graph.edges
                      if graph.vertices[e.src].x == 0 and graph.vertices[e.dst].x == 300)
        target = next(e for e in graph.edges
                      if graph.vertices[e.src].x == 300 and graph.vertices[e.dst].x == 600)
        s = 6.0
        while s < target.length - 2:
            world.place_vehicle(target.id, 0, s).parked = True
            s += 6.6
        veh = world.place_vehicle(feeder.id, 0, feeder.length - 20, v=5.0, dest=target.dst)
        for _ in range(120 * 2):  # 120 s stopped >> 90 s threshold
            world.tick()
        assert veh.annoyance >= 90.0 or veh.mode != Mode.NORMAL
        assert veh.mode == Mode.JAM_ESCAPE

    def test_annoyance_decays_to_zero_when_moving(self):
        raw = build_raw([[(0, 0), (3000, 0)]])
        graph, _, _ = graph_from_raw(raw)
        world = make_world(graph, sampler=None)
        veh = world.place_vehicle(0, 0, 10.0, v=10.0, dest=graph.edges[0].dst)
        veh.annoyance = 40.0
        for _ in range(200):  # 100 s of free driving
            world.tick()
            if veh.id not in world.vehicles:
                break
        assert veh.annoyance == 0.0

    def test_roadrunner_downgrades_to_wandering(self):
        world = grid_world(rows=3, cols=3, edge_length=150)
        veh = world.place_vehicle(0, 0, 10.0)
        veh.mode = Mode.ROADRUNNER
        veh.parked = True  # pin it so annoyance grows past patience
        veh.annoyance_at_entry = 0.0
        for _ in range(130):  # 65 s > 60 s patience
            world.tick()
        assert veh.mode == Mode.WANDERING
        moves = [(t[2], t[3]) for t in world.transitions if t[1] == veh.id]
        assert ("roadrunner", "wandering") in moves

    def test_sheep_downgrades_to_roadrunner(self):
        world = grid_world(rows=3, cols=3, edge_length=150)
        veh = world.place_vehicle(0, 0, 10.0)
        veh.mode = Mode.SHEEP
        veh.parked = True
        for _ in range(130):
            world.tick()
        assert veh.mode == Mode.ROADRUNNER

    def test_chicken_keeps_mode_but_raises_threshold(self):
        world = grid_world(rows=3, cols=3, edge_length=150)
        veh = world.place_vehicle(0, 0, 10.0)
        veh.mode = Mode.CHICKEN
        veh.parked = True
        before = veh.saturation_threshold
        for _ in range(130):
            world.tick()
        assert veh.mode == Mode.CHICKEN
        assert veh.saturation_threshold >= before * 1.5

    def test_pragmatic_pops_reached_waypoint(self):
        raw = build_raw([[(0, 0), (200, 0)], [(200, 0), (400, 0)], [(400, 0), (600, 0)]])
        graph, _, _ = graph_from_raw(raw)
        world = make_world(graph, sampler=None)
        v_mid = next(v.id for v in graph.vertices if v.x == 400)
        v_end = next(v.id for v in graph.vertices if v.x == 600)
        feeder = next(e for e in graph.edges
                      if graph.vertices[e.src].x == 0 and graph.vertices[e.dst].x == 200)
        veh = world.place_vehicle(feeder.id, 0, 10.0, v=5.0, dest=v_mid)
        veh.mode = Mode.PRAGMATIC
        veh.desires = [v_mid, v_end]
        world._decide_next(veh, graph.edges[veh.edge])
        for _ in range(400):
            world.tick()
            if veh.id not in world.vehicles:
                break
        assert world.arrivals == 1
        assert veh.dest == v_end  # second desire became the goal after the first


class TestSpectator:
    def test_global_heads_to_nearest_vertex_and_parks(self):
        world = grid_world(rows=4, cols=4, edge_length=150)
        event = CrisisEvent(230.0, 160.0, 10.0, 1.0, 0,
                            parse_mixture({"spectator": 1.0}), parse_mixture({"spectator": 1.0}))
        veh = world.place_vehicle(0, 0, 10.0, v=5.0)
        world.add_crisis(event)
        assert veh.mode == Mode.SPECTATOR
        target = nearest_vertex(world.graph, 230.0, 160.0)
        assert veh.dest == target
        for _ in range(600):
            world.tick()
            if veh.parked:
                break
        assert veh.parked
        assert world.graph.edges[veh.edge].dst == target

    def test_parks_immediately_if_already_at_the_scene(self):
        world = grid_world(rows=4, cols=4, edge_length=150)
        veh = world.place_vehicle(0, 0, 100.0, v=5.0)
        edge = world.graph.edges[0]
        scene = world.graph.vertices[edge.dst]
        event = CrisisEvent(scene.x, scene.y, 400.0, 1.0, 0,
                            parse_mixture({"spectator": 1.0}), parse_mixture({"spectator": 1.0}))
        world.add_crisis(event)
        for _ in range(200):
            world.tick()
            if veh.parked:
                break
        assert veh.parked
        assert world.graph.edges[veh.edge].dst == scene.id
