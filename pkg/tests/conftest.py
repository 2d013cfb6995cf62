"""Shared fixture builders: ring roads, grids, and the two-route network."""

from __future__ import annotations

import math

import pytest

from urbanflow.behaviors import BehaviorParams, OdSampler
from urbanflow.congestion import EncumbranceField, TransporterParams
from urbanflow.ingest import generate_synthetic
from urbanflow.ingest.network import AttributeRecord, Direction, RawNetwork
from urbanflow.ingest.shp import Point, Polyline
from urbanflow.metrics import MetricsCollector
from urbanflow.routing import (
    RoutingParams,
    TrafficGraph,
    build_next_hop_tables,
    derive_traffic_graph,
)
from urbanflow.sim.vehicle import Distribution, DriverDistributions
from urbanflow.sim.world import SimParams, SpawnProfile, World
from urbanflow.topology import build_dcel, build_point_index, build_topo_graph, classify_points


def build_raw(polylines_pts, attrs=None, zlevels=None, lanes=1, speed=13.9,
              direction=Direction.BOTH):
    """RawNetwork from bare point lists, one polyline each."""
    polys = [Polyline(id=i, parts=[(0, len(pts))], points=[Point(*p) for p in pts])
             for i, pts in enumerate(polylines_pts)]
    if attrs is None:
        attrs = [AttributeRecord(i, {}, lanes, speed, direction) for i in range(len(polys))]
    xs = [p.x for poly in polys for p in poly.points]
    ys = [p.y for poly in polys for p in poly.points]
    return RawNetwork(polys, attrs, zlevels or {}, (min(xs), min(ys), max(xs), max(ys)))


def graph_from_raw(raw, epsilon=0.01, routing=None):
    index = build_point_index(raw, epsilon)
    classification = classify_points(index)
    topo = build_topo_graph(raw, index, classification)
    dcel = build_dcel(topo)
    return derive_traffic_graph(topo, dcel, routing or RoutingParams()), topo, dcel


def uniform_fleet(**overrides) -> DriverDistributions:
    """All-identical drivers; overrides replace single parameters."""
    base = dict(
        a_max=Distribution(1.5), b_comfort=Distribution(2.0), headway=Distribution(1.2),
        s0=Distribution(2.0), delta=Distribution(4.0), speed_compliance=Distribution(1.0),
        length=Distribution(4.5), blocker_tendency=Distribution(0.3),
        saturation_threshold=Distribution(1e9), stubbornness=Distribution(0.2),
    )
    base.update(overrides)
    return DriverDistributions(**base)


def make_world(graph, table=None, rate=0.0, seed=1, drivers=None, sim=None,
               behavior=None, transporters=None, sampler="auto"):
    table = table if table is not None else build_next_hop_tables(graph)
    field = EncumbranceField(graph, table, transporters or TransporterParams())
    sim = sim or SimParams(debug_checks=True)
    metrics = MetricsCollector(len(graph.edges), sim.dt)
    if sampler == "auto":
        sampler = OdSampler(graph, table)
    return World(graph, table, field, metrics, sampler, sim,
                 behavior or BehaviorParams(), drivers or uniform_fleet(),
                 SpawnProfile([(0.0, rate)]), seed=seed)


# --- ring road --------------------------------------------------------------


def ring_graph(total_length=2000.0, segments=16, speed=13.9):
    """One-way circular road built from straight chords of equal length."""
    radius = total_length / (2 * segments * math.sin(math.pi / segments))
    pts = [Point(radius * math.cos(2 * math.pi * i / segments),
                 radius * math.sin(2 * math.pi * i / segments))
           for i in range(segments)]
    raw = build_raw(
        [[pts[i], pts[(i + 1) % segments]] for i in range(segments)],
        attrs=[AttributeRecord(i, {}, 1, speed, Direction.FORWARD) for i in range(segments)],
    )
    graph, topo, dcel = graph_from_raw(raw)
    return graph


def ring_chain(graph):
    """Edge ids in driving order with their cumulative start offsets."""
    chain = [0]
    while len(chain) < len(graph.edges):
        cur = graph.edges[chain[-1]]
        chain.append(graph.out_edges[cur.dst][0])
    offsets = {}
    off = 0.0
    for eid in chain:
        offsets[eid] = off
        off += graph.edges[eid].length
    return chain, offsets, off


def place_uniform_ring(world, count):
    """Globally uniform spacing around the loop, standstill start."""
    chain, offsets, total = ring_chain(world.graph)
    for i in range(count):
        pos = i * total / count
        for eid in chain:
            if offsets[eid] <= pos < offsets[eid] + world.graph.edges[eid].length:
                world.place_vehicle(eid, 0, pos - offsets[eid])
                break
    return total


def ring_world(n_vehicles=100, total_length=2000.0, segments=16, seed=3, **kwargs):
    graph = ring_graph(total_length, segments)
    world = make_world(graph, sampler=None, seed=seed, **kwargs)
    place_uniform_ring(world, n_vehicles)
    return world


# --- grid -------------------------------------------------------------------


def grid_world(rows=10, cols=10, edge_length=200.0, rate=0.0, seed=1, lanes=1,
               exit_stubs=False, **kwargs):
    raw = generate_synthetic(
        {"kind": "grid", "rows": rows, "cols": cols, "edge_length": edge_length,
         "lanes": lanes, "exit_stubs": exit_stubs}, seed)
    graph, topo, dcel = graph_from_raw(raw)
    return make_world(graph, rate=rate, seed=seed, **kwargs)


# --- two routes between a source and a sink ----------------------------------


def two_route_raw(short_length=300.0, long_length=900.0, bottleneck_speed=None,
                  one_way=False):
    """S -> T via a short two-hop route (through A) or a long one (through B).

    The short route is strictly more attractive by static weight. With
    bottleneck_speed set its second leg crawls, so sustained demand backs up
    onto the first leg without losing the static preference; one_way removes
    the U-turn escape so the queue has to sit there.
    """
    from urbanflow.ingest.network import AttributeRecord, Direction

    half_s = short_length / 2
    half_l = long_length / 2
    s = (0.0, 0.0)
    a = (half_s, 60.0)
    b = (half_l, -220.0)
    t = (short_length, 0.0)
    streets = [
        [s, a],          # 0: S-A      (short route, leg 1)
        [a, t],          # 1: A-T      (short route, leg 2)
        [s, b],          # 2: S-B      (long route, leg 1)
        [b, t],          # 3: B-T      (long route, leg 2)
    ]
    speeds = [13.9, bottleneck_speed or 13.9, 13.9, 13.9]
    direction = Direction.FORWARD if one_way else Direction.BOTH
    attrs = [AttributeRecord(i, {}, 1, speeds[i], direction) for i in range(4)]
    return build_raw(streets, attrs=attrs)


@pytest.fixture
def two_route_world():
    raw = two_route_raw()
    graph, topo, dcel = graph_from_raw(raw)
    return make_world(graph)
