"""Scenario execution: build the world from a config, script events, run.

The same building blocks serve the headless CLI run and the live service;
a scripted run and a served run receiving identical commands at identical
ticks produce identical world hashes.
"""

from __future__ import annotations

import os

from .behaviors import BehaviorParams, CrisisEvent, OdSampler, parse_mixture
from .config import EventCfg, ScenarioConfig
from .congestion import EncumbranceField, TransporterParams
from .errors import MalformedEvent, NetworkBuildError, UrbanflowError
from .ingest import generate_synthetic, load_network
from .metrics import MetricsCollector, MetricsParams, export_run, run_summary
from .routing import (
    NextHopTable,
    RoutingParams,
    TrafficGraph,
    build_next_hop_tables,
    derive_traffic_graph,
    require_edge,
)
from .sim.vehicle import Distribution, DriverDistributions
from .sim.world import SimParams, SpawnProfile, World
from .topology import build_dcel, build_point_index, build_topo_graph, classify_points


def build_network(config: ScenarioConfig) -> TrafficGraph:
    """Raw source -> topology -> directed traffic graph."""
    net = config.network
    try:
        if net.synthetic is not None:
            raw = generate_synthetic(net.synthetic.as_spec(), config.sim.seed)
        else:
            files = net.files
            with open(files.shp, "rb") as f:
                shp_bytes = f.read()
            with open(files.dbf, "rb") as f:
                dbf_bytes = f.read()
            zl = None
            if files.zlevels:
                with open(files.zlevels, "r", encoding="utf-8") as f:
                    zl = f.read()
            raw = load_network(shp_bytes, dbf_bytes, zl, files.mapping)
        index = build_point_index(raw, net.epsilon)
        classification = classify_points(index)
        topo = build_topo_graph(raw, index, classification)
        dcel = build_dcel(topo)
        return derive_traffic_graph(topo, dcel, routing_params(config))
    except UrbanflowError as exc:
        raise NetworkBuildError(str(exc)) from exc
    except OSError as exc:
        raise NetworkBuildError(f"cannot read network source: {exc}") from exc


def routing_params(config: ScenarioConfig) -> RoutingParams:
    r = config.routing
    return RoutingParams(
        speed_factor=r.speed_factor,
        lane_bonus=r.lane_bonus,
        slot_length=r.slot_length,
        huge_multiplier=r.huge_multiplier,
        encumbered_multiplier=r.encumbered_multiplier,
    )


def load_or_build_tables(graph: TrafficGraph, cache_path: str | None) -> NextHopTable:
    if cache_path and os.path.exists(cache_path):
        with open(cache_path, "rb") as f:
            table = NextHopTable.load(f.read())
        if table.n == len(graph.vertices):
            return table
    table = build_next_hop_tables(graph)
    if cache_path:
        with open(cache_path, "wb") as f:
            f.write(table.dump())
    return table


def _driver_distributions(config: ScenarioConfig) -> DriverDistributions:
    def dist(cfg) -> Distribution:
        lo = cfg.lo if cfg.lo is not None else float("-inf")
        hi = cfg.hi if cfg.hi is not None else float("inf")
        return Distribution(cfg.mean, cfg.sd, lo, hi)

    d = config.drivers
    return DriverDistributions(
        a_max=dist(d.a_max), b_comfort=dist(d.b_comfort), headway=dist(d.headway),
        s0=dist(d.s0), delta=dist(d.delta), speed_compliance=dist(d.speed_compliance),
        length=dist(d.length), blocker_tendency=dist(d.blocker_tendency),
        saturation_threshold=dist(d.saturation_threshold), stubbornness=dist(d.stubbornness),
    )


def make_world(config: ScenarioConfig, tables_path: str | None = None) -> World:
    graph = build_network(config)
    table = load_or_build_tables(graph, tables_path)

    t = config.transporters
    field = EncumbranceField(
        graph, table,
        TransporterParams(
            base_threshold=t.base_threshold, occupancy_weight=t.occupancy_weight,
            annoyed_weight=t.annoyed_weight, warning_decay=t.warning_decay,
            hysteresis=t.hysteresis, retable_budget=t.retable_budget,
        ),
        routing_params(config),
    )
    m = config.metrics
    metrics = MetricsCollector(
        len(graph.edges), config.sim.dt,
        MetricsParams(window_s=m.window_s, envelope_tolerance=m.envelope_tolerance,
                      envelope_flow_floor=m.envelope_flow_floor),
    )
    od = config.od
    sampler = OdSampler(graph, table, preset=od.preset,
                        source_weights=od.source_weights, sink_weights=od.sink_weights,
                        center=od.center)
    s = config.sim
    sim_params = SimParams(
        dt=s.dt, workers=s.workers, lane_change_gain=s.lane_change_gain,
        lane_change_cooldown=s.lane_change_cooldown, pre_exit_zone=s.pre_exit_zone,
        claim_gap=s.claim_gap, right_bias=s.right_bias,
        node_crossing_speed=s.node_crossing_speed, lane_width=s.lane_width,
        stop_margin=s.stop_margin, gap_floor=s.gap_floor, lookahead=s.lookahead,
        flow_window_s=s.flow_window_s, debug_checks=s.debug_checks,
    )
    b = config.behavior
    behavior = BehaviorParams(
        stop_speed=b.stop_speed, annoyance_decay=b.annoyance_decay,
        jam_resume_distance=b.jam_resume_distance, recent_edges=b.recent_edges,
        patience_s=b.patience_s, patience_factor=b.patience_factor,
        spectator_class=b.spectator_class, planar_metric=b.planar_metric,
        planar_limit=b.planar_limit,
    )
    if config.spawn.profile is not None:
        profile = SpawnProfile([(float(t0), float(r)) for t0, r in config.spawn.profile])
    else:
        profile = SpawnProfile([(0.0, config.spawn.rate)])

    world = World(graph, table, field, metrics, sampler, sim_params, behavior,
                  _driver_distributions(config), profile, seed=config.sim.seed)
    if config.initial_fleet.count > 0:
        world.populate_initial(config.initial_fleet.count, loop=config.initial_fleet.loop)
    return world


def apply_event(world: World, event: EventCfg, default_mixtures=None) -> None:
    """Scripted or live command, applied at a tick boundary."""
    kind = event.kind
    if kind == "bar_edge":
        require_edge(world.graph, event.edge)
        world.field.bar(event.edge, True, world.tick_index)
    elif kind == "unbar_edge":
        require_edge(world.graph, event.edge)
        world.field.bar(event.edge, False, world.tick_index)
    elif kind == "explosion":
        inside = event.inside if event.inside is not None else (
            default_mixtures.inside if default_mixtures else {"chicken": 1.0})
        outside = event.outside if event.outside is not None else (
            default_mixtures.outside if default_mixtures else {"normal": 1.0})
        crisis = CrisisEvent(
            x=event.x, y=event.y, radius=event.radius, intensity=event.intensity,
            start_tick=world.tick_index,
            inside_mixture=parse_mixture(inside),
            outside_mixture=parse_mixture(outside),
        )
        world.add_crisis(crisis)
    elif kind == "spawn_rate":
        world.set_spawn_rate(event.rate)
    else:
        raise MalformedEvent(f"unknown event kind {kind!r}")


def run_world(world: World, config: ScenarioConfig) -> World:
    """Advance through the whole configured duration, applying events."""
    n_ticks = int(round(config.sim.duration_s / config.sim.dt))
    by_tick: dict[int, list[EventCfg]] = {}
    for ev in config.events:
        by_tick.setdefault(ev.at_tick, []).append(ev)
    for tick in range(n_ticks):
        for ev in by_tick.get(tick, ()):
            apply_event(world, ev, config.crisis_defaults)
        world.tick()
    return world


def export_world(world: World, out_dir: str) -> dict[str, object]:
    final_hash = world.world_hash()
    # flush the trailing partial measurement window
    world.metrics.close_window(world.tick_index,
                               [e.length for e in world.graph.edges],
                               [e.lanes for e in world.graph.edges])
    summary = run_summary(world.spawned, world.arrivals, world.stranded_count,
                          world.evacuated, world.metrics, final_hash)
    export_run(out_dir, world.metrics.samples, world.transitions,
               world.field.events_csv(), summary)
    return summary


def run_headless(config: ScenarioConfig, out_dir: str | None = None,
                 tables_path: str | None = None) -> tuple[World, dict[str, object]]:
    world = make_world(config, tables_path)
    run_world(world, config)
    summary = export_world(world, out_dir or config.output.dir)
    return world, summary


def snapshot(world: World, vehicle_cap: int = 20000) -> dict:
    """JSON-ready world view; positions interpolated along edge geometry."""
    vehicles = []
    items = sorted(world.vehicles.items())
    stride = max(1, (len(items) + vehicle_cap - 1) // vehicle_cap) if vehicle_cap else 1
    for i, (vid, veh) in enumerate(items):
        if stride > 1 and i % stride:
            continue
        if veh.node_until >= 0:
            vx = world.graph.vertices[world.graph.edges[veh.edge].dst]
            x, y, heading = vx.x, vx.y, 0.0
        else:
            x, y, heading = world.graph.point_at(veh.edge, veh.s)
        vehicles.append({
            "id": vid, "x": round(x, 2), "y": round(y, 2),
            "heading": round(heading, 3), "speed": round(veh.v, 2),
            "mode": veh.mode.name.lower(),
        })
    edges = []
    field = world.field
    for eid in range(len(world.graph.edges)):
        density = world.edge_density[eid]
        barred = eid in field.barred
        encumbered = eid in field.encumbered_edges
        if density > 0 or barred or encumbered:
            edges.append({
                "id": eid, "density": round(density, 2),
                "encumbered": encumbered, "barred": barred,
            })
    return {
        "type": "snapshot",
        "tick": world.tick_index,
        "time_s": world.tick_index * world.sim.dt,
        "vehicles": vehicles,
        "edges": edges,
        "events": [
            {"x": ev.x, "y": ev.y, "radius": ev.radius, "intensity": ev.intensity}
            for ev in world.events
        ],
        "counters": {
            "in_world": len(world.vehicles),
            "spawned": world.spawned,
            "arrivals": world.arrivals,
            "stranded": world.stranded_count,
            "modes": world.mode_counts,
        },
        "world_hash": world.world_hash(),
    }


def network_message(graph: TrafficGraph) -> dict:
    return {
        "type": "network",
        "vertices": [{"id": v.id, "x": round(v.x, 2), "y": round(v.y, 2)}
                     for v in graph.vertices],
        "edges": [
            {
                "id": e.id, "from": e.src, "to": e.dst, "lanes": e.lanes,
                "points": [[round(p.x, 2), round(p.y, 2)] for p in graph.edge_points(e.id)],
            }
            for e in graph.edges
        ],
    }
