"""Agent decision layer.

Strategic: where trips start and end, and the table-backed initial plan.
Tactical: jam escape via least-dense detours, advice at jammed junctions.
Crisis: the six extraordinary modes (chicken, spectator, pragmatic,
wandering, roadrunner, sheep) across their global / planar / local classes.
The per-agent mental state lives on the Vehicle (beliefs: crisis source,
recently used edges, accumulated annoyance; desires: destination list;
intentions: mode plus patience parameters).
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field

from .errors import NoFeasiblePair, Unreachable
from .routing import NextHopTable, TrafficGraph, UNREACHABLE, shortest_path
from .sim.vehicle import Mode, MODES_BY_NAME, Vehicle

# sentinels returned by next-edge decisions
NEXT_EXIT = -2   # leave the modeled network (map exit)
NEXT_PARK = -3   # stop at the end of the current edge and stay


@dataclass
class BehaviorParams:
    stop_speed: float = 0.5          # below this a vehicle counts as stopped, m/s
    annoyance_decay: float = 0.5     # relief per second while moving
    jam_resume_distance: float = 500.0
    recent_edges: int = 8
    patience_s: float = 60.0         # annoyance growth that makes a mode feel useless
    patience_factor: float = 1.5     # threshold raise for modes that keep going
    spectator_class: str = "global"  # or "planar"
    planar_metric: str = "hops"      # or "euclidean"
    planar_limit: float = 2.0


@dataclass
class CrisisEvent:
    x: float
    y: float
    radius: float
    intensity: float
    start_tick: int
    inside_mixture: list[tuple[Mode, float]]
    outside_mixture: list[tuple[Mode, float]]


def parse_mixture(spec: dict[str, float]) -> list[tuple[Mode, float]]:
    """Mode-name -> probability table; must sum to 1."""
    total = sum(spec.values())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"behavior mixture sums to {total}, expected 1")
    out = []
    for name, p in spec.items():
        if p < 0:
            raise ValueError(f"negative probability for {name}")
        out.append((MODES_BY_NAME[name], p))
    return out


def draw_from_mixture(mixture: list[tuple[Mode, float]], rng: random.Random) -> Mode:
    roll = rng.random()
    acc = 0.0
    for mode, p in mixture:
        acc += p
        if roll < acc:
            return mode
    return mixture[-1][0]


# --- strategic: origins, destinations, plans -------------------------------


def _preset_weights(preset: str) -> tuple:
    if preset == "uniform":
        return (lambda r: 1.0), (lambda r: 1.0)
    if preset == "morning-inbound":
        return (lambda r: 0.2 + 0.8 * r), (lambda r: 1.0 - 0.8 * r)
    if preset == "evening-outbound":
        return (lambda r: 1.0 - 0.8 * r), (lambda r: 0.2 + 0.8 * r)
    raise ValueError(f"unknown od preset {preset!r}")


class OdSampler:
    """Radially weighted origin/destination draws over the graph vertices."""

    def __init__(self, graph: TrafficGraph, table: NextHopTable,
                 preset: str = "uniform",
                 source_weights: list[float] | None = None,
                 sink_weights: list[float] | None = None,
                 center: tuple[float, float] | None = None):
        self.graph = graph
        self.table = table
        xs = [v.x for v in graph.vertices]
        ys = [v.y for v in graph.vertices]
        self.center = center if center is not None else ((min(xs) + max(xs)) / 2, (min(ys) + max(ys)) / 2)
        radii = [math.hypot(v.x - self.center[0], v.y - self.center[1]) for v in graph.vertices]
        r_max = max(radii) or 1.0
        norm = [r / r_max for r in radii]

        if source_weights or sink_weights:
            src_fn = _interp_fn(source_weights) if source_weights else (lambda r: 1.0)
            dst_fn = _interp_fn(sink_weights) if sink_weights else (lambda r: 1.0)
        else:
            src_fn, dst_fn = _preset_weights(preset)

        self._sources = [v.id for v in graph.vertices if graph.out_edges[v.id]]
        self._sinks = [v.id for v in graph.vertices if graph.in_edges[v.id]]
        self._src_cum = _cumulative([max(src_fn(norm[v]), 0.0) for v in self._sources])
        self._dst_cum = _cumulative([max(dst_fn(norm[v]), 0.0) for v in self._sinks])
        if self._sources and self._src_cum[-1] <= 0:
            raise ValueError("source weight function is identically zero over the vertices")
        if self._sinks and self._dst_cum[-1] <= 0:
            raise ValueError("sink weight function is identically zero over the vertices")

    def _pick(self, ids: list[int], cum: list[float], rng: random.Random) -> int:
        return ids[bisect_right(cum, rng.random() * cum[-1])]

    def draw(self, rng: random.Random) -> tuple[int, int]:
        if not self._sources or not self._sinks:
            raise NoFeasiblePair("graph has no usable origin or destination vertices")
        for _ in range(100):
            o = self._pick(self._sources, self._src_cum, rng)
            d = self._pick(self._sinks, self._dst_cum, rng)
            if o != d and self.table.hop(o, d) != UNREACHABLE:
                return o, d
        raise NoFeasiblePair("100 draws found no distinct reachable origin/destination")

    def draw_sink(self, rng: random.Random, reachable_from: int) -> int | None:
        if not self._sinks:
            return None
        for _ in range(20):
            d = self._pick(self._sinks, self._dst_cum, rng)
            if d != reachable_from and self.table.hop(reachable_from, d) != UNREACHABLE:
                return d
        return None


def _cumulative(weights: list[float]) -> list[float]:
    cum = []
    acc = 0.0
    for w in weights:
        acc += w
        cum.append(acc)
    return cum


def _interp_fn(samples: list[float]):
    n = len(samples)
    if n == 1:
        return lambda r: samples[0]

    def fn(r: float) -> float:
        t = min(max(r, 0.0), 1.0) * (n - 1)
        i = min(int(t), n - 2)
        return samples[i] + (samples[i + 1] - samples[i]) * (t - i)

    return fn


def strategic_plan(graph: TrafficGraph, table: NextHopTable, origin: int, dest: int) -> list[int]:
    """Initial route as an ordered edge list; raises Unreachable."""
    return shortest_path(table, graph, origin, dest)


# --- per-mode next-edge choices --------------------------------------------


def angle_between(ux: float, uy: float, vx: float, vy: float) -> float:
    nu = math.hypot(ux, uy)
    nv = math.hypot(vx, vy)
    if nu == 0 or nv == 0:
        return 0.0
    c = (ux * vx + uy * vy) / (nu * nv)
    return math.acos(min(1.0, max(-1.0, c)))


def chicken_next_edge(graph: TrafficGraph, vertex: int, event_xy: tuple[float, float],
                      barred: set[int]) -> int | None:
    """Widest angle between the ray to the event and the ray to the far node."""
    vx = graph.vertices[vertex]
    ex, ey = event_xy[0] - vx.x, event_xy[1] - vx.y
    best = None
    for eid in graph.out_edges[vertex]:
        if eid in barred:
            continue
        far = graph.vertices[graph.edges[eid].dst]
        ang = angle_between(ex, ey, far.x - vx.x, far.y - vx.y)
        if best is None or (-ang, eid) < best[:2]:
            best = (-ang, eid, eid)
    return best[2] if best else None


def planar_next_edge(graph: TrafficGraph, vertex: int, bearing: float,
                     metric: str, limit: float,
                     recent: list[int], barred: set[int]) -> int | None:
    """Head for the in-horizon intersection closest to the desired bearing.

    Horizon is hops or Euclidean meters; candidates reached first through a
    recently used edge are skipped unless that excludes everything.
    """
    vx = graph.vertices[vertex]
    max_hops = int(limit) if metric == "hops" else 16
    first_edge: dict[int, int] = {}
    depth: dict[int, int] = {vertex: 0}
    queue = [vertex]
    candidates: list[tuple[int, int]] = []  # (vertex, first edge)
    while queue:
        nxt: list[int] = []
        for u in queue:
            if depth[u] >= max_hops:
                continue
            for eid in graph.out_edges[u]:
                if eid in barred:
                    continue
                w = graph.edges[eid].dst
                if w in depth:
                    continue
                if metric == "euclidean":
                    wv = graph.vertices[w]
                    if math.hypot(wv.x - vx.x, wv.y - vx.y) > limit:
                        continue
                depth[w] = depth[u] + 1
                first_edge[w] = first_edge.get(u, eid)
                candidates.append((w, first_edge[w]))
                nxt.append(w)
        queue = nxt
    if not candidates:
        return None

    def deviation(w: int) -> float:
        wv = graph.vertices[w]
        return abs(_angle_diff(math.atan2(wv.y - vx.y, wv.x - vx.x), bearing))

    fresh = [(w, e) for w, e in candidates if e not in recent]
    pool = fresh or candidates
    best = min(pool, key=lambda we: (deviation(we[0]), we[0]))
    return best[1]


def _angle_diff(a: float, b: float) -> float:
    d = (a - b + math.pi) % (2 * math.pi) - math.pi
    return d


def local_next_edge(mode: Mode, graph: TrafficGraph, vertex: int,
                    edge_density: list[float], edge_flow: list[int],
                    recent: list[int], barred: set[int],
                    rng: random.Random) -> int | None:
    candidates = [eid for eid in graph.out_edges[vertex] if eid not in barred]
    if not candidates:
        return None
    if mode == Mode.WANDERING:
        return candidates[rng.randrange(len(candidates))]
    if mode == Mode.ROADRUNNER:
        pool = [eid for eid in candidates if eid not in recent] or candidates
        return min(pool, key=lambda eid: (edge_density[eid], eid))
    if mode == Mode.SHEEP:
        return max(candidates, key=lambda eid: (edge_flow[eid], -eid))
    raise ValueError(f"{mode} is not a local mode")


def jam_escape_next_edge(graph: TrafficGraph, vertex: int, edge_density: list[float],
                         recent: list[int], barred: set[int]) -> int | None:
    """Least-dense outgoing edge, avoiding recently used ones when possible."""
    candidates = [eid for eid in graph.out_edges[vertex] if eid not in barred]
    if not candidates:
        return None
    pool = [eid for eid in candidates if eid not in recent] or candidates
    return min(pool, key=lambda eid: (edge_density[eid], eid))


def nearest_vertex(graph: TrafficGraph, x: float, y: float) -> int:
    return min(graph.vertices, key=lambda v: ((v.x - x) ** 2 + (v.y - y) ** 2, v.id)).id


# --- crisis onset -----------------------------------------------------------


def on_crisis(vehicle: Vehicle, position: tuple[float, float], event: CrisisEvent,
              graph: TrafficGraph, table: NextHopTable, sampler: OdSampler | None,
              tick: int) -> Mode | None:
    """Roll the vehicle's reaction; returns the new mode or None if unchanged."""
    dx = position[0] - event.x
    dy = position[1] - event.y
    inside = math.hypot(dx, dy) <= event.radius
    rng = vehicle.rng
    if inside:
        if rng.random() >= event.intensity:
            return None
        new_mode = draw_from_mixture(event.inside_mixture, rng)
    else:
        new_mode = draw_from_mixture(event.outside_mixture, rng)

    vehicle.crisis_x = event.x
    vehicle.crisis_y = event.y
    vehicle.crisis_tick = tick
    if new_mode == vehicle.mode:
        return None

    if new_mode == Mode.PRAGMATIC and sampler is not None:
        anchor = graph.edges[vehicle.edge].dst if vehicle.edge >= 0 else vehicle.dest
        fresh = sampler.draw_sink(rng, anchor) if anchor >= 0 else None
        if fresh is not None:
            vehicle.dest = fresh
            vehicle.desires = [fresh]
            vehicle.plan = []
            vehicle.plan_i = 0
    elif new_mode == Mode.SPECTATOR:
        vehicle.dest = nearest_vertex(graph, event.x, event.y)
        vehicle.desires = [vehicle.dest]
        vehicle.plan = []
        vehicle.plan_i = 0
    return new_mode
