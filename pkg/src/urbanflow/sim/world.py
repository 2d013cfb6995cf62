"""Fixed-timestep world advance.

Each tick runs two phases. Perceive: every vehicle derives an intended
acceleration, lane action and edge-end action from the immutable previous
state (parallelizable; per-agent rng streams keep decisions order
independent). Commit: a single deterministic schedule applies lane changes,
integrates kinematics front-to-back per lane with a hard no-overlap guard,
resolves crossing conflicts by polar-ring priority, moves vehicles through
junction containers, spawns and despawns, then refreshes congestion
sentinels and measurement accumulators. Identical (network, scenario, seed)
inputs give identical states regardless of the worker count.
"""

from __future__ import annotations

import hashlib
import math
import random
import struct
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..behaviors import (
    BehaviorParams,
    CrisisEvent,
    NEXT_EXIT,
    NEXT_PARK,
    OdSampler,
    chicken_next_edge,
    jam_escape_next_edge,
    local_next_edge,
    on_crisis,
    planar_next_edge,
)
from ..congestion import EncumbranceField
from ..errors import NoFeasiblePair, SimulationInvariantError, Unreachable
from ..metrics import MetricsCollector
from ..routing import NextHopTable, TrafficGraph, UNREACHABLE, shortest_path
from .idm import EMERGENCY_FACTOR
from .vehicle import (
    CROSS_LEAVE,
    CROSS_MOVE,
    CROSS_NODE,
    CROSS_NONE,
    CROSS_WAIT,
    DriverDistributions,
    Mode,
    MODE_NAMES,
    Vehicle,
)

NEXT_ARRIVE = -4
NEXT_WAIT = -1

_MODE_NAME = {int(m): MODE_NAMES[m] for m in Mode}


@dataclass
class SimParams:
    dt: float = 0.5
    workers: int = 1
    lane_change_gain: float = 0.2      # m/s^2 advantage required to move over
    lane_change_cooldown: float = 5.0  # s between changes
    pre_exit_zone: float = 50.0        # m before the edge end where turn lanes matter
    claim_gap: float = 3.0             # m from the stop line where claims start
    right_bias: float = 0.6            # lane-entry preference decay per lane leftward
    node_crossing_speed: float = 5.0   # m/s assumed while crossing the junction box
    lane_width: float = 3.5
    stop_margin: float = 0.5           # m short of the stop line a waiting vehicle halts
    gap_floor: float = 0.1             # m minimum bumper clearance the guard enforces
    lookahead: float = 60.0            # m from the edge end where junction state matters
    flow_window_s: float = 30.0        # entries window local behaviors read
    debug_checks: bool = False


@dataclass
class TickReport:
    tick: int
    spawned: int = 0
    despawned: int = 0
    arrivals: int = 0
    lane_changes: int = 0
    node_blocked: int = 0


@dataclass
class SpawnProfile:
    """Piecewise-constant arrival rate, veh/s."""

    steps: list[tuple[float, float]] = field(default_factory=lambda: [(0.0, 0.0)])

    def rate_at(self, t: float) -> float:
        rate = self.steps[0][1]
        for t0, r in self.steps:
            if t >= t0:
                rate = r
            else:
                break
        return rate


def _poisson(lam: float, rng: random.Random) -> int:
    if lam <= 0:
        return 0
    threshold = math.exp(-lam)
    k = 0
    p = 1.0
    while True:
        p *= rng.random()
        if p <= threshold:
            return k
        k += 1


class World:
    def __init__(self, graph: TrafficGraph, table: NextHopTable,
                 field_: EncumbranceField, metrics: MetricsCollector,
                 sampler: OdSampler | None,
                 sim: SimParams, behavior: BehaviorParams,
                 drivers: DriverDistributions, spawn: SpawnProfile,
                 seed: int):
        self.graph = graph
        self.table = table
        self.field = field_
        self.metrics = metrics
        self.sampler = sampler
        self.sim = sim
        self.behavior = behavior
        self.drivers = drivers
        self.spawn_profile = spawn
        self.seed = seed

        self.tick_index = 0
        self.vehicles: dict[int, Vehicle] = {}
        self.lane_vehicles: list[list[list[Vehicle]]] = [
            [[] for _ in range(e.lanes)] for e in graph.edges
        ]
        self.active_edges: set[int] = set()
        self.node_occupants: list[list[Vehicle]] = [[] for _ in graph.vertices]
        self.queues: dict[int, deque[Vehicle]] = {}
        self.events: list[CrisisEvent] = []
        self.transitions: list[tuple[int, int, str, str, str]] = []
        self.reports: list[TickReport] = []

        n_edges = len(graph.edges)
        self.edge_counts = [0] * n_edges
        self.edge_speed_sums = [0.0] * n_edges
        self.edge_density = [0.0] * n_edges   # veh/km/lane
        self.edge_annoyed = [0] * n_edges
        self.edge_entries_tick = [0] * n_edges
        self.edge_exits_tick = [0] * n_edges
        self._flow_cur = [0] * n_edges
        self.edge_flow = [0] * n_edges        # entries in the last closed window
        self._flow_ticks = max(1, round(sim.flow_window_s / sim.dt))
        self._end_heading: dict[int, float] = {}

        self.spawn_rng = random.Random(f"{seed}:spawn")
        self._next_id = 0
        self.spawned = 0
        self.generated = 0
        self.despawned = 0
        self.arrivals = 0
        self.evacuated = 0
        self.stranded_count = 0
        self.spawn_failures = 0
        self.mode_counts: dict[str, int] = {}
        self._pool: ThreadPoolExecutor | None = None

    # ------------------------------------------------------------------
    # vehicle lifecycle

    def _new_vehicle(self) -> Vehicle:
        vid = self._next_id
        self._next_id += 1
        rng = random.Random(f"{self.seed}:{vid}")
        veh = Vehicle(vid, self.drivers.sample(rng), rng)
        self.generated += 1
        return veh

    def generate_trip(self) -> Vehicle | None:
        """Draw an origin/destination pair and plan; queue at the origin."""
        if self.sampler is None:
            return None
        try:
            origin, dest = self.sampler.draw(self.spawn_rng)
        except NoFeasiblePair:
            self.spawn_failures += 1
            return None
        veh = self._new_vehicle()
        veh.dest = dest
        veh.desires = [dest]
        try:
            veh.plan = shortest_path(self.table, self.graph, origin, dest)
        except Unreachable:
            self.spawn_failures += 1
            return None
        veh.plan_i = 0
        for event in self.events:
            vx = self.graph.vertices[origin]
            self._apply_crisis_to(veh, (vx.x, vx.y), event)
        self.queues.setdefault(origin, deque()).append(veh)
        return veh

    def populate_initial(self, count: int, loop: bool = False) -> int:
        """Place vehicles mid-edge, evenly spaced per lane, before tick 0."""
        graph = self.graph
        eligible = [e.id for e in graph.edges]
        groups: dict[tuple[int, int], list[Vehicle]] = {}
        order: list[tuple[int, int]] = []
        for i in range(count):
            eid = eligible[i % len(eligible)]
            lane = (i // len(eligible)) % graph.edges[eid].lanes
            veh = self._new_vehicle()
            if loop:
                veh.dest = -1
            else:
                veh.dest = -1 if self.sampler is None else -2  # filled below
            key = (eid, lane)
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(veh)
        placed = 0
        for eid, lane in order:
            edge = graph.edges[eid]
            group = groups[(eid, lane)]
            n = len(group)
            spacing = edge.length / n
            for k, veh in enumerate(group):
                s = edge.length - spacing * k - spacing * 0.25
                if veh.dest == -2:
                    dest = self.sampler.draw_sink(veh.rng, edge.dst) if self.sampler else None
                    veh.dest = dest if dest is not None else -1
                veh.edge = eid
                veh.lane = lane
                veh.s = max(veh.length + 0.5, s)
                veh.v = 0.0
                veh.v_des = veh.speed_compliance * edge.speed_limit
                veh.spawn_tick = 0
                self.vehicles[veh.id] = veh
                self.lane_vehicles[eid][lane].append(veh)
                self.active_edges.add(eid)
                veh.push_recent(eid, self.behavior.recent_edges)
                self._decide_next(veh, edge)
                placed += 1
                self.spawned += 1
        for eid in self.active_edges:
            for lst in self.lane_vehicles[eid]:
                lst.sort(key=lambda veh: -veh.s)
                for a, b in zip(lst, lst[1:]):
                    if a.s - a.length - b.s <= 0:
                        b.s = a.s - a.length - self.sim.gap_floor - 0.4
        return placed

    def place_vehicle(self, edge_id: int, lane: int, s: float,
                      v: float = 0.0, dest: int = -1) -> Vehicle:
        """Insert one vehicle at an explicit position (fixtures, preloads)."""
        veh = self._new_vehicle()
        veh.dest = dest
        if dest >= 0:
            veh.desires = [dest]
        edge = self.graph.edges[edge_id]
        veh.edge = edge_id
        veh.lane = lane
        veh.s = min(max(s, 0.0), edge.length)
        veh.v_des = veh.speed_compliance * edge.speed_limit
        veh.v = min(v, veh.v_des)
        veh.spawn_tick = self.tick_index
        self.vehicles[veh.id] = veh
        self._insert_sorted(self.lane_vehicles[edge_id][lane], veh)
        self.active_edges.add(edge_id)
        self.spawned += 1
        veh.push_recent(edge_id, self.behavior.recent_edges)
        self._decide_next(veh, edge)
        return veh

    def vehicle_xy(self, veh: Vehicle) -> tuple[float, float]:
        if veh.edge >= 0 and veh.s >= 0:
            x, y, _ = self.graph.point_at(veh.edge, veh.s)
            return x, y
        return 0.0, 0.0

    # ------------------------------------------------------------------
    # crisis events

    def add_crisis(self, event: CrisisEvent) -> None:
        """Global, instantaneous perception: every agent rolls its reaction."""
        self.events.append(event)
        for veh in self.vehicles.values():
            pos = self.vehicle_xy(veh)
            self._apply_crisis_to(veh, pos, event)
        for vid, queue in sorted(self.queues.items()):
            vx = self.graph.vertices[vid]
            for veh in queue:
                self._apply_crisis_to(veh, (vx.x, vx.y), event)

    def _apply_crisis_to(self, veh: Vehicle, pos: tuple[float, float], event: CrisisEvent) -> None:
        old = veh.mode
        new_mode = on_crisis(veh, pos, event, self.graph, self.table, self.sampler, self.tick_index)
        if new_mode is not None and new_mode != old:
            self._switch_mode(veh, new_mode, "crisis")

    def _switch_mode(self, veh: Vehicle, mode: Mode, reason: str) -> None:
        self.transitions.append(
            (self.tick_index, veh.id, _MODE_NAME[int(veh.mode)], _MODE_NAME[int(mode)], reason)
        )
        veh.mode = mode
        veh.annoyance_at_entry = veh.annoyance
        veh.mode_entry_tick = self.tick_index
        if mode == Mode.JAM_ESCAPE:
            veh.trigger_x, veh.trigger_y = self.vehicle_xy(veh)
        if veh.edge >= 0 and veh.node_until < 0:
            self._decide_next(veh, self.graph.edges[veh.edge])
            veh.advised_for = -1

    # ------------------------------------------------------------------
    # next-edge decisions (commit contexts only; phase 1 reads the cache)

    def _decide_next(self, veh: Vehicle, edge) -> None:
        """Pick what happens after the current edge, at its end vertex."""
        graph = self.graph
        at_vertex = edge.dst
        barred = self.field.barred
        mode = veh.mode
        veh.next_decided_for = edge.id
        out = graph.out_edges[at_vertex]
        dead_end = not out or (len(out) == 1 and out[0] == edge.reverse_id)

        if mode == Mode.CHICKEN:
            self._decide_chicken(veh, edge, at_vertex, barred)
            return
        if mode == Mode.SPECTATOR:
            self._decide_spectator(veh, edge, at_vertex, barred)
            return
        if mode in (Mode.WANDERING, Mode.ROADRUNNER, Mode.SHEEP):
            pick = local_next_edge(mode, graph, at_vertex, self.edge_density,
                                   self.edge_flow, veh.recent_edges, barred, veh.rng)
            veh.next_edge = pick if pick is not None else NEXT_WAIT
            return
        if mode == Mode.JAM_ESCAPE:
            vx = graph.vertices[at_vertex]
            if math.hypot(vx.x - veh.trigger_x, vx.y - veh.trigger_y) >= self.behavior.jam_resume_distance:
                self._switch_mode(veh, Mode.NORMAL, "jam_resume")
                return  # _switch_mode re-decides as NORMAL
            pick = jam_escape_next_edge(graph, at_vertex, self.edge_density,
                                        veh.recent_edges, barred)
            veh.next_edge = pick if pick is not None else NEXT_WAIT
            return

        # NORMAL / PRAGMATIC: plan following with live-table fallback
        if veh.dest < 0:
            veh.next_edge = self._straightest_edge(veh, edge, at_vertex, barred)
            return
        if at_vertex == veh.dest:
            if mode == Mode.PRAGMATIC and len(veh.desires) > 1:
                # waypoint reached: head for the next desire, popped on crossing
                hop = self._live_hop(at_vertex, veh.desires[1])
                veh.next_edge = hop if hop is not None else NEXT_WAIT
                return
            veh.next_edge = NEXT_ARRIVE
            return
        planned = None
        if veh.plan and veh.plan_i < len(veh.plan):
            cand = veh.plan[veh.plan_i]
            if graph.edges[cand].src == at_vertex:
                planned = cand
        if planned is None:
            planned = self._live_hop(at_vertex, veh.dest)
            veh.plan = []
        veh.next_edge = planned if planned is not None else NEXT_WAIT
        if planned is None:
            veh.stranded = True

    def _decide_chicken(self, veh: Vehicle, edge, at_vertex: int, barred: set[int]) -> None:
        out = self.graph.out_edges[at_vertex]
        if not out or (len(out) == 1 and out[0] == edge.reverse_id):
            veh.next_edge = NEXT_EXIT  # fleeing off the modeled network
            return
        pick = chicken_next_edge(self.graph, at_vertex, (veh.crisis_x, veh.crisis_y), barred)
        veh.next_edge = pick if pick is not None else NEXT_WAIT

    def _decide_spectator(self, veh: Vehicle, edge, at_vertex: int, barred: set[int]) -> None:
        graph = self.graph
        if self.behavior.spectator_class == "planar":
            vx = graph.vertices[at_vertex]
            if math.hypot(vx.x - veh.crisis_x, vx.y - veh.crisis_y) <= self._event_radius(veh):
                veh.next_edge = NEXT_PARK
                return
            bearing = math.atan2(veh.crisis_y - vx.y, veh.crisis_x - vx.x)
            pick = planar_next_edge(graph, at_vertex, bearing, self.behavior.planar_metric,
                                    self.behavior.planar_limit, veh.recent_edges, barred)
            if pick is None:
                pick = local_next_edge(Mode.WANDERING, graph, at_vertex, self.edge_density,
                                       self.edge_flow, veh.recent_edges, barred, veh.rng)
            veh.next_edge = pick if pick is not None else NEXT_WAIT
            return
        if at_vertex == veh.dest:
            veh.next_edge = NEXT_PARK
            return
        hop = self._live_hop(at_vertex, veh.dest)
        veh.next_edge = hop if hop is not None else NEXT_WAIT

    def _event_radius(self, veh: Vehicle) -> float:
        for event in reversed(self.events):
            if event.x == veh.crisis_x and event.y == veh.crisis_y:
                return event.radius
        return 0.0

    def _live_hop(self, at_vertex: int, dest: int) -> int | None:
        if dest < 0:
            return None
        hop = self.table.hop(at_vertex, dest)
        if hop >= 254:
            return None
        return self.graph.out_edges[at_vertex][hop]

    def _straightest_edge(self, veh: Vehicle, edge, at_vertex: int, barred: set[int]) -> int:
        """Keep going: least angular deviation, avoiding U-turns when possible."""
        heading = self._edge_end_heading(edge.id)
        best = None
        for eid in self.graph.out_edges[at_vertex]:
            if eid in barred:
                continue
            if eid == edge.reverse_id and len(self.graph.out_edges[at_vertex]) > 1:
                continue
            dep = self._edge_start_heading(eid)
            dev = abs((dep - heading + math.pi) % (2 * math.pi) - math.pi)
            if best is None or (dev, eid) < best[:2]:
                best = (dev, eid, eid)
        return best[2] if best else NEXT_WAIT

    def _edge_end_heading(self, eid: int) -> float:
        h = self._end_heading.get(eid)
        if h is None:
            h = self.graph.point_at(eid, self.graph.edges[eid].length)[2]
            self._end_heading[eid] = h
        return h

    def _edge_start_heading(self, eid: int) -> float:
        return self.graph.point_at(eid, 0.0)[2]

    def _log_stranded(self, veh: Vehicle) -> None:
        """Commit-phase only: count and log a newly stranded vehicle."""
        if not veh.stranded_logged:
            veh.stranded = True
            veh.stranded_logged = True
            self.stranded_count += 1
            name = _MODE_NAME[int(veh.mode)]
            self.transitions.append((self.tick_index, veh.id, name, name, "stranded"))

    # ------------------------------------------------------------------
    # phase 1: perception

    def _phase1(self) -> None:
        order = sorted(self.active_edges)
        workers = self.sim.workers
        if workers > 1 and len(order) > 1:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=workers)
            chunk = (len(order) + workers - 1) // workers
            parts = [order[i : i + chunk] for i in range(0, len(order), chunk)]
            list(self._pool.map(self._phase1_edges, parts))
        else:
            self._phase1_edges(order)

    def _phase1_edges(self, edge_ids: list[int]) -> None:
        for eid in edge_ids:
            edge = self.graph.edges[eid]
            lanes = self.lane_vehicles[eid]
            multi = edge.lanes > 1
            cooldown_ticks = self.sim.lane_change_cooldown / self.sim.dt
            for lane_idx, lane in enumerate(lanes):
                leader = None
                for veh in lane:
                    veh._lane_move = -1
                    if veh.parked:
                        veh._a = 0.0
                        veh._cross = CROSS_NONE
                        leader = veh
                        continue
                    if leader is None:
                        self._edge_end_decision(veh, edge)
                    else:
                        gap = leader.s - leader.length - veh.s
                        veh._a = self._idm(veh, gap, veh.v - leader.v)
                        veh._cross = CROSS_NONE
                    if multi and self.tick_index - veh.last_change_tick >= cooldown_ticks:
                        self._consider_lane_change(veh, edge, lane_idx, lanes)
                    leader = veh

    def _idm(self, veh: Vehicle, gap: float, dv: float) -> float:
        v = veh.v
        v_des = veh.v_des
        free = (v / v_des) ** veh.delta if v_des > 0 else 1.0
        if gap <= 0.0:
            return -EMERGENCY_FACTOR * veh.b_comfort
        ss = veh.s0 + v * veh.headway + v * dv / (2.0 * math.sqrt(veh.a_max * veh.b_comfort))
        if ss < veh.s0:
            ss = veh.s0
        a = veh.a_max * (1.0 - free - (ss / gap) * (ss / gap))
        lo = -EMERGENCY_FACTOR * veh.b_comfort
        if a < lo:
            return lo
        if a > veh.a_max:
            return veh.a_max
        return a

    def _idm_free(self, veh: Vehicle) -> float:
        v_des = veh.v_des
        free = (veh.v / v_des) ** veh.delta if v_des > 0 else 1.0
        a = veh.a_max * (1.0 - free)
        return a if a < veh.a_max else veh.a_max

    def _edge_end_decision(self, veh: Vehicle, edge) -> None:
        """Acceleration and edge-end action for a lane leader."""
        sim = self.sim
        length = edge.length
        remaining = length - veh.s
        v = veh.v

        if veh.next_decided_for != edge.id:
            # mode changed since entry or placement raced; safe fallback
            veh._a = self._wall_accel(veh, remaining)
            veh._cross = CROSS_WAIT
            return

        if veh.advised_for != edge.id:
            advice_zone = max(sim.claim_gap, v * v / (2.0 * veh.b_comfort) + v * sim.dt)
            if remaining <= min(advice_zone + 5.0, sim.lookahead):
                veh.advised_for = edge.id
                veh.blocker_roll = veh.rng.random()
                self._refine_next(veh, edge)

        nxt = veh.next_edge
        dt = sim.dt

        if nxt == NEXT_ARRIVE or nxt == NEXT_EXIT:
            veh._a = self._idm_free(veh)
            projected = veh.s + max(0.0, v + veh._a * dt) * dt
            veh._cross = CROSS_LEAVE if projected >= length else CROSS_NONE
            return

        if nxt == NEXT_PARK:
            veh._a = self._wall_accel(veh, remaining)
            veh._cross = CROSS_NONE
            if v < 0.05 and remaining <= sim.stop_margin + 0.6:
                veh.parked = True
            return

        if nxt == NEXT_WAIT or nxt < 0 or nxt in self.field.barred:
            veh._a = self._wall_accel(veh, remaining)
            veh._cross = CROSS_WAIT
            return

        # look across the junction at the target's rear space
        target = self.graph.edges[nxt]
        clear = -math.inf
        rear_v = 0.0
        for lst in self.lane_vehicles[nxt]:
            if lst:
                rear = lst[-1]
                c = rear.s - rear.length
                if c > clear:
                    clear, rear_v = c, rear.v
            else:
                if target.length > clear:
                    clear, rear_v = target.length, v  # free: no closing speed
        need = veh.s0 + sim.gap_floor
        gap_tail = remaining + clear
        if clear >= need:
            veh._a = self._idm(veh, max(gap_tail, 0.01), v - rear_v)
            projected = veh.s + max(0.0, v + veh._a * dt) * dt
            veh._cross = CROSS_MOVE if projected >= length else CROSS_NONE
            return

        # No room on the target yet. A vehicle stalled at the line may, by
        # personal tendency, creep into the junction box and wait there;
        # everyone else car-follows the queue tail across the junction.
        if remaining <= sim.claim_gap and v < 1.0 and rear_v < 0.5:
            if veh.blocker_roll < 0.0:
                veh.blocker_roll = veh.rng.random()
            node_cap = self.graph.vertices[target.src].container_capacity
            if veh.blocker_roll < veh.blocker_tendency and \
                    len(self.node_occupants[target.src]) < node_cap:
                span = self._node_span(target.src)
                veh._a = self._idm(veh, remaining + span, v)
                projected = veh.s + max(0.0, v + veh._a * dt) * dt
                veh._cross = CROSS_NODE if projected >= length else CROSS_NONE
                return
        veh._a = self._idm(veh, gap_tail if gap_tail > 0.01 else 0.01, v - rear_v)
        veh._cross = CROSS_WAIT

    def _wall_accel(self, veh: Vehicle, remaining: float) -> float:
        gap = remaining + veh.s0 - self.sim.stop_margin
        return self._idm(veh, gap, veh.v)

    def _node_span(self, vertex: int) -> float:
        degree = len(self.graph.out_edges[vertex]) + len(self.graph.in_edges[vertex])
        return self.sim.lane_width * max(1.0, degree / 2.0)

    def _refine_next(self, veh: Vehicle, edge) -> None:
        """Once per approach: advice at the junction, fresher local stats.

        Runs in the perceive phase, so it only touches the vehicle's own
        state; mode switches and log entries belong to commit contexts.
        """
        mode = veh.mode
        graph = self.graph
        barred = self.field.barred
        at_vertex = edge.dst
        nxt = veh.next_edge

        if mode in (Mode.NORMAL, Mode.PRAGMATIC) and nxt >= 0 and veh.dest >= 0:
            if nxt in barred:
                alt = self._live_hop(at_vertex, veh.dest)
                if alt is None or alt in barred:
                    veh.next_edge = NEXT_WAIT
                    veh.stranded = True
                else:
                    veh.next_edge = alt
                    veh.plan = []
            elif nxt in self.field.encumbered_edges:
                if veh.rng.random() < 1.0 - veh.stubbornness:
                    alt = self._live_hop(at_vertex, veh.dest)
                    if alt is not None and alt not in barred and alt != nxt:
                        veh.next_edge = alt
                        veh.plan = []
            return
        if mode == Mode.SPECTATOR:
            if self.behavior.spectator_class == "global":
                if nxt >= 0 and nxt in barred:
                    alt = self._live_hop(at_vertex, veh.dest)
                    veh.next_edge = alt if alt is not None and alt not in barred else NEXT_WAIT
            else:
                self._decide_spectator(veh, edge, at_vertex, barred)
            return
        if mode == Mode.CHICKEN:
            self._decide_chicken(veh, edge, at_vertex, barred)
            return
        if mode == Mode.JAM_ESCAPE:
            pick = jam_escape_next_edge(graph, at_vertex, self.edge_density,
                                        veh.recent_edges, barred)
            veh.next_edge = pick if pick is not None else NEXT_WAIT
            return
        if mode in (Mode.ROADRUNNER, Mode.SHEEP):
            pick = local_next_edge(mode, graph, at_vertex, self.edge_density,
                                   self.edge_flow, veh.recent_edges, barred, veh.rng)
            veh.next_edge = pick if pick is not None else NEXT_WAIT
            return
        if mode == Mode.WANDERING and nxt >= 0 and nxt in barred:
            pick = local_next_edge(mode, graph, at_vertex, self.edge_density,
                                   self.edge_flow, veh.recent_edges, barred, veh.rng)
            veh.next_edge = pick if pick is not None else NEXT_WAIT

    # ------------------------------------------------------------------
    # lane changes

    def _neighbors_at(self, lst: list[Vehicle], s: float) -> tuple[Vehicle | None, Vehicle | None]:
        """(leader, follower) around position s in a descending lane list."""
        lo, hi = 0, len(lst)
        while lo < hi:
            mid = (lo + hi) // 2
            if lst[mid].s > s:
                lo = mid + 1
            else:
                hi = mid
        leader = lst[lo - 1] if lo > 0 else None
        follower = lst[lo] if lo < len(lst) else None
        return leader, follower

    def _lanes_for_turn(self, veh: Vehicle, edge) -> tuple[int, int] | None:
        """Inclusive lane range allowed for the planned turn, or None for any."""
        nxt = veh.next_edge
        if nxt < 0 or edge.lanes == 1:
            return None
        arrive = self._edge_end_heading(edge.id)
        depart = self._edge_start_heading(nxt)
        turn = (depart - arrive + math.pi) % (2 * math.pi) - math.pi
        if turn < -math.pi / 6:          # rightward
            return (0, 0)
        if turn > math.pi / 6:           # leftward (incl. U-turns)
            return (edge.lanes - 1, edge.lanes - 1)
        return None                      # straight: any lane

    def _consider_lane_change(self, veh: Vehicle, edge, lane_idx: int,
                              lanes: list[list[Vehicle]]) -> None:
        sim = self.sim
        allowed = None
        if veh.s >= edge.length - sim.pre_exit_zone:
            allowed = self._lanes_for_turn(veh, edge)
            if allowed is not None and not (allowed[0] <= lane_idx <= allowed[1]):
                target = lane_idx + (1 if allowed[0] > lane_idx else -1)
                if self._change_is_safe(veh, lanes[target], require_gain=False):
                    veh._lane_move = target
                return
        best_gain = sim.lane_change_gain
        best_target = -1
        for target in (lane_idx - 1, lane_idx + 1):
            if not (0 <= target < edge.lanes):
                continue
            if allowed is not None and not (allowed[0] <= target <= allowed[1]):
                continue
            gain = self._change_gain(veh, lanes[target])
            if gain is not None and gain >= best_gain:
                best_gain = gain
                best_target = target
        if best_target >= 0:
            veh._lane_move = best_target

    def _change_gain(self, veh: Vehicle, target: list[Vehicle]) -> float | None:
        leader, follower = self._neighbors_at(target, veh.s)
        if leader is not None:
            gap = leader.s - leader.length - veh.s
            if gap <= 0:
                return None
            a_new = self._idm(veh, gap, veh.v - leader.v)
        else:
            a_new = self._idm_free(veh)
        if follower is not None:
            f_gap = veh.s - veh.length - follower.s
            if f_gap <= 0:
                return None
            a_f = self._follower_accel(follower, f_gap, veh.v)
            if a_f < -follower.b_comfort:
                return None
        return a_new - veh._a

    def _change_is_safe(self, veh: Vehicle, target: list[Vehicle], require_gain: bool) -> bool:
        leader, follower = self._neighbors_at(target, veh.s)
        if leader is not None and leader.s - leader.length - veh.s <= 0:
            return False
        if follower is not None:
            f_gap = veh.s - veh.length - follower.s
            if f_gap <= 0 or self._follower_accel(follower, f_gap, veh.v) < -follower.b_comfort:
                return False
        return True

    def _follower_accel(self, follower: Vehicle, gap: float, leader_v: float) -> float:
        return self._idm(follower, gap, follower.v - leader_v)

    # ------------------------------------------------------------------
    # commit phase

    def tick(self) -> TickReport:
        report = TickReport(self.tick_index)
        self._phase1()
        self._commit_lane_changes(report)
        pendings = self._integrate(report)
        self._process_pendings(pendings, report)
        self._process_node_exits(report)
        self._spawn(report)
        self._stats_and_bdi(report)
        self._update_field_and_metrics(report)
        if self.sim.debug_checks:
            self._check_invariants()
        self.tick_index += 1
        self.reports.append(report)
        if self.spawned - self.despawned != len(self.vehicles):
            raise SimulationInvariantError(
                f"conservation broken: spawned {self.spawned} despawned {self.despawned} "
                f"in-world {len(self.vehicles)}"
            )
        return report

    def _commit_lane_changes(self, report: TickReport) -> None:
        movers = [v for v in self.vehicles.values() if v._lane_move >= 0 and v.node_until < 0]
        movers.sort(key=lambda veh: veh.id)
        for veh in movers:
            lanes = self.lane_vehicles[veh.edge]
            target = veh._lane_move
            if not self._change_is_safe(veh, lanes[target], require_gain=False):
                continue
            lanes[veh.lane].remove(veh)
            self._insert_sorted(lanes[target], veh)
            veh.lane = target
            veh.last_change_tick = self.tick_index
            report.lane_changes += 1

    @staticmethod
    def _insert_sorted(lst: list[Vehicle], veh: Vehicle) -> None:
        s = veh.s
        lo, hi = 0, len(lst)
        while lo < hi:
            mid = (lo + hi) // 2
            if lst[mid].s > s:
                lo = mid + 1
            else:
                hi = mid
        lst.insert(lo, veh)

    def _integrate(self, report: TickReport) -> list[Vehicle]:
        dt = self.sim.dt
        gap_floor = self.sim.gap_floor
        pendings: list[Vehicle] = []
        for eid in sorted(self.active_edges):
            length = self.graph.edges[eid].length
            for lane in self.lane_vehicles[eid]:
                leader_rear = math.inf
                leader_v = 0.0
                for veh in lane:
                    if veh.parked:
                        veh.v = 0.0
                        leader_rear = veh.s - veh.length
                        leader_v = 0.0
                        continue
                    v_new = veh.v + veh._a * dt
                    if v_new < 0.0:
                        v_new = 0.0
                    s_new = veh.s + v_new * dt
                    if s_new > leader_rear - gap_floor:
                        s_new = leader_rear - gap_floor
                        if s_new < veh.s:
                            s_new = veh.s
                        if v_new > leader_v:
                            v_new = leader_v
                    if s_new >= length and veh._cross in (CROSS_MOVE, CROSS_NODE, CROSS_LEAVE):
                        veh.v = v_new
                        veh._target_lane = 0
                        veh.s = length
                        veh._overflow = s_new - length
                        pendings.append(veh)
                    else:
                        if s_new >= length:
                            s_new = length - 0.01
                            v_new = 0.0
                        veh.s = s_new
                        veh.v = v_new
                    leader_rear = veh.s - veh.length
                    leader_v = veh.v
        pendings.sort(key=self._pending_key)
        return pendings

    def _pending_key(self, veh: Vehicle) -> tuple[int, int, int]:
        edge = self.graph.edges[veh.edge]
        return (edge.dst, edge.in_ordinal, veh.id)

    def _process_pendings(self, pendings: list[Vehicle], report: TickReport) -> None:
        for veh in pendings:
            edge = self.graph.edges[veh.edge]
            cross = veh._cross
            if cross == CROSS_LEAVE:
                self._remove_from_lane(veh)
                self.edge_exits_tick[veh.edge] += 1
                self._despawn(veh, report, arrived=veh.next_edge == NEXT_ARRIVE)
                continue
            if cross == CROSS_NODE:
                node = edge.dst
                cap = self.graph.vertices[node].container_capacity
                if len(self.node_occupants[node]) < cap:
                    self._remove_from_lane(veh)
                    self.edge_exits_tick[veh.edge] += 1
                    span = self._node_span(node)
                    veh.node_until = self.tick_index + max(
                        1, math.ceil(span / self.sim.node_crossing_speed / self.sim.dt)
                    )
                    veh.v = 0.0
                    self.node_occupants[node].append(veh)
                else:
                    self._hold_at_line(veh, edge)
                    report.node_blocked += 1
                continue
            # CROSS_MOVE
            target_id = veh.next_edge
            if target_id < 0 or target_id in self.field.barred:
                self._hold_at_line(veh, edge)
                continue
            lane = self._admit_lane(target_id, veh._overflow, veh)
            if lane is None:
                node = edge.dst
                cap = self.graph.vertices[node].container_capacity
                if veh.blocker_roll < veh.blocker_tendency and len(self.node_occupants[node]) < cap:
                    self._remove_from_lane(veh)
                    self.edge_exits_tick[veh.edge] += 1
                    span = self._node_span(node)
                    veh.node_until = self.tick_index + max(
                        1, math.ceil(span / self.sim.node_crossing_speed / self.sim.dt)
                    )
                    veh.v = 0.0
                    self.node_occupants[node].append(veh)
                else:
                    self._hold_at_line(veh, edge)
                    report.node_blocked += 1
                continue
            self._remove_from_lane(veh)
            self.edge_exits_tick[veh.edge] += 1
            self._enter_edge(veh, target_id, lane, veh._overflow, veh.v)

    def _hold_at_line(self, veh: Vehicle, edge) -> None:
        veh.s = edge.length - 0.01
        veh.v = 0.0

    def _remove_from_lane(self, veh: Vehicle) -> None:
        lane = self.lane_vehicles[veh.edge][veh.lane]
        lane.remove(veh)
        if not any(self.lane_vehicles[veh.edge]):
            self.active_edges.discard(veh.edge)

    def _despawn(self, veh: Vehicle, report: TickReport, arrived: bool) -> None:
        del self.vehicles[veh.id]
        self.despawned += 1
        report.despawned += 1
        if arrived:
            self.arrivals += 1
            report.arrivals += 1
            self.metrics.record_arrival((self.tick_index - veh.spawn_tick) * self.sim.dt)
        else:
            self.evacuated += 1

    def _admit_lane(self, edge_id: int, s_entry: float, veh: Vehicle) -> int | None:
        """Pick an entry lane with enough clearance, density- and right-biased."""
        need = veh.s0 + self.sim.gap_floor
        lanes = self.lane_vehicles[edge_id]
        acceptable: list[int] = []
        for li, lst in enumerate(lanes):
            if lst:
                rear = lst[-1]
                if rear.s - rear.length - s_entry < need:
                    continue
            acceptable.append(li)
        if not acceptable:
            return None
        if len(acceptable) == 1:
            return acceptable[0]
        return self.choose_lane_on_entry(edge_id, acceptable, veh.rng)

    def choose_lane_on_entry(self, edge_id: int, lanes: list[int], rng: random.Random) -> int:
        """Sample a lane: emptier is better, rightmost preferred."""
        target = self.graph.edges[edge_id]
        km = target.length / 1000.0
        weights = []
        for li in lanes:
            density = len(self.lane_vehicles[edge_id][li]) / km if km > 0 else 0.0
            weights.append(1.0 / (1.0 + density) * self.sim.right_bias ** li)
        total = sum(weights)
        roll = rng.random() * total
        acc = 0.0
        for li, w in zip(lanes, weights):
            acc += w
            if roll < acc:
                return li
        return lanes[-1]

    def _enter_edge(self, veh: Vehicle, edge_id: int, lane: int, s: float, v: float) -> None:
        edge = self.graph.edges[edge_id]
        if edge_id in self.field.barred:
            raise SimulationInvariantError(f"vehicle {veh.id} entered barred edge {edge_id}")
        veh.edge = edge_id
        veh.lane = lane
        veh.s = min(s, max(edge.length - 0.02, 0.0))
        veh.v_des = veh.speed_compliance * edge.speed_limit
        veh.v = min(v, veh.v_des)
        veh.advised_for = -1
        veh.blocker_roll = -1.0
        veh.node_until = -1
        self._insert_sorted(self.lane_vehicles[edge_id][lane], veh)
        self.active_edges.add(edge_id)
        self.edge_entries_tick[edge_id] += 1
        self._flow_cur[edge_id] += 1
        veh.push_recent(edge_id, self.behavior.recent_edges)
        if veh.plan and veh.plan_i < len(veh.plan) and veh.plan[veh.plan_i] == edge_id:
            veh.plan_i += 1
        elif veh.plan:
            veh.plan = []
        if veh.mode == Mode.PRAGMATIC and veh.desires and self.graph.edges[edge_id].src == veh.desires[0] and len(veh.desires) > 1:
            veh.desires.pop(0)
            veh.dest = veh.desires[0]
        self._decide_next(veh, edge)

    def _process_node_exits(self, report: TickReport) -> None:
        for node in range(len(self.node_occupants)):
            occupants = self.node_occupants[node]
            if not occupants:
                continue
            keep: list[Vehicle] = []
            for veh in occupants:
                if self.tick_index < veh.node_until:
                    keep.append(veh)
                    continue
                target = veh.next_edge
                if target < 0 or target in self.field.barred or \
                        self.graph.edges[target].src != node:
                    self._redecide_in_node(veh, node)
                    target = veh.next_edge
                if target < 0 or target in self.field.barred:
                    keep.append(veh)
                    continue
                lane = self._admit_lane(target, 0.0, veh)
                if lane is None:
                    keep.append(veh)
                    report.node_blocked += 1
                    continue
                self._enter_edge(veh, target, lane, 0.0, 0.0)
            self.node_occupants[node] = keep

    def _redecide_in_node(self, veh: Vehicle, node: int) -> None:
        if veh.edge >= 0:
            self._decide_next(veh, self.graph.edges[veh.edge])
        if veh.next_edge >= 0 and self.graph.edges[veh.next_edge].src != node:
            hop = self._live_hop(node, veh.dest) if veh.dest >= 0 else None
            veh.next_edge = hop if hop is not None else NEXT_WAIT

    # ------------------------------------------------------------------
    # spawning

    def set_spawn_rate(self, rate: float) -> None:
        self.spawn_profile = SpawnProfile([(0.0, rate)])

    def _spawn(self, report: TickReport) -> None:
        rate = self.spawn_profile.rate_at(self.tick_index * self.sim.dt)
        for _ in range(_poisson(rate * self.sim.dt, self.spawn_rng)):
            self.generate_trip()
        barred = self.field.barred
        for vid in sorted(self.queues):
            queue = self.queues[vid]
            while queue:
                veh = queue[0]
                first = None
                if veh.plan and self.graph.edges[veh.plan[0]].src == vid \
                        and veh.plan[0] not in barred:
                    first = veh.plan[0]
                # the trip starts now: today's best row beats the plan cached
                # at generation time
                live = self._live_hop(vid, veh.dest)
                if live is not None and live not in barred and live != first:
                    first = live
                    veh.plan = []
                if first is None:
                    if live is None:
                        self._log_stranded(veh)  # durably unroutable
                    break  # else a retable is pending; retry next tick
                lane = self._admit_lane(first, 0.0, veh)
                if lane is None:
                    break
                queue.popleft()
                veh.spawn_tick = self.tick_index
                self.vehicles[veh.id] = veh
                self.spawned += 1
                report.spawned += 1
                self._enter_edge(veh, first, lane, 0.0, 0.0)

    # ------------------------------------------------------------------
    # post-move bookkeeping

    def _stats_and_bdi(self, report: TickReport) -> None:
        dt = self.sim.dt
        stop_speed = self.behavior.stop_speed
        decay = self.behavior.annoyance_decay * dt
        patience = self.behavior.patience_s
        counts = self.edge_counts
        speeds = self.edge_speed_sums
        annoyed = self.edge_annoyed
        density = self.edge_density
        for eid in range(len(counts)):
            counts[eid] = 0
            speeds[eid] = 0.0
            annoyed[eid] = 0
            density[eid] = 0.0
        mode_counts = dict.fromkeys(_MODE_NAME.values(), 0)

        switchers: list[Vehicle] = []
        for veh in self.vehicles.values():
            if veh.node_until >= 0:
                veh.annoyance += dt
            else:
                eid = veh.edge
                counts[eid] += 1
                speeds[eid] += veh.v
                if veh.v < stop_speed:
                    veh.annoyance += dt
                else:
                    veh.annoyance -= decay
                    if veh.annoyance < 0.0:
                        veh.annoyance = 0.0
            veh.annoyed = veh.annoyance >= veh.saturation_threshold
            if veh.annoyed and veh.edge >= 0 and veh.node_until < 0:
                annoyed[veh.edge] += 1
            mode_counts[_MODE_NAME[int(veh.mode)]] += 1
            if veh.stranded and not veh.stranded_logged:
                self._log_stranded(veh)
            if veh.mode == Mode.NORMAL:
                if veh.annoyed and not veh.parked and not veh.stranded:
                    switchers.append(veh)
            elif veh.annoyance - veh.annoyance_at_entry > patience:
                switchers.append(veh)

        graph = self.graph
        for eid in self.active_edges:
            e = graph.edges[eid]
            density[eid] = counts[eid] / (e.length / 1000.0 * e.lanes)

        for veh in switchers:
            old = _MODE_NAME[int(veh.mode)]
            self._patience_switch(veh)
            new = _MODE_NAME[int(veh.mode)]
            if new != old:
                mode_counts[old] -= 1
                mode_counts[new] += 1
        self.mode_counts = mode_counts

        if self.tick_index % self._flow_ticks == self._flow_ticks - 1:
            self.edge_flow = self._flow_cur
            self._flow_cur = [0] * len(counts)

    def _patience_switch(self, veh: Vehicle) -> None:
        mode = veh.mode
        if mode == Mode.NORMAL:
            self._switch_mode(veh, Mode.JAM_ESCAPE, "saturation")
        elif mode == Mode.ROADRUNNER:
            self._switch_mode(veh, Mode.WANDERING, "patience")
        elif mode == Mode.SHEEP:
            self._switch_mode(veh, Mode.ROADRUNNER, "patience")
        elif mode == Mode.JAM_ESCAPE:
            self._switch_mode(veh, Mode.NORMAL, "patience")
        else:
            # chicken / spectator / pragmatic / wandering persist but grow patient
            veh.saturation_threshold *= self.behavior.patience_factor
            veh.annoyance_at_entry = veh.annoyance

    def _update_field_and_metrics(self, report: TickReport) -> None:
        vertex_counts = [len(occ) for occ in self.node_occupants]
        vertex_annoyed = [sum(1 for veh in occ if veh.annoyed) for occ in self.node_occupants]
        self.field.update(self.tick_index, self.edge_counts, self.edge_annoyed,
                          vertex_counts, vertex_annoyed)
        self.metrics.record_tick(self.tick_index, self.edge_counts, self.edge_speed_sums,
                                 self.edge_exits_tick, self.edge_entries_tick, self.mode_counts)
        if self.metrics.window_complete(self.tick_index + 1):
            self.metrics.close_window(
                self.tick_index + 1,
                [e.length for e in self.graph.edges],
                [e.lanes for e in self.graph.edges],
            )
        n = len(self.edge_entries_tick)
        self.edge_entries_tick = [0] * n
        self.edge_exits_tick = [0] * n

    # ------------------------------------------------------------------
    # integrity

    def _check_invariants(self) -> None:
        for eid in self.active_edges:
            edge = self.graph.edges[eid]
            for lane in self.lane_vehicles[eid]:
                prev = None
                for veh in lane:
                    if not (0.0 <= veh.s <= edge.length):
                        raise SimulationInvariantError(f"vehicle {veh.id} off edge: s={veh.s}")
                    if prev is not None and prev.s - prev.length - veh.s <= 0:
                        raise SimulationInvariantError(
                            f"gap violation on edge {eid}: {prev.id} -> {veh.id}"
                        )
                    bound = veh.v_des + veh.a_max * self.sim.dt
                    if veh.v > bound + 1e-9:
                        raise SimulationInvariantError(f"speed bound broken for {veh.id}")
                    prev = veh

    def world_hash(self) -> str:
        h = hashlib.blake2b(digest_size=8)
        pack = struct.pack
        h.update(pack("<qqqq", self.tick_index, self.spawned, self.despawned, self.arrivals))
        for vid in sorted(self.vehicles):
            veh = self.vehicles[vid]
            h.update(pack(
                "<iiiddiidd",
                veh.id, veh.edge, veh.lane, veh.s, veh.v,
                int(veh.mode), veh.dest, veh.annoyance, veh.saturation_threshold,
            ))
            h.update(pack("<i", veh.node_until))
        for eid in sorted(self.field.encumbered_edges):
            h.update(pack("<i", eid))
        for eid in sorted(self.field.barred):
            h.update(pack("<i", ~eid))
        for vid, queue in sorted(self.queues.items()):
            h.update(pack("<ii", vid, len(queue)))
        return h.hexdigest()
