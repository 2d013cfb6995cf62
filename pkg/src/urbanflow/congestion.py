"""Congestion sentinels attached to every network element.

A transporter watches one edge or one vertex: how full it is, what share
of its vehicles have lost patience, and how many neighbors already feel
congested. Crossing a (warning-lowered) threshold flags the element as
encumbered, which reweights routing rows of the adjacent vertices; barred
elements take the prohibitive multiplier instead and refuse entry outright.
Warnings look one hop out per evaluation, so pressure spreads tick by tick
as a wave rather than by transitive closure.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .errors import UnknownEdge
from .routing import NextHopTable, RoutingParams, TrafficGraph, dijkstra_row


@dataclass
class TransporterParams:
    base_threshold: float = 0.7
    occupancy_weight: float = 0.6
    annoyed_weight: float = 0.4
    warning_decay: float = 0.85   # threshold multiplier per warning level
    hysteresis: float = 0.8      # clear only below this fraction of the threshold
    retable_budget: int = 64     # vertex rows refreshed per tick


def encumbrance_score(count: int, capacity: int, annoyed_fraction: float,
                      params: TransporterParams) -> float:
    occupancy = count / capacity if capacity > 0 else 0.0
    return params.occupancy_weight * occupancy + params.annoyed_weight * annoyed_fraction


def effective_threshold(base: float, warning_level: int, params: TransporterParams) -> float:
    return base * params.warning_decay ** warning_level


def estimate_encumbrance(count: int, capacity: int, annoyed_fraction: float,
                         warning_level: int, currently: bool,
                         params: TransporterParams) -> bool:
    """Threshold test with hysteresis so a borderline score cannot flap."""
    score = encumbrance_score(count, capacity, annoyed_fraction, params)
    threshold = effective_threshold(params.base_threshold, warning_level, params)
    if currently:
        return score >= params.hysteresis * threshold
    return score >= threshold


class EncumbranceField:
    """Per-element congestion state plus the routing-table feedback loop."""

    def __init__(self, graph: TrafficGraph, table: NextHopTable,
                 params: TransporterParams | None = None,
                 routing_params: RoutingParams | None = None):
        self.graph = graph
        self.table = table
        self.params = params or TransporterParams()
        self.routing = routing_params or RoutingParams()
        n_edges = len(graph.edges)
        self.encumbered_edges: set[int] = set()
        self.encumbered_vertices: set[int] = set()
        self.barred: set[int] = set()
        self.edge_warnings: dict[int, int] = {}
        self.vertex_warnings: dict[int, int] = {}
        self.vertex_annoyed: list[float] = [0.0] * len(graph.vertices)
        self._dirty: deque[int] = deque()
        self._dirty_set: set[int] = set()
        self.events: list[tuple[int, str, str]] = []  # (tick, element, event)
        self._edge_capacity = [e.capacity for e in graph.edges]
        self._overlay: dict[int, float] = {}

    # -- operator / scenario actions ----------------------------------------

    def bar(self, edge_id: int, on: bool, tick: int) -> None:
        if not (0 <= edge_id < len(self.graph.edges)):
            raise UnknownEdge(f"edge {edge_id} not in network")
        if on and edge_id not in self.barred:
            self.barred.add(edge_id)
            self.events.append((tick, f"e{edge_id}", "bar"))
            self._mark_edge_dirty(edge_id)
        elif not on and edge_id in self.barred:
            self.barred.discard(edge_id)
            self.events.append((tick, f"e{edge_id}", "unbar"))
            self._mark_edge_dirty(edge_id)

    def _mark_edge_dirty(self, edge_id: int) -> None:
        e = self.graph.edges[edge_id]
        for v in (e.src, e.dst):
            if v not in self._dirty_set:
                self._dirty_set.add(v)
                self._dirty.append(v)
        self._rebuild_overlay()

    # -- per-tick evaluation -------------------------------------------------

    def update(self, tick: int, edge_counts: list[int], edge_annoyed: list[int],
               vertex_counts: list[int], vertex_annoyed_counts: list[int]) -> None:
        """Re-estimate encumbrance, propagate warnings, refresh dirty rows."""
        graph = self.graph
        params = self.params
        changed: list[int] = []

        candidates = set(self.encumbered_edges)
        candidates.update(self.edge_warnings)
        candidates.update(eid for eid, c in enumerate(edge_counts) if c > 0)
        for eid in candidates:
            count = edge_counts[eid]
            annoyed = edge_annoyed[eid] / count if count > 0 else 0.0
            now = estimate_encumbrance(
                count, self._edge_capacity[eid], annoyed,
                self.edge_warnings.get(eid, 0), eid in self.encumbered_edges, params,
            )
            if now and eid not in self.encumbered_edges:
                self.encumbered_edges.add(eid)
                self.events.append((tick, f"e{eid}", "encumber"))
                changed.append(eid)
            elif not now and eid in self.encumbered_edges:
                self.encumbered_edges.discard(eid)
                self.events.append((tick, f"e{eid}", "clear"))
                changed.append(eid)

        vertex_candidates = set(self.encumbered_vertices)
        vertex_candidates.update(self.vertex_warnings)
        vertex_candidates.update(v for v, c in enumerate(vertex_counts) if c > 0)
        for vid in vertex_candidates:
            count = vertex_counts[vid]
            annoyed = vertex_annoyed_counts[vid] / count if count > 0 else 0.0
            now = estimate_encumbrance(
                count, graph.vertices[vid].container_capacity, annoyed,
                self.vertex_warnings.get(vid, 0), vid in self.encumbered_vertices, params,
            )
            if now and vid not in self.encumbered_vertices:
                self.encumbered_vertices.add(vid)
                self.events.append((tick, f"v{vid}", "encumber"))
            elif not now and vid in self.encumbered_vertices:
                self.encumbered_vertices.discard(vid)
                self.events.append((tick, f"v{vid}", "clear"))

        self.propagate_warnings()
        for eid in changed:
            self._mark_edge_dirty(eid)
        if changed:
            self._rebuild_overlay()
        self.retable_dirty(tick)

    def propagate_warnings(self) -> None:
        """Warning level = number of encumbered elements one hop away."""
        graph = self.graph
        edge_w: dict[int, int] = {}
        vertex_w: dict[int, int] = {}
        for eid in self.encumbered_edges:
            e = graph.edges[eid]
            neighbors: set[int] = set()
            for v in (e.src, e.dst):
                neighbors.update(graph.out_edges[v])
                neighbors.update(graph.in_edges[v])
                vertex_w[v] = vertex_w.get(v, 0) + 1
            neighbors.discard(eid)
            for nid in neighbors:
                edge_w[nid] = edge_w.get(nid, 0) + 1
        for vid in self.encumbered_vertices:
            for nid in set(graph.out_edges[vid]) | set(graph.in_edges[vid]):
                edge_w[nid] = edge_w.get(nid, 0) + 1
        self.edge_warnings = edge_w
        self.vertex_warnings = vertex_w

    def _rebuild_overlay(self) -> None:
        overlay: dict[int, float] = {}
        for eid in self.encumbered_edges:
            overlay[eid] = self.routing.encumbered_multiplier
        for eid in self.barred:
            overlay[eid] = self.routing.huge_multiplier
        self._overlay = overlay

    def retable_dirty(self, tick: int) -> None:
        budget = self.params.retable_budget
        while self._dirty and budget > 0:
            vid = self._dirty.popleft()
            self._dirty_set.discard(vid)
            row = dijkstra_row(self.graph, vid, self._overlay if self._overlay else None)
            self.table.replace_row(vid, bytes(row))
            self.events.append((tick, f"v{vid}", "retable"))
            budget -= 1

    def pending_retables(self) -> int:
        return len(self._dirty)

    def events_csv(self) -> str:
        lines = ["tick,element,event"]
        lines.extend(f"{t},{el},{ev}" for t, el, ev in self.events)
        return "\n".join(lines) + "\n"
