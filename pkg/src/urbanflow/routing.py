"""Directed traffic graph and precomputed next-hop routing tables.

One directed edge is created per allowed sense of travel. A static
attractiveness weight (seconds-like) combines length, speed limit and lane
count. Per-source shortest-path trees are flattened into a next-hop matrix
holding one byte per (source, destination) pair: the polar ordinal of the
first outgoing edge on a minimal-weight path. Path queries then cost one
lookup per hop.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from heapq import heappop, heappush

from .errors import DegreeOverflow, NoDrivableEdges, UnknownEdge, Unreachable
from .ingest.network import Direction
from .ingest.shp import Point
from .topology.builder import Dcel, TopoGraph

SELF_HOP = 254
UNREACHABLE = 255
_TABLE_MAGIC = b"UFNH"


@dataclass
class RoutingParams:
    speed_factor: float = 0.9      # fraction of the limit an edge is reasonably driven at
    lane_bonus: float = 0.25       # attractiveness gain per extra lane
    slot_length: float = 7.5       # standstill space one vehicle occupies, meters
    huge_multiplier: float = 1e6   # barred edges
    encumbered_multiplier: float = 50.0


class TrafficEdge:
    __slots__ = (
        "id", "src", "dst", "length", "lanes", "speed_limit", "weight",
        "capacity", "topo_edge_id", "forward", "ordinal", "in_ordinal", "reverse_id",
    )

    def __init__(self, eid: int, src: int, dst: int, length: float, lanes: int,
                 speed_limit: float, topo_edge_id: int, forward: bool):
        self.id = eid
        self.src = src
        self.dst = dst
        self.length = length
        self.lanes = lanes
        self.speed_limit = speed_limit
        self.weight = 0.0
        self.capacity = 1
        self.topo_edge_id = topo_edge_id
        self.forward = forward
        self.ordinal = 0        # index in the source vertex's polar out list
        self.in_ordinal = 0     # index in the destination vertex's polar in list
        self.reverse_id = -1    # opposite sense of the same street, if drivable


class TrafficVertex:
    __slots__ = ("id", "x", "y", "container_capacity")

    def __init__(self, vid: int, x: float, y: float):
        self.id = vid
        self.x = x
        self.y = y
        self.container_capacity = 1


class TrafficGraph:
    def __init__(self, vertices: list[TrafficVertex], edges: list[TrafficEdge],
                 out_edges: list[list[int]], in_edges: list[list[int]],
                 topo: TopoGraph | None = None):
        self.vertices = vertices
        self.edges = edges
        self.out_edges = out_edges   # polar CCW order; edge.ordinal indexes this
        self.in_edges = in_edges     # polar CCW order of the incoming ring
        self.topo = topo
        self._geometry: dict[int, tuple[list[Point], list[float]]] = {}

    # -- geometry ----------------------------------------------------------

    def edge_points(self, edge_id: int) -> list[Point]:
        return self._edge_geometry(edge_id)[0]

    def _edge_geometry(self, edge_id: int) -> tuple[list[Point], list[float]]:
        cached = self._geometry.get(edge_id)
        if cached is not None:
            return cached
        e = self.edges[edge_id]
        if self.topo is not None:
            pts = list(self.topo.edges[e.topo_edge_id].points)
            if not e.forward:
                pts.reverse()
        else:
            a, b = self.vertices[e.src], self.vertices[e.dst]
            pts = [Point(a.x, a.y), Point(b.x, b.y)]
        cum = [0.0]
        for i in range(1, len(pts)):
            cum.append(cum[-1] + math.dist(pts[i - 1], pts[i]))
        self._geometry[edge_id] = (pts, cum)
        return pts, cum

    def point_at(self, edge_id: int, s: float) -> tuple[float, float, float]:
        """Position and heading (radians) at arc length s along the edge."""
        pts, cum = self._edge_geometry(edge_id)
        total = cum[-1] if cum[-1] > 0 else 1.0
        s = min(max(s, 0.0), total)
        lo, hi = 0, len(cum) - 1
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if cum[mid] <= s:
                lo = mid
            else:
                hi = mid
        a, b = pts[lo], pts[lo + 1]
        seg = cum[lo + 1] - cum[lo]
        t = (s - cum[lo]) / seg if seg > 0 else 0.0
        return a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), math.atan2(b.y - a.y, b.x - a.x)

    # -- construction helpers ------------------------------------------------

    @classmethod
    def from_edge_list(cls, n_vertices: int, edge_list: list[tuple[int, int, float]],
                       positions: list[tuple[float, float]] | None = None) -> "TrafficGraph":
        """Abstract graph with explicit weights; out-edge order = insertion order."""
        if positions is None:
            positions = [
                (math.cos(2 * math.pi * i / max(n_vertices, 1)),
                 math.sin(2 * math.pi * i / max(n_vertices, 1)))
                for i in range(n_vertices)
            ]
        vertices = [TrafficVertex(i, x, y) for i, (x, y) in enumerate(positions)]
        edges: list[TrafficEdge] = []
        out: list[list[int]] = [[] for _ in range(n_vertices)]
        incoming: list[list[int]] = [[] for _ in range(n_vertices)]
        for u, v, w in edge_list:
            e = TrafficEdge(len(edges), u, v, max(w, 1e-9), 1, 13.9, -1, True)
            e.weight = w
            e.ordinal = len(out[u])
            e.in_ordinal = len(incoming[v])
            edges.append(e)
            out[u].append(e.id)
            incoming[v].append(e.id)
        return cls(vertices, edges, out, incoming)


def edge_weight(length: float, speed_limit: float, lanes: int, params: RoutingParams) -> float:
    """Static attractiveness: traversal seconds at a lane-boosted cruise speed."""
    lane_factor = 1.0 + params.lane_bonus * (lanes - 1)
    return length / (params.speed_factor * speed_limit * lane_factor)


def derive_traffic_graph(topo: TopoGraph, dcel: Dcel,
                         params: RoutingParams | None = None) -> TrafficGraph:
    """Expand drivable directions of every street into directed edges."""
    params = params or RoutingParams()
    vertices = [TrafficVertex(v.id, v.x, v.y) for v in topo.vertices]
    edges: list[TrafficEdge] = []
    # half-edge id -> directed traffic edge id (when that sense is drivable)
    edge_of_half: dict[int, int] = {}

    for te in topo.edges:
        attr = topo.attribute_of(te)
        senses = []
        if attr.direction in (Direction.FORWARD, Direction.BOTH):
            senses.append(True)
        if attr.direction in (Direction.BACKWARD, Direction.BOTH):
            senses.append(False)
        pair: list[int] = []
        for forward in senses:
            src, dst = (te.va, te.vb) if forward else (te.vb, te.va)
            e = TrafficEdge(len(edges), src, dst, te.length, attr.lane_count,
                            attr.speed_limit, te.id, forward)
            e.weight = edge_weight(te.length, attr.speed_limit, attr.lane_count, params)
            e.capacity = max(1, int(attr.lane_count * te.length / params.slot_length))
            edges.append(e)
            edge_of_half[2 * te.id + (0 if forward else 1)] = e.id
            pair.append(e.id)
        if len(pair) == 2:
            edges[pair[0]].reverse_id = pair[1]
            edges[pair[1]].reverse_id = pair[0]

    if not edges:
        raise NoDrivableEdges("no attribute record allows travel on any edge")

    out_edges: list[list[int]] = []
    in_edges: list[list[int]] = []
    for v in topo.vertices:
        ring = dcel.outgoing_ccw(v.id)
        out_list = [edge_of_half[h] for h in ring if h in edge_of_half]
        in_list = [edge_of_half[h ^ 1] for h in ring if (h ^ 1) in edge_of_half]
        for ordinal, eid in enumerate(out_list):
            edges[eid].ordinal = ordinal
        for ordinal, eid in enumerate(in_list):
            edges[eid].in_ordinal = ordinal
        out_edges.append(out_list)
        in_edges.append(in_list)

    graph = TrafficGraph(vertices, edges, out_edges, in_edges, topo)
    lane_sums = [0] * len(vertices)
    for e in edges:
        lane_sums[e.src] += e.lanes
        lane_sums[e.dst] += e.lanes
    for v in graph.vertices:
        v.container_capacity = max(1, lane_sums[v.id] // 2)
    return graph


class NextHopTable:
    """Row-major byte matrix: entry (s, t) is the polar ordinal of the first
    outgoing edge at s on a minimal-weight path to t."""

    def __init__(self, n: int, data: bytearray | None = None):
        self.n = n
        self.data = data if data is not None else bytearray([UNREACHABLE]) * (n * n)

    def hop(self, s: int, t: int) -> int:
        return self.data[s * self.n + t]

    def row(self, s: int) -> bytes:
        return bytes(self.data[s * self.n : (s + 1) * self.n])

    def replace_row(self, s: int, row: bytes) -> None:
        if len(row) != self.n:
            raise ValueError(f"row length {len(row)} != {self.n}")
        self.data[s * self.n : (s + 1) * self.n] = row

    def nbytes(self) -> int:
        return len(self.data)

    def dump(self) -> bytes:
        return _TABLE_MAGIC + struct.pack("<I", self.n) + bytes(self.data)

    @classmethod
    def load(cls, blob: bytes) -> "NextHopTable":
        if blob[:4] != _TABLE_MAGIC:
            raise ValueError("bad next-hop table magic")
        (n,) = struct.unpack_from("<I", blob, 4)
        data = bytearray(blob[8 : 8 + n * n])
        if len(data) != n * n:
            raise ValueError("truncated next-hop table")
        return cls(n, data)


WeightOverlay = dict[int, float]  # edge id -> multiplier >= 1; absent means 1


def dijkstra_row(graph: TrafficGraph, source: int,
                 overlay: WeightOverlay | None = None) -> bytearray:
    """Single-source next-hop row under (static weight x overlay multiplier).

    Ties are broken deterministically: vertices pop in (distance, id) order
    and out-edges relax in polar-ordinal order, first strict improvement wins.
    """
    n = len(graph.vertices)
    dist = [math.inf] * n
    row = bytearray([UNREACHABLE]) * n
    dist[source] = 0.0
    row[source] = SELF_HOP
    edges = graph.edges
    out_edges = graph.out_edges
    heap: list[tuple[float, int]] = [(0.0, source)]
    if overlay:
        def cost(e: TrafficEdge) -> float:
            return e.weight * overlay.get(e.id, 1.0)
    else:
        def cost(e: TrafficEdge) -> float:
            return e.weight
    while heap:
        d, u = heappop(heap)
        if d > dist[u]:
            continue
        hop_u = row[u]
        for ordinal, eid in enumerate(out_edges[u]):
            e = edges[eid]
            nd = d + cost(e)
            v = e.dst
            if nd < dist[v]:
                dist[v] = nd
                row[v] = ordinal if u == source else hop_u
                heappush(heap, (nd, v))
    return row


def build_next_hop_tables(graph: TrafficGraph) -> NextHopTable:
    """All-sources next-hop matrix; |V| x |V| bytes, one Dijkstra per source."""
    n = len(graph.vertices)
    for v in range(n):
        if len(graph.out_edges[v]) > SELF_HOP:
            raise DegreeOverflow(f"vertex {v} out-degree {len(graph.out_edges[v])} > {SELF_HOP}")
    table = NextHopTable(n)
    for s in range(n):
        table.replace_row(s, bytes(dijkstra_row(graph, s)))
    return table


def local_retable(graph: TrafficGraph, vertex: int, overlay: WeightOverlay) -> bytes:
    """Fresh single-source row for one vertex under the overlay multipliers."""
    return bytes(dijkstra_row(graph, vertex, overlay))


def shortest_path(table: NextHopTable, graph: TrafficGraph, s: int, t: int) -> list[int]:
    """Materialize the stored path as an edge id list; O(1) per hop."""
    if s == t:
        return []
    path: list[int] = []
    u = s
    for _ in range(table.n):
        hop = table.hop(u, t)
        if hop == UNREACHABLE:
            raise Unreachable(f"no path {s} -> {t}")
        if hop == SELF_HOP:
            break
        eid = graph.out_edges[u][hop]
        path.append(eid)
        u = graph.edges[eid].dst
        if u == t:
            return path
    if u != t:
        raise Unreachable(f"hop chain from {s} toward {t} did not terminate")
    return path


def path_cost(graph: TrafficGraph, path: list[int]) -> float:
    return sum(graph.edges[eid].weight for eid in path)


def edge_weights_csv(graph: TrafficGraph) -> str:
    out = io.StringIO()
    out.write("edge_id,from,to,length_m,lanes,speed_limit_ms,weight_s\n")
    for e in graph.edges:
        out.write(
            f"{e.id},{e.src},{e.dst},{e.length:.6g},{e.lanes},{e.speed_limit:.6g},{e.weight:.6g}\n"
        )
    return out.getvalue()


def require_edge(graph: TrafficGraph, edge_id: int) -> TrafficEdge:
    if not (0 <= edge_id < len(graph.edges)):
        raise UnknownEdge(f"edge {edge_id} not in network (0..{len(graph.edges) - 1})")
    return graph.edges[edge_id]
