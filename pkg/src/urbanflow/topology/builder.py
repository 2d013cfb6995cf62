"""From raw polylines to a topological graph with half-edge polar ordering.

Points are classified into graph vertices and mere shape points; maximal
polyline runs between vertices become edges. Edge lengths are computed on
the original coordinates so no geometry is lost to snapping. The half-edge
layer stores, per directed edge side, the next edge turning left and the
prior edge turning right around each vertex (counterclockwise polar order).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

from ..errors import DanglingGeometry, ZeroLengthSegment
from ..ingest.network import RawNetwork
from ..ingest.shp import Point
from .quadtree import PointEntry, PointIndex


def build_point_index(raw: RawNetwork, epsilon: float = 0.01) -> PointIndex:
    """Index every polyline point; coincident same-z points share an entry."""
    index = PointIndex(raw.bbox, epsilon)
    for poly in raw.polylines:
        for start, end in poly.parts:
            for ordinal in range(start, end):
                p = poly.points[ordinal]
                endpoint = ordinal == start or ordinal == end - 1
                index.add(p.x, p.y, raw.zlevel(poly.id, ordinal), poly.id, ordinal, endpoint)
    return index


@dataclass
class Classification:
    vertex_entries: list[PointEntry]
    shape_entries: list[PointEntry]
    # entry id -> dense vertex id, or -1 for shape points
    vertex_id_of_entry: list[int]


def is_shape_entry(entry: PointEntry) -> bool:
    """Shape point: a single interior incidence (multiplicity exactly 2)."""
    return len(entry.incidences) == 1 and not entry.incidences[0][2]


def classify_points(index: PointIndex) -> Classification:
    """Split entries into graph vertices and shape points.

    Multiplicity >= 3 is always a vertex; a lone interior point of one
    polyline is a shape point; endpoints (dead ends and junctions of two
    polylines) are vertices so attribute changes can break edges there.
    """
    vertices: list[PointEntry] = []
    shapes: list[PointEntry] = []
    vertex_id_of_entry = [-1] * len(index.entries)
    for entry in index.entries:
        if is_shape_entry(entry):
            shapes.append(entry)
        else:
            vertex_id_of_entry[entry.id] = len(vertices)
            vertices.append(entry)
    return Classification(vertices, shapes, vertex_id_of_entry)


@dataclass
class TopoVertex:
    id: int
    x: float
    y: float
    z: int


@dataclass
class TopoEdge:
    id: int
    va: int              # vertex at geometry start
    vb: int              # vertex at geometry end
    points: list[Point]  # original coordinates, va side first
    length: float
    polyline_id: int


@dataclass
class TopoGraph:
    vertices: list[TopoVertex]
    edges: list[TopoEdge]
    raw: RawNetwork

    def attribute_of(self, edge: TopoEdge):
        return self.raw.attributes[edge.polyline_id]

    def census_csv(self) -> str:
        """Vertex and edge census for golden tests: id, degree / length."""
        degree = [0] * len(self.vertices)
        for e in self.edges:
            degree[e.va] += 1
            degree[e.vb] += 1
        out = io.StringIO()
        out.write("kind,id,degree,length\n")
        for v in self.vertices:
            out.write(f"vertex,{v.id},{degree[v.id]},\n")
        for e in self.edges:
            out.write(f"edge,{e.id},,{e.length:.6g}\n")
        return out.getvalue()

    def to_dot(self) -> str:
        out = io.StringIO()
        out.write("graph network {\n")
        for v in self.vertices:
            out.write(f'  v{v.id} [pos="{v.x:.3f},{v.y:.3f}"];\n')
        for e in self.edges:
            out.write(f'  v{e.va} -- v{e.vb} [label="e{e.id}"];\n')
        out.write("}\n")
        return out.getvalue()


def build_topo_graph(raw: RawNetwork, index: PointIndex, classification: Classification) -> TopoGraph:
    """Cut polylines at vertices; every maximal run becomes one edge."""
    vertices = [
        TopoVertex(i, entry.x, entry.y, entry.z)
        for i, entry in enumerate(classification.vertex_entries)
    ]
    vid_of_entry = classification.vertex_id_of_entry

    # The incidence lists are the ground truth for point -> entry, not a
    # re-match against the finished tree (a later entry may lie nearer).
    entry_of: dict[tuple[int, int], int] = {}
    for entry in index.entries:
        for pid, ordinal, _ in entry.incidences:
            entry_of[(pid, ordinal)] = entry.id

    edges: list[TopoEdge] = []
    for poly in raw.polylines:
        for start, end in poly.parts:
            run_start = -1
            run_vid = -1
            for ordinal in range(start, end):
                eid = entry_of.get((poly.id, ordinal))
                if eid is None:
                    raise DanglingGeometry(f"polyline {poly.id} ordinal {ordinal} lost its index entry")
                vid = vid_of_entry[eid]
                if vid < 0:
                    continue  # shape point, stays interior to the current run
                if run_start < 0:
                    run_start, run_vid = ordinal, vid
                    continue
                pts = list(poly.points[run_start : ordinal + 1])
                edges.append(
                    TopoEdge(
                        id=len(edges),
                        va=run_vid,
                        vb=vid,
                        points=pts,
                        length=_arc_length(pts),
                        polyline_id=poly.id,
                    )
                )
                run_start, run_vid = ordinal, vid
            if run_start != end - 1:
                raise DanglingGeometry(f"polyline {poly.id} part [{start},{end}) has no terminating vertex")
    return TopoGraph(vertices=vertices, edges=edges, raw=raw)


def _arc_length(points: list[Point]) -> float:
    total = 0.0
    for i in range(1, len(points)):
        total += math.dist(points[i - 1], points[i])
    return total


# Half-edge ids: edge e contributes 2*e (forward, va->vb) and 2*e+1 (backward).


@dataclass
class Dcel:
    """Polar (counterclockwise) edge ordering around every vertex."""

    rings: list[list[int]]      # per vertex: outgoing half-edge ids, CCW by angle
    next_left: list[int]        # incoming half-edge -> outgoing half-edge at its head
    prior_right: list[int]      # inverse of next_left
    tail: list[int]             # half-edge -> tail vertex id

    @staticmethod
    def twin(half: int) -> int:
        return half ^ 1

    def head(self, half: int) -> int:
        return self.tail[half ^ 1]

    def outgoing_ccw(self, vertex: int) -> list[int]:
        return self.rings[vertex]


def half_edge_departure_angle(edge: TopoEdge, forward: bool) -> float:
    pts = edge.points
    a, b = (pts[0], pts[1]) if forward else (pts[-1], pts[-2])
    if a == b:
        raise ZeroLengthSegment(f"edge {edge.id}: identical consecutive geometry points")
    return math.atan2(b.y - a.y, b.x - a.x)


def build_dcel(topo: TopoGraph) -> Dcel:
    n_half = 2 * len(topo.edges)
    tail = [0] * n_half
    for e in topo.edges:
        tail[2 * e.id] = e.va
        tail[2 * e.id + 1] = e.vb

    outgoing: list[list[tuple[float, int, int]]] = [[] for _ in topo.vertices]
    for e in topo.edges:
        outgoing[e.va].append((half_edge_departure_angle(e, True), e.id, 2 * e.id))
        outgoing[e.vb].append((half_edge_departure_angle(e, False), e.id, 2 * e.id + 1))

    rings: list[list[int]] = []
    ring_pos = [0] * n_half
    for items in outgoing:
        items.sort()  # angle ascending = counterclockwise; ties by edge id
        ring = [half for _, _, half in items]
        for pos, half in enumerate(ring):
            ring_pos[half] = pos
        rings.append(ring)

    next_left = [0] * n_half
    prior_right = [0] * n_half
    for half in range(n_half):
        twin = half ^ 1
        ring = rings[tail[twin]]
        out = ring[(ring_pos[twin] + 1) % len(ring)]
        next_left[half] = out
        prior_right[out] = half
    return Dcel(rings=rings, next_left=next_left, prior_right=prior_right, tail=tail)
