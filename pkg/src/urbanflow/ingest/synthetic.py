"""Synthetic desk-scale networks: rectangular grids and radial webs.

Both generators emit a RawNetwork equivalent to what the file parsers would
produce, so the whole pipeline downstream is source-agnostic. Street
endpoints reuse the exact same node coordinates, which makes the topology
stage see exact coincidences.
"""

from __future__ import annotations

import math
import random

from ..errors import BadSpec
from .dbf import DbfField, write_dbf
from .network import AttributeRecord, Direction, RawNetwork
from .shp import Point, Polyline, write_shp

_KEYS = {"kind", "rows", "cols", "rings", "spokes", "edge_length", "lanes", "speed", "exit_stubs", "jitter"}

_ARC_STEP_RAD = math.radians(15.0)


def generate_synthetic(spec: dict, seed: int = 0) -> RawNetwork:
    """Build a deterministic synthetic RawNetwork from a grid or radial spec."""
    unknown = set(spec) - _KEYS
    if unknown:
        raise BadSpec(f"unknown spec keys: {sorted(unknown)}")
    kind = spec.get("kind")
    edge_length = float(spec.get("edge_length", 100.0))
    lanes = int(spec.get("lanes", 1))
    speed = float(spec.get("speed", 13.9))
    if edge_length <= 0:
        raise BadSpec(f"edge_length {edge_length} must be > 0")
    if lanes < 1 or speed <= 0:
        raise BadSpec(f"lanes {lanes} / speed {speed} out of range")

    if kind == "grid":
        rows, cols = int(spec.get("rows", 0)), int(spec.get("cols", 0))
        if rows < 2 or cols < 2:
            raise BadSpec(f"grid needs rows, cols >= 2, got {rows}x{cols}")
        streets = _grid_streets(rows, cols, edge_length, bool(spec.get("exit_stubs", False)))
    elif kind == "radial":
        rings, spokes = int(spec.get("rings", 0)), int(spec.get("spokes", 0))
        if rings < 1 or spokes < 2:
            raise BadSpec(f"radial needs rings >= 1, spokes >= 2, got {rings}x{spokes}")
        streets = _radial_streets(rings, spokes, edge_length)
    else:
        raise BadSpec(f"unknown kind {kind!r}")

    jitter = float(spec.get("jitter", 0.0))
    if jitter > 0:
        streets = _jitter_nodes(streets, jitter, seed)

    polylines = [Polyline(id=i, parts=[(0, len(pts))], points=pts) for i, pts in enumerate(streets)]
    attributes = [
        AttributeRecord(
            ordinal=i,
            fields={"LANES": lanes, "SPEED": speed, "DIR": "B"},
            lane_count=lanes,
            speed_limit=speed,
            direction=Direction.BOTH,
        )
        for i in range(len(polylines))
    ]
    xs = [p.x for pts in streets for p in pts]
    ys = [p.y for pts in streets for p in pts]
    bbox = (min(xs), min(ys), max(xs), max(ys))
    return RawNetwork(polylines=polylines, attributes=attributes, zlevels={}, bbox=bbox)


def _grid_streets(rows: int, cols: int, length: float, exit_stubs: bool) -> list[list[Point]]:
    node = [[Point(c * length, r * length) for c in range(cols)] for r in range(rows)]
    streets: list[list[Point]] = []
    for r in range(rows):
        for c in range(cols - 1):
            streets.append([node[r][c], node[r][c + 1]])
    for c in range(cols):
        for r in range(rows - 1):
            streets.append([node[r][c], node[r + 1][c]])
    if exit_stubs:
        for r in range(rows):
            for c in range(cols):
                for dx, dy in _stub_directions(r, c, rows, cols):
                    p = node[r][c]
                    streets.append([p, Point(p.x + dx * length, p.y + dy * length)])
    return streets


def _stub_directions(r: int, c: int, rows: int, cols: int) -> list[tuple[int, int]]:
    out = []
    if c == 0:
        out.append((-1, 0))
    if c == cols - 1:
        out.append((1, 0))
    if r == 0:
        out.append((0, -1))
    if r == rows - 1:
        out.append((0, 1))
    return out


def _radial_streets(rings: int, spokes: int, length: float) -> list[list[Point]]:
    center = Point(0.0, 0.0)
    node = [
        [
            Point(k * length * math.cos(2 * math.pi * j / spokes), k * length * math.sin(2 * math.pi * j / spokes))
            for j in range(spokes)
        ]
        for k in range(1, rings + 1)
    ]
    streets: list[list[Point]] = []
    for j in range(spokes):
        streets.append([center, node[0][j]])
        for k in range(rings - 1):
            streets.append([node[k][j], node[k + 1][j]])
    for k in range(rings):
        radius = (k + 1) * length
        for j in range(spokes):
            a0 = 2 * math.pi * j / spokes
            a1 = 2 * math.pi * (j + 1) / spokes
            n_mid = max(0, int(math.ceil((a1 - a0) / _ARC_STEP_RAD)) - 1)
            pts = [node[k][j]]
            for m in range(1, n_mid + 1):
                ang = a0 + (a1 - a0) * m / (n_mid + 1)
                pts.append(Point(radius * math.cos(ang), radius * math.sin(ang)))
            pts.append(node[k][(j + 1) % spokes])
            streets.append(pts)
    return streets


def _jitter_nodes(streets: list[list[Point]], jitter: float, seed: int) -> list[list[Point]]:
    """Displace each distinct node once so coincidences survive jittering."""
    rng = random.Random(seed)
    moved: dict[Point, Point] = {}
    out = []
    for pts in streets:
        new_pts = []
        for p in pts:
            if p not in moved:
                moved[p] = Point(p.x + rng.uniform(-jitter, jitter), p.y + rng.uniform(-jitter, jitter))
            new_pts.append(moved[p])
        out.append(new_pts)
    return out


_FIXTURE_FIELDS = [
    DbfField("LANES", "N", 4, 0),
    DbfField("SPEED", "N", 10, 3),
    DbfField("DIR", "C", 2, 0),
]

FIXTURE_MAPPING = {
    "lane_count": {"column": "LANES", "default": 1},
    "speed_limit": {"column": "SPEED", "default": 13.9},
    "direction": {"column": "DIR", "default": "both"},
}


def raw_network_to_bytes(raw: RawNetwork) -> tuple[bytes, bytes, str]:
    """Serialize a RawNetwork to (.shp bytes, .dbf bytes, z-level CSV text).

    Reparsing with FIXTURE_MAPPING yields an equal RawNetwork; used by the
    round-trip tests and for exporting synthetic networks as fixture files.
    """
    shp_bytes = write_shp(raw.polylines, raw.bbox)
    rows = [
        {"LANES": a.lane_count, "SPEED": a.speed_limit, "DIR": _dir_code(a.direction)}
        for a in raw.attributes
    ]
    dbf_bytes = write_dbf(_FIXTURE_FIELDS, rows)
    lines = ["polyline_id,point_ordinal,level"]
    for (pid, ordinal), level in sorted(raw.zlevels.items()):
        lines.append(f"{pid},{ordinal},{level}")
    return shp_bytes, dbf_bytes, "\n".join(lines) + "\n"


def _dir_code(direction: Direction) -> str:
    return {"forward": "F", "backward": "T", "both": "B"}[direction.value]
