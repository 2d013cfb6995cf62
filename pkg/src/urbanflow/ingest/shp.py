"""Reader and writer for the polyline subset of the .shp geometry format.

Only shape types 0 (Null), 3 (PolyLine) and 13 (PolyLineZ) are handled;
Z and M arrays are skipped so every geometry comes out as planar points.
Record offsets are recovered by sequential scan, no .shx index needed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple

from ..errors import BadMagic, TruncatedRecord, UnsupportedShapeType, UrbanflowError

FILE_CODE = 9994
VERSION = 1000
SHAPE_NULL = 0
SHAPE_POLYLINE = 3
SHAPE_POLYLINE_Z = 13

_MAIN_HEADER_LEN = 100


class Point(NamedTuple):
    x: float
    y: float


@dataclass
class Polyline:
    """One polyline record: ordered points split into independent parts.

    ``parts`` holds (start, end) index ranges into ``points``; ranges are
    disjoint, ordered and cover the whole point list, each with >= 2 points.
    """

    id: int
    parts: list[tuple[int, int]]
    points: list[Point]

    def part_points(self, part: int) -> list[Point]:
        start, end = self.parts[part]
        return self.points[start:end]

    def arc_length(self) -> float:
        total = 0.0
        for start, end in self.parts:
            pts = self.points
            for i in range(start + 1, end):
                total += math.dist(pts[i - 1], pts[i])
        return total


BBox = tuple[float, float, float, float]


def _require(data: bytes, offset: int, size: int, what: str) -> None:
    if offset + size > len(data):
        raise TruncatedRecord(f"{what}: need {size} bytes at offset {offset}, have {len(data) - offset}")


def parse_shp(data: bytes) -> tuple[list[Polyline], BBox]:
    """Parse .shp bytes into polylines (record order) and the header bbox."""
    _require(data, 0, _MAIN_HEADER_LEN, "main header")
    (code,) = struct.unpack_from(">i", data, 0)
    if code != FILE_CODE:
        raise BadMagic(f"file code {code}, expected {FILE_CODE}")
    (file_words,) = struct.unpack_from(">i", data, 24)
    if file_words * 2 > len(data):
        raise TruncatedRecord(f"header declares {file_words * 2} bytes, file has {len(data)}")
    version, shape_type = struct.unpack_from("<ii", data, 28)
    if version != VERSION:
        raise BadMagic(f"version {version}, expected {VERSION}")
    if shape_type not in (SHAPE_NULL, SHAPE_POLYLINE, SHAPE_POLYLINE_Z):
        raise UnsupportedShapeType(f"shape type {shape_type}")
    bbox: BBox = struct.unpack_from("<4d", data, 36)  # type: ignore[assignment]

    polylines: list[Polyline] = []
    offset = _MAIN_HEADER_LEN
    end_of_file = file_words * 2
    while offset < end_of_file:
        _require(data, offset, 8, "record header")
        _recno, content_words = struct.unpack_from(">ii", data, offset)
        offset += 8
        content_len = content_words * 2
        _require(data, offset, content_len, f"record {len(polylines)} content")
        poly = _parse_record(data, offset, content_len, record_id=len(polylines))
        if poly is not None:
            polylines.append(poly)
        offset += content_len
    return polylines, bbox


def _parse_record(data: bytes, offset: int, content_len: int, record_id: int) -> Polyline | None:
    base = offset
    _require(data, offset, 4, "record shape type")
    (shape_type,) = struct.unpack_from("<i", data, offset)
    offset += 4
    if shape_type == SHAPE_NULL:
        return None
    if shape_type not in (SHAPE_POLYLINE, SHAPE_POLYLINE_Z):
        raise UnsupportedShapeType(f"record shape type {shape_type}")

    def fits(size: int, what: str) -> None:
        if offset + size - base > content_len:
            raise TruncatedRecord(f"{what} exceeds declared content length {content_len}")
        _require(data, offset, size, what)

    fits(32 + 8, "polyline header")
    offset += 32  # record bbox, unused
    num_parts, num_points = struct.unpack_from("<ii", data, offset)
    offset += 8
    if num_parts <= 0 or num_points <= 0:
        raise TruncatedRecord(f"record declares {num_parts} parts / {num_points} points")
    fits(4 * num_parts, "part index array")
    starts = list(struct.unpack_from(f"<{num_parts}i", data, offset))
    offset += 4 * num_parts
    fits(16 * num_points, "point array")
    flat = struct.unpack_from(f"<{2 * num_points}d", data, offset)
    offset += 16 * num_points
    # Z/M payload of PolyLineZ is inside content_len and simply skipped.

    points = [Point(flat[2 * i], flat[2 * i + 1]) for i in range(num_points)]
    for p in points:
        if not (math.isfinite(p.x) and math.isfinite(p.y)):
            raise UrbanflowError(f"non-finite coordinate in record {record_id}")

    parts: list[tuple[int, int]] = []
    for k, start in enumerate(starts):
        end = starts[k + 1] if k + 1 < num_parts else num_points
        if not (0 <= start < end <= num_points) or end - start < 2:
            raise UrbanflowError(f"record {record_id}: bad part range [{start}, {end})")
        parts.append((start, end))
    return Polyline(id=record_id, parts=parts, points=points)


def write_shp(polylines: list[Polyline], bbox: BBox | None = None) -> bytes:
    """Serialize polylines to .shp bytes (PolyLine records, 2D only)."""
    if bbox is None:
        xs = [p.x for poly in polylines for p in poly.points]
        ys = [p.y for poly in polylines for p in poly.points]
        bbox = (min(xs), min(ys), max(xs), max(ys)) if xs else (0.0, 0.0, 0.0, 0.0)

    records = bytearray()
    for i, poly in enumerate(polylines):
        content = bytearray()
        content += struct.pack("<i", SHAPE_POLYLINE)
        pxs = [p.x for p in poly.points]
        pys = [p.y for p in poly.points]
        content += struct.pack("<4d", min(pxs), min(pys), max(pxs), max(pys))
        content += struct.pack("<ii", len(poly.parts), len(poly.points))
        content += struct.pack(f"<{len(poly.parts)}i", *(start for start, _ in poly.parts))
        flat = [c for p in poly.points for c in p]
        content += struct.pack(f"<{len(flat)}d", *flat)
        records += struct.pack(">ii", i + 1, len(content) // 2)
        records += content

    total_words = (_MAIN_HEADER_LEN + len(records)) // 2
    header = bytearray(_MAIN_HEADER_LEN)
    struct.pack_into(">i", header, 0, FILE_CODE)
    struct.pack_into(">i", header, 24, total_words)
    struct.pack_into("<ii", header, 28, VERSION, SHAPE_POLYLINE)
    struct.pack_into("<4d", header, 36, *bbox)
    return bytes(header) + bytes(records)
