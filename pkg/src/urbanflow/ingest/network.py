"""Joining geometry, attributes and z-levels into a RawNetwork.

The column mapping translates provider-specific column names into the three
logical fields every record must end up with: lane count per direction,
speed limit in m/s and allowed sense of travel. Defaults declared in the
mapping fill missing columns or blank values.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

from ..errors import CountMismatch, MissingRequiredColumn, UrbanflowError
from .dbf import FieldValue, parse_dbf
from .shp import BBox, Point, Polyline, parse_shp


class Direction(enum.Enum):
    FORWARD = "forward"   # travel from the polyline's first point toward its last
    BACKWARD = "backward"
    BOTH = "both"


_DEFAULT_DIRECTION_VALUES = {"F": Direction.FORWARD, "T": Direction.BACKWARD, "B": Direction.BOTH}


@dataclass
class ColumnMapping:
    """Source column names for the logical fields, plus defaults."""

    lane_count_column: str | None = None
    speed_limit_column: str | None = None
    direction_column: str | None = None
    lane_count_default: int | None = None
    speed_limit_default: float | None = None
    direction_default: Direction | None = Direction.BOTH
    direction_values: dict[str, Direction] = field(
        default_factory=lambda: dict(_DEFAULT_DIRECTION_VALUES)
    )

    @classmethod
    def from_dict(cls, spec: dict) -> "ColumnMapping":
        def logical(name: str) -> tuple[str | None, FieldValue]:
            entry = spec.get(name, {})
            return entry.get("column"), entry.get("default")

        lane_col, lane_def = logical("lane_count")
        speed_col, speed_def = logical("speed_limit")
        dir_col, dir_def = logical("direction")
        values = {
            k: Direction(v) for k, v in spec.get("direction", {}).get("values", {}).items()
        } or dict(_DEFAULT_DIRECTION_VALUES)
        return cls(
            lane_count_column=lane_col,
            speed_limit_column=speed_col,
            direction_column=dir_col,
            lane_count_default=int(lane_def) if lane_def is not None else None,
            speed_limit_default=float(speed_def) if speed_def is not None else None,
            direction_default=Direction(dir_def) if dir_def is not None else Direction.BOTH,
            direction_values=values,
        )


@dataclass
class AttributeRecord:
    """One attribute row with its resolved logical fields."""

    ordinal: int
    fields: dict[str, FieldValue]
    lane_count: int
    speed_limit: float
    direction: Direction


@dataclass
class RawNetwork:
    """Parsed polylines + attributes + z-levels, before topology extraction."""

    polylines: list[Polyline]
    attributes: list[AttributeRecord]
    zlevels: dict[tuple[int, int], int]
    bbox: BBox
    unit: str = "m"

    def zlevel(self, polyline_id: int, ordinal: int) -> int:
        return self.zlevels.get((polyline_id, ordinal), 0)

    def validate(self) -> None:
        if len(self.polylines) != len(self.attributes):
            raise CountMismatch(
                f"{len(self.polylines)} polylines vs {len(self.attributes)} attribute records"
            )
        x0, y0, x1, y1 = self.bbox
        slack = 1e-6
        for poly in self.polylines:
            for p in poly.points:
                if not (x0 - slack <= p.x <= x1 + slack and y0 - slack <= p.y <= y1 + slack):
                    raise UrbanflowError(f"point {p} of polyline {poly.id} outside bbox {self.bbox}")


def parse_zlevels(source: str | bytes) -> dict[tuple[int, int], int]:
    """Parse the z-level table: CSV `polyline_id,point_ordinal,level` with header."""
    text = source.decode("utf-8") if isinstance(source, bytes) else source
    levels: dict[tuple[int, int], int] = {}
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        return levels
    for row in reader:
        if not row or not any(cell.strip() for cell in row):
            continue
        pid, ordinal, level = (int(cell) for cell in row[:3])
        if level != 0:
            levels[(pid, ordinal)] = level
    return levels


def _resolve(
    row: dict[str, FieldValue],
    column: str | None,
    default: FieldValue,
    columns: set[str],
    logical: str,
) -> FieldValue:
    if column is not None:
        if column not in columns:
            raise MissingRequiredColumn(f"{logical}: column '{column}' not in table")
        value = row[column]
        if value is not None and value != "":
            return value
    if default is None:
        raise MissingRequiredColumn(f"{logical}: no value and no default declared")
    return default


def map_attributes(
    rows: list[dict[str, FieldValue]], mapping: ColumnMapping
) -> list[AttributeRecord]:
    columns = set(rows[0].keys()) if rows else set()
    records = []
    for i, row in enumerate(rows):
        lanes = int(_resolve(row, mapping.lane_count_column, mapping.lane_count_default, columns, "lane_count"))
        speed = float(_resolve(row, mapping.speed_limit_column, mapping.speed_limit_default, columns, "speed_limit"))
        raw_dir = _resolve(
            row,
            mapping.direction_column,
            mapping.direction_default.value if mapping.direction_default else None,
            columns,
            "direction",
        )
        if isinstance(raw_dir, str) and raw_dir in mapping.direction_values:
            direction = mapping.direction_values[raw_dir]
        else:
            direction = Direction(raw_dir)
        if lanes < 1:
            raise UrbanflowError(f"record {i}: lane_count {lanes} < 1")
        if not (speed > 0 and math.isfinite(speed)):
            raise UrbanflowError(f"record {i}: speed_limit {speed} not positive")
        records.append(AttributeRecord(i, row, lanes, speed, direction))
    return records


def _dedupe_points(poly: Polyline) -> Polyline:
    """Drop consecutive identical points (zero-length segments)."""
    new_points: list[Point] = []
    new_parts: list[tuple[int, int]] = []
    for start, end in poly.parts:
        part_start = len(new_points)
        prev: Point | None = None
        for p in poly.points[start:end]:
            if prev is not None and p == prev:
                continue
            new_points.append(p)
            prev = p
        if len(new_points) - part_start < 2:
            raise UrbanflowError(f"polyline {poly.id}: part degenerates to a single point")
        new_parts.append((part_start, len(new_points)))
    return Polyline(id=poly.id, parts=new_parts, points=new_points)


def load_network(
    shp_bytes: bytes,
    dbf_bytes: bytes,
    zlevel_source: str | bytes | None,
    column_mapping: ColumnMapping | dict,
) -> RawNetwork:
    """Parse, join and validate the three source layers into a RawNetwork."""
    if isinstance(column_mapping, dict):
        column_mapping = ColumnMapping.from_dict(column_mapping)
    polylines, bbox = parse_shp(shp_bytes)
    _, rows = parse_dbf(dbf_bytes)
    if len(polylines) != len(rows):
        raise CountMismatch(f"{len(polylines)} polylines vs {len(rows)} attribute rows")
    records = map_attributes(rows, column_mapping)
    zlevels = parse_zlevels(zlevel_source) if zlevel_source else {}
    network = RawNetwork(
        polylines=[_dedupe_points(p) for p in polylines],
        attributes=records,
        zlevels=zlevels,
        bbox=bbox,
    )
    network.validate()
    return network
