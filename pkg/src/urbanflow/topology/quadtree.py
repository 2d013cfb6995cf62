"""Quadtree-backed point index for coincidence detection.

Every distinct (position within epsilon, z-level) pair becomes one entry;
incidences of all polyline points that snap to it are accumulated there.
A point matches the nearest existing entry within epsilon at the same
z-level (ties broken by lowest entry id), so results are independent of
tree layout — a brute-force scan with the same rule classifies identically.
"""

from __future__ import annotations

import math

_MAX_LEAF_ENTRIES = 8
_MAX_DEPTH = 24


class PointEntry:
    __slots__ = ("id", "x", "y", "z", "multiplicity", "incidences")

    def __init__(self, eid: int, x: float, y: float, z: int):
        self.id = eid
        self.x = x
        self.y = y
        self.z = z
        # endpoint incidences count 1 (one touching segment), interior count 2
        self.multiplicity = 0
        self.incidences: list[tuple[int, int, bool]] = []  # (polyline, ordinal, is_endpoint)

    def add_incidence(self, polyline_id: int, ordinal: int, endpoint: bool) -> None:
        self.multiplicity += 1 if endpoint else 2
        self.incidences.append((polyline_id, ordinal, endpoint))


class _Node:
    __slots__ = ("x0", "y0", "x1", "y1", "entries", "children")

    def __init__(self, x0: float, y0: float, x1: float, y1: float):
        self.x0 = x0
        self.y0 = y0
        self.x1 = x1
        self.y1 = y1
        self.entries: list[PointEntry] | None = []
        self.children: list[_Node] | None = None


class PointIndex:
    """Entries keyed by snapped position and z-level."""

    def __init__(self, bbox: tuple[float, float, float, float], epsilon: float):
        if epsilon <= 0:
            raise ValueError(f"epsilon {epsilon} must be > 0")
        x0, y0, x1, y1 = bbox
        pad = max(epsilon, 1e-9)
        self._root = _Node(x0 - pad, y0 - pad, max(x1, x0 + pad) + pad, max(y1, y0 + pad) + pad)
        self.epsilon = epsilon
        self.entries: list[PointEntry] = []

    def match(self, x: float, y: float, z: int) -> PointEntry | None:
        """Nearest entry within epsilon at the same z-level, ties by lowest id."""
        eps = self.epsilon
        best: tuple[float, int, PointEntry] | None = None
        stack = [self._root]
        while stack:
            node = stack.pop()
            if x + eps < node.x0 or x - eps > node.x1 or y + eps < node.y0 or y - eps > node.y1:
                continue
            if node.children is not None:
                stack.extend(node.children)
                continue
            for entry in node.entries:  # type: ignore[union-attr]
                if entry.z != z:
                    continue
                d = math.hypot(entry.x - x, entry.y - y)
                if d <= eps and (best is None or (d, entry.id) < best[:2]):
                    best = (d, entry.id, entry)
        return best[2] if best else None

    def add(self, x: float, y: float, z: int, polyline_id: int, ordinal: int, endpoint: bool) -> PointEntry:
        entry = self.match(x, y, z)
        if entry is None:
            entry = PointEntry(len(self.entries), x, y, z)
            self.entries.append(entry)
            self._insert(entry)
        entry.add_incidence(polyline_id, ordinal, endpoint)
        return entry

    def _insert(self, entry: PointEntry) -> None:
        node = self._root
        depth = 0
        while node.children is not None:
            node = node.children[_quadrant(node, entry.x, entry.y)]
            depth += 1
        node.entries.append(entry)  # type: ignore[union-attr]
        if len(node.entries) > _MAX_LEAF_ENTRIES and depth < _MAX_DEPTH:
            _split(node)


def _quadrant(node: _Node, x: float, y: float) -> int:
    cx = (node.x0 + node.x1) / 2
    cy = (node.y0 + node.y1) / 2
    return (2 if y >= cy else 0) + (1 if x >= cx else 0)


def _split(node: _Node) -> None:
    cx = (node.x0 + node.x1) / 2
    cy = (node.y0 + node.y1) / 2
    node.children = [
        _Node(node.x0, node.y0, cx, cy),
        _Node(cx, node.y0, node.x1, cy),
        _Node(node.x0, cy, cx, node.y1),
        _Node(cx, cy, node.x1, node.y1),
    ]
    for entry in node.entries:  # type: ignore[union-attr]
        node.children[_quadrant(node, entry.x, entry.y)].entries.append(entry)
    node.entries = None
