from .quadtree import PointEntry, PointIndex
from .builder import (
    Classification,
    Dcel,
    TopoEdge,
    TopoGraph,
    TopoVertex,
    build_dcel,
    build_point_index,
    build_topo_graph,
    classify_points,
)

__all__ = [
    "PointEntry",
    "PointIndex",
    "Classification",
    "Dcel",
    "TopoEdge",
    "TopoGraph",
    "TopoVertex",
    "build_dcel",
    "build_point_index",
    "build_topo_graph",
    "classify_points",
]
