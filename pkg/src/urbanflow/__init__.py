"""Deterministic urban traffic microsimulator.

Pipeline: raw geometry (shapefile subset, attribute table, z-levels or
synthetic generators) -> topological graph with half-edge polar ordering ->
directed traffic graph with per-source next-hop tables -> fixed-step
multi-agent simulation (car following, lanes, crossroads, congestion
sentinels, crisis behaviors) -> windowed fundamental-diagram metrics,
steerable live over a WebSocket service.
"""

__version__ = "0.1.0"
