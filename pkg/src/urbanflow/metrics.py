"""Traffic measurement: windowed per-edge fundamental-diagram samples.

Density is space-mean (vehicle-seconds over window length and lane-km),
flow is the edge-end detector count scaled to veh/h, speed the space-mean
over vehicle-seconds. Samples are checked against the car-following
model's equilibrium flow-density curve, solved pointwise by bisection, an
oracle independent of the simulation integrator.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field


@dataclass
class MetricsParams:
    window_s: float = 300.0
    envelope_tolerance: float = 0.25
    envelope_flow_floor: float = 15.0  # veh/h, absorbs detector granularity


@dataclass
class EdgeWindowSample:
    edge_id: int
    window_start_s: float
    duration_s: float
    density: float      # veh/km/lane, space mean
    flow: float         # veh/h across all lanes, end detector
    mean_speed: float   # m/s, space mean


@dataclass
class EquilibriumParams:
    """Fleet-mean driver parameters for the equilibrium oracle."""

    v_desired: float
    a_max: float
    b_comfort: float
    headway: float
    s0: float
    delta: float
    vehicle_length: float


def equilibrium_speed(gap: float, p: EquilibriumParams, tol: float = 1e-9) -> float:
    """Steady-state speed at a fixed net gap, by bisection on the gap equation."""
    if gap <= p.s0:
        return 0.0

    def f(v: float) -> float:
        return 1.0 - (v / p.v_desired) ** p.delta - ((p.s0 + v * p.headway) / gap) ** 2

    lo, hi = 0.0, p.v_desired
    if f(hi) >= 0:
        return hi
    for _ in range(200):
        mid = (lo + hi) / 2
        if hi - lo < tol:
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def equilibrium_flow(density_per_lane: float, p: EquilibriumParams) -> float:
    """Flow (veh/h/lane) sustained at a given density (veh/km/lane)."""
    if density_per_lane <= 0:
        return 0.0
    spacing = 1000.0 / density_per_lane
    gap = spacing - p.vehicle_length
    if gap <= 0:
        return 0.0
    v = equilibrium_speed(gap, p)
    return density_per_lane * v * 3.6


class MetricsCollector:
    """Per-edge accumulators aggregated into fixed windows."""

    def __init__(self, n_edges: int, dt: float, params: MetricsParams | None = None):
        self.params = params or MetricsParams()
        self.dt = dt
        self.n_edges = n_edges
        self.window_ticks = max(1, round(self.params.window_s / dt))
        self.window_start_tick = 0
        self.veh_seconds = [0.0] * n_edges
        self.speed_integral = [0.0] * n_edges
        self.exits = [0] * n_edges
        self.entries = [0] * n_edges
        self.samples: list[EdgeWindowSample] = []
        # run-level aggregates
        self.mode_time: dict[str, float] = {}
        self.peak_concurrent = 0
        self.travel_time_sum = 0.0
        self.travel_time_count = 0

    def record_tick(self, tick: int, edge_counts: list[int], edge_speed_sums: list[float],
                    edge_exits: list[int], edge_entries: list[int],
                    mode_counts: dict[str, int]) -> None:
        dt = self.dt
        for eid, c in enumerate(edge_counts):
            if c:
                self.veh_seconds[eid] += c * dt
                self.speed_integral[eid] += edge_speed_sums[eid] * dt
        for eid, c in enumerate(edge_exits):
            if c:
                self.exits[eid] += c
        for eid, c in enumerate(edge_entries):
            if c:
                self.entries[eid] += c
        total = 0
        for name, count in mode_counts.items():
            if count:
                self.mode_time[name] = self.mode_time.get(name, 0.0) + count * dt
                total += count
        if total > self.peak_concurrent:
            self.peak_concurrent = total

    def record_arrival(self, travel_time_s: float) -> None:
        self.travel_time_sum += travel_time_s
        self.travel_time_count += 1

    def window_complete(self, tick: int) -> bool:
        return tick - self.window_start_tick >= self.window_ticks

    def close_window(self, tick: int, edge_lengths: list[float], edge_lanes: list[int]) -> list[EdgeWindowSample]:
        """Emit samples for edges that saw traffic, then reset accumulators."""
        duration = (tick - self.window_start_tick) * self.dt
        start_s = self.window_start_tick * self.dt
        out: list[EdgeWindowSample] = []
        if duration > 0:
            for eid in range(self.n_edges):
                vs = self.veh_seconds[eid]
                if vs <= 0:
                    continue  # unused edges stay out of the count
                lane_km = edge_lengths[eid] / 1000.0 * edge_lanes[eid]
                density = (vs / duration) / lane_km if lane_km > 0 else 0.0
                flow = self.exits[eid] / duration * 3600.0
                speed = self.speed_integral[eid] / vs if vs > 0 else 0.0
                out.append(EdgeWindowSample(eid, start_s, duration, density, flow, speed))
        self.samples.extend(out)
        self.window_start_tick = tick
        self.veh_seconds = [0.0] * self.n_edges
        self.speed_integral = [0.0] * self.n_edges
        self.exits = [0] * self.n_edges
        self.entries = [0] * self.n_edges
        return out


def fd_envelope_check(samples: list[EdgeWindowSample], oracle: EquilibriumParams,
                      edge_lanes: list[int], params: MetricsParams | None = None) -> float:
    """Fraction of samples whose flow sits inside the equilibrium envelope."""
    params = params or MetricsParams()
    if not samples:
        return 1.0
    ok = 0
    for s in samples:
        q = equilibrium_flow(s.density, oracle) * edge_lanes[s.edge_id]
        tol = max(params.envelope_tolerance * q, params.envelope_flow_floor)
        if abs(s.flow - q) <= tol:
            ok += 1
    return ok / len(samples)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def export_run(out_dir: str,
               samples: list[EdgeWindowSample],
               transitions: list[tuple[int, int, str, str, str]],
               encumbrance_csv: str,
               summary: dict[str, object]) -> list[str]:
    """Write the four analysis files; byte-stable for identical runs."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "fd_samples.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("edge_id,window_start_s,density_veh_km_lane,flow_veh_h,speed_ms\n")
        for s in samples:
            f.write(f"{s.edge_id},{_fmt(s.window_start_s)},{_fmt(s.density)},{_fmt(s.flow)},{_fmt(s.mean_speed)}\n")
    written.append(path)

    path = os.path.join(out_dir, "transitions.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("tick,agent,from,to,reason\n")
        for tick, agent, src, dst, reason in transitions:
            f.write(f"{tick},{agent},{src},{dst},{reason}\n")
    written.append(path)

    path = os.path.join(out_dir, "encumbrance.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(encumbrance_csv)
    written.append(path)

    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("key,value\n")
        for key, value in summary.items():
            text = _fmt(value) if isinstance(value, float) else str(value)
            f.write(f"{key},{text}\n")
    written.append(path)
    return written


def run_summary(spawned: int, arrived: int, stranded: int, evacuated: int,
                metrics: MetricsCollector, final_hash: str) -> dict[str, object]:
    total_time = sum(metrics.mode_time.values())
    summary: dict[str, object] = {
        "spawned": spawned,
        "arrived": arrived,
        "stranded": stranded,
        "evacuated": evacuated,
        "peak_concurrent": metrics.peak_concurrent,
        "mean_travel_time_s": (metrics.travel_time_sum / metrics.travel_time_count)
        if metrics.travel_time_count else 0.0,
        "world_hash": final_hash,
    }
    for name in sorted(metrics.mode_time):
        share = metrics.mode_time[name] / total_time if total_time > 0 else 0.0
        summary[f"mode_share_{name}"] = share
    return summary
