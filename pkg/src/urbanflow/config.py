"""Scenario configuration: schema, defaults, validation.

Everything tunable lives here — network source, arrival rates, driver
parameter distributions, behavior mixtures and every module constant.
Unknown keys are rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DistributionCfg(_Strict):
    mean: float
    sd: float = 0.0
    lo: float | None = None  # None = unbounded
    hi: float | None = None


class DriversCfg(_Strict):
    a_max: DistributionCfg = DistributionCfg(mean=1.5, sd=0.2, lo=0.8, hi=2.5)
    b_comfort: DistributionCfg = DistributionCfg(mean=2.0, sd=0.25, lo=1.0, hi=3.0)
    headway: DistributionCfg = DistributionCfg(mean=1.2, sd=0.2, lo=0.6, hi=2.5)
    s0: DistributionCfg = DistributionCfg(mean=2.0, sd=0.3, lo=1.0, hi=4.0)
    delta: DistributionCfg = DistributionCfg(mean=4.0)
    speed_compliance: DistributionCfg = DistributionCfg(mean=1.0, sd=0.08, lo=0.7, hi=1.3)
    length: DistributionCfg = DistributionCfg(mean=4.5, sd=0.3, lo=3.5, hi=6.0)
    blocker_tendency: DistributionCfg = DistributionCfg(mean=0.3, sd=0.2, lo=0.0, hi=1.0)
    saturation_threshold: DistributionCfg = DistributionCfg(mean=90.0, sd=20.0, lo=30.0, hi=240.0)
    stubbornness: DistributionCfg = DistributionCfg(mean=0.2, sd=0.1, lo=0.0, hi=1.0)


class SyntheticCfg(_Strict):
    kind: Literal["grid", "radial"]
    rows: int = 0
    cols: int = 0
    rings: int = 0
    spokes: int = 0
    edge_length: float = 100.0
    lanes: int = 1
    speed: float = 13.9
    exit_stubs: bool = False
    jitter: float = 0.0

    def as_spec(self) -> dict:
        spec = {"kind": self.kind, "edge_length": self.edge_length, "lanes": self.lanes,
                "speed": self.speed}
        if self.kind == "grid":
            spec.update(rows=self.rows, cols=self.cols, exit_stubs=self.exit_stubs)
        else:
            spec.update(rings=self.rings, spokes=self.spokes)
        if self.jitter:
            spec["jitter"] = self.jitter
        return spec


class FilesCfg(_Strict):
    shp: str
    dbf: str
    zlevels: str | None = None
    mapping: dict = Field(default_factory=dict)


class NetworkCfg(_Strict):
    synthetic: SyntheticCfg | None = None
    files: FilesCfg | None = None
    epsilon: float = 0.01

    @model_validator(mode="after")
    def _one_source(self) -> "NetworkCfg":
        if (self.synthetic is None) == (self.files is None):
            raise ValueError("network needs exactly one of 'synthetic' or 'files'")
        return self


class RoutingCfg(_Strict):
    speed_factor: float = 0.9
    lane_bonus: float = 0.25
    slot_length: float = 7.5
    huge_multiplier: float = 1e6
    encumbered_multiplier: float = 50.0


class SimCfg(_Strict):
    dt: float = 0.5
    duration_s: float = 600.0
    seed: int = 1
    workers: int = 1
    lane_change_gain: float = 0.2
    lane_change_cooldown: float = 5.0
    pre_exit_zone: float = 50.0
    claim_gap: float = 3.0
    right_bias: float = 0.6
    node_crossing_speed: float = 5.0
    lane_width: float = 3.5
    stop_margin: float = 0.5
    gap_floor: float = 0.1
    lookahead: float = 60.0
    flow_window_s: float = 30.0
    debug_checks: bool = False

    @model_validator(mode="after")
    def _positive(self) -> "SimCfg":
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")
        return self


class BehaviorCfg(_Strict):
    stop_speed: float = 0.5
    annoyance_decay: float = 0.5
    jam_resume_distance: float = 500.0
    recent_edges: int = 8
    patience_s: float = 60.0
    patience_factor: float = 1.5
    spectator_class: Literal["global", "planar"] = "global"
    planar_metric: Literal["hops", "euclidean"] = "hops"
    planar_limit: float = 2.0


class TransportersCfg(_Strict):
    base_threshold: float = 0.7
    occupancy_weight: float = 0.6
    annoyed_weight: float = 0.4
    warning_decay: float = 0.85
    hysteresis: float = 0.8
    retable_budget: int = 64


class MetricsCfg(_Strict):
    window_s: float = 300.0
    envelope_tolerance: float = 0.25
    envelope_flow_floor: float = 15.0


class OdCfg(_Strict):
    preset: Literal["uniform", "morning-inbound", "evening-outbound"] = "uniform"
    source_weights: list[float] | None = None
    sink_weights: list[float] | None = None
    center: tuple[float, float] | None = None


class SpawnCfg(_Strict):
    rate: float = 0.0
    profile: list[tuple[float, float]] | None = None  # (time s, veh/s) steps


class InitialFleetCfg(_Strict):
    count: int = 0
    loop: bool = False


class MixtureCfg(_Strict):
    inside: dict[str, float] = Field(default_factory=lambda: {"chicken": 1.0})
    outside: dict[str, float] = Field(default_factory=lambda: {"normal": 1.0})


class EventCfg(_Strict):
    at_tick: int
    kind: Literal["bar_edge", "unbar_edge", "explosion", "spawn_rate"]
    edge: int | None = None
    x: float | None = None
    y: float | None = None
    radius: float | None = None
    intensity: float | None = None
    inside: dict[str, float] | None = None
    outside: dict[str, float] | None = None
    rate: float | None = None

    @model_validator(mode="after")
    def _fields_for_kind(self) -> "EventCfg":
        if self.kind in ("bar_edge", "unbar_edge") and self.edge is None:
            raise ValueError(f"{self.kind} needs 'edge'")
        if self.kind == "explosion":
            for name in ("x", "y", "radius", "intensity"):
                if getattr(self, name) is None:
                    raise ValueError(f"explosion needs '{name}'")
        if self.kind == "spawn_rate" and self.rate is None:
            raise ValueError("spawn_rate needs 'rate'")
        return self


class ServerCfg(_Strict):
    snapshot_every: int = 4
    vehicle_cap: int = 20000
    speed: float = 1.0
    start_paused: bool = False


class OutputCfg(_Strict):
    dir: str = "out"


class ScenarioConfig(_Strict):
    network: NetworkCfg
    routing: RoutingCfg = RoutingCfg()
    sim: SimCfg = SimCfg()
    drivers: DriversCfg = DriversCfg()
    behavior: BehaviorCfg = BehaviorCfg()
    transporters: TransportersCfg = TransportersCfg()
    metrics: MetricsCfg = MetricsCfg()
    od: OdCfg = OdCfg()
    spawn: SpawnCfg = SpawnCfg()
    initial_fleet: InitialFleetCfg = InitialFleetCfg()
    crisis_defaults: MixtureCfg = MixtureCfg()
    events: list[EventCfg] = Field(default_factory=list)
    server: ServerCfg = ServerCfg()
    output: OutputCfg = OutputCfg()

    @model_validator(mode="after")
    def _events_in_range(self) -> "ScenarioConfig":
        n_ticks = int(round(self.sim.duration_s / self.sim.dt))
        for ev in self.events:
            if not (0 <= ev.at_tick <= n_ticks):
                raise ValueError(f"event at tick {ev.at_tick} outside run of {n_ticks} ticks")
        return self


def load_config(text_or_dict: str | dict) -> ScenarioConfig:
    try:
        if isinstance(text_or_dict, str):
            text_or_dict = json.loads(text_or_dict)
        return ScenarioConfig.model_validate(text_or_dict)
    except (json.JSONDecodeError, ValidationError) as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(config: ScenarioConfig) -> str:
    return config.model_dump_json(indent=2)
