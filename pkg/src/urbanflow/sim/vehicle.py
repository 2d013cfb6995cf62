"""Vehicle agents: kinematic state, driver personality and decision state."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field


class Mode(enum.IntEnum):
    NORMAL = 0
    JAM_ESCAPE = 1
    CHICKEN = 2
    SPECTATOR = 3
    PRAGMATIC = 4
    WANDERING = 5
    ROADRUNNER = 6
    SHEEP = 7


MODE_NAMES = {m: m.name.lower() for m in Mode}
MODES_BY_NAME = {m.name.lower(): m for m in Mode}


@dataclass
class Distribution:
    """Truncated normal; sd=0 collapses to the mean."""

    mean: float
    sd: float = 0.0
    lo: float = -float("inf")
    hi: float = float("inf")

    def sample(self, rng: random.Random) -> float:
        if self.sd <= 0:
            return min(max(self.mean, self.lo), self.hi)
        for _ in range(64):
            x = rng.gauss(self.mean, self.sd)
            if self.lo <= x <= self.hi:
                return x
        return min(max(self.mean, self.lo), self.hi)


@dataclass
class DriverDistributions:
    """Per-vehicle heterogeneity; sd=0 everywhere gives a uniform fleet."""

    a_max: Distribution = field(default_factory=lambda: Distribution(1.5, 0.2, 0.8, 2.5))
    b_comfort: Distribution = field(default_factory=lambda: Distribution(2.0, 0.25, 1.0, 3.0))
    headway: Distribution = field(default_factory=lambda: Distribution(1.2, 0.2, 0.6, 2.5))
    s0: Distribution = field(default_factory=lambda: Distribution(2.0, 0.3, 1.0, 4.0))
    delta: Distribution = field(default_factory=lambda: Distribution(4.0))
    speed_compliance: Distribution = field(default_factory=lambda: Distribution(1.0, 0.08, 0.7, 1.3))
    length: Distribution = field(default_factory=lambda: Distribution(4.5, 0.3, 3.5, 6.0))
    blocker_tendency: Distribution = field(default_factory=lambda: Distribution(0.3, 0.2, 0.0, 1.0))
    saturation_threshold: Distribution = field(default_factory=lambda: Distribution(90.0, 20.0, 30.0, 240.0))
    stubbornness: Distribution = field(default_factory=lambda: Distribution(0.2, 0.1, 0.0, 1.0))

    def sample(self, rng: random.Random) -> "DriverParams":
        return DriverParams(
            a_max=self.a_max.sample(rng),
            b_comfort=self.b_comfort.sample(rng),
            headway=self.headway.sample(rng),
            s0=self.s0.sample(rng),
            delta=self.delta.sample(rng),
            speed_compliance=self.speed_compliance.sample(rng),
            length=self.length.sample(rng),
            blocker_tendency=self.blocker_tendency.sample(rng),
            saturation_threshold=self.saturation_threshold.sample(rng),
            stubbornness=self.stubbornness.sample(rng),
        )


@dataclass
class DriverParams:
    a_max: float
    b_comfort: float
    headway: float
    s0: float
    delta: float
    speed_compliance: float
    length: float
    blocker_tendency: float
    saturation_threshold: float
    stubbornness: float


# phase-2 action codes stored in Vehicle._cross
CROSS_NONE = 0
CROSS_MOVE = 1    # into (next_edge, _target_lane)
CROSS_NODE = 2    # into the junction container
CROSS_LEAVE = 3   # arrival or map exit
CROSS_WAIT = 4    # hold at the stop line


class Vehicle:
    __slots__ = (
        "id", "edge", "lane", "s", "v",
        "length", "a_max", "b_comfort", "headway", "s0", "delta",
        "speed_compliance", "blocker_tendency", "saturation_threshold", "stubbornness",
        "dest", "plan", "plan_i", "desires",
        "mode", "annoyance", "annoyance_at_entry", "mode_entry_tick",
        "recent_edges", "crisis_x", "crisis_y", "crisis_tick",
        "trigger_x", "trigger_y",
        "spawn_tick", "last_change_tick", "rng",
        "v_des", "next_edge", "next_decided_for", "advised_for", "blocker_roll",
        "parked", "stranded", "stranded_logged", "annoyed", "node_until",
        "_a", "_cross", "_target_lane", "_lane_move", "_overflow",
    )

    def __init__(self, vid: int, params: DriverParams, rng: random.Random):
        self.id = vid
        self.edge = -1
        self.lane = 0
        self.s = 0.0
        self.v = 0.0
        self.length = params.length
        self.a_max = params.a_max
        self.b_comfort = params.b_comfort
        self.headway = params.headway
        self.s0 = params.s0
        self.delta = params.delta
        self.speed_compliance = params.speed_compliance
        self.blocker_tendency = params.blocker_tendency
        self.saturation_threshold = params.saturation_threshold
        self.stubbornness = params.stubbornness
        self.dest = -1
        self.plan: list[int] = []
        self.plan_i = 0
        self.desires: list[int] = []
        self.mode = Mode.NORMAL
        self.annoyance = 0.0
        self.annoyance_at_entry = 0.0
        self.mode_entry_tick = 0
        self.recent_edges: list[int] = []
        self.crisis_x = 0.0
        self.crisis_y = 0.0
        self.crisis_tick = -1
        self.trigger_x = 0.0
        self.trigger_y = 0.0
        self.spawn_tick = -1
        self.last_change_tick = -(10 ** 9)
        self.rng = rng
        self.v_des = 13.9
        self.next_edge = -1
        self.next_decided_for = -1
        self.advised_for = -1
        self.blocker_roll = -1.0
        self.parked = False
        self.stranded = False
        self.stranded_logged = False
        self.annoyed = False
        self.node_until = -1
        self._a = 0.0
        self._cross = CROSS_NONE
        self._target_lane = 0
        self._lane_move = -1
        self._overflow = 0.0

    def push_recent(self, edge_id: int, cap: int) -> None:
        recent = self.recent_edges
        recent.append(edge_id)
        if len(recent) > cap:
            del recent[0]
