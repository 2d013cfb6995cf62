"""Car-following acceleration law.

Classic intelligent-driver form: free-road relaxation toward a desired
speed plus an interaction term built from a dynamic desired gap. The
result is clamped to [-3 * comfortable braking, max acceleration]; the
emergency floor keeps the model collision-free at a 0.5 s step without
an implicit integrator.
"""

from __future__ import annotations

import math

EMERGENCY_FACTOR = 3.0


def desired_gap(v: float, dv: float, a_max: float, b_comfort: float,
                headway: float, s0: float) -> float:
    return s0 + max(0.0, v * headway + v * dv / (2.0 * math.sqrt(a_max * b_comfort)))


def idm_acceleration(v: float, v_desired: float, gap: float, dv: float,
                     a_max: float, b_comfort: float, headway: float,
                     s0: float, delta: float) -> float:
    """Acceleration for speed v against a leader at distance gap closing at dv.

    gap=inf means a free road. dv > 0 when approaching the leader.
    """
    free = (v / v_desired) ** delta if v_desired > 0 else 1.0
    if gap == math.inf:
        interaction = 0.0
    else:
        ss = desired_gap(v, dv, a_max, b_comfort, headway, s0)
        interaction = (ss / gap) ** 2
    a = a_max * (1.0 - free - interaction)
    lo = -EMERGENCY_FACTOR * b_comfort
    if a < lo:
        return lo
    if a > a_max:
        return a_max
    return a
