"""Kinematic VAM generation rules.

Every ``check_interval`` a station compares its current kinematics with the
values it sent in its last VAM. A VAM is generated when the minimum
inter-generation time has elapsed and either a position, speed or heading
threshold is crossed or the maximum inter-generation time is reached.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

from .core import KinematicState, distance, heading_delta

# Absorbs float drift so that e.g. 40 steps of 0.1 s at 1 m/s count as 4 m.
EPS = 1e-9


class TriggerDecision(enum.Enum):
    FIRE = "fire"
    HOLD = "hold"


@dataclass(frozen=True)
class TriggerConfig:
    check_interval: float = 0.1
    delta_position: float = 4.0
    delta_speed: float = 0.5
    delta_heading: float = 4.0
    t_gen_vam_min: float = 0.1
    t_gen_vam_max: float = 5.0

    def __post_init__(self):
        if not 0 < self.t_gen_vam_min <= self.t_gen_vam_max:
            raise ValueError("need 0 < t_gen_vam_min <= t_gen_vam_max")
        if not self.check_interval > 0:
            raise ValueError("check_interval must be > 0")
        if min(self.delta_position, self.delta_speed, self.delta_heading) <= 0:
            raise ValueError("trigger deltas must be > 0")


@dataclass(frozen=True)
class TriggerState:
    reference: Optional[KinematicState] = None
    last_vam_time: float = float("-inf")
    armed: bool = False
    """False until the first VAM; an unarmed state fires on its first check."""


def check_triggers(
    state: TriggerState, now: float, current: KinematicState, cfg: TriggerConfig
) -> TriggerDecision:
    if not state.armed:
        return TriggerDecision.FIRE
    elapsed = now - state.last_vam_time
    if elapsed < -EPS:
        raise ValueError(f"check at {now} precedes last VAM at {state.last_vam_time}")
    if elapsed < cfg.t_gen_vam_min - EPS:
        return TriggerDecision.HOLD
    ref = state.reference
    if (
        elapsed >= cfg.t_gen_vam_max - EPS
        or distance(current.position, ref.position) >= cfg.delta_position - EPS
        or abs(current.speed - ref.speed) >= cfg.delta_speed - EPS
        or heading_delta(current.heading, ref.heading) >= cfg.delta_heading - EPS
    ):
        return TriggerDecision.FIRE
    return TriggerDecision.HOLD


def reset_triggers(state: TriggerState, now: float, current: KinematicState) -> TriggerState:
    return replace(state, reference=current, last_vam_time=now, armed=True)
