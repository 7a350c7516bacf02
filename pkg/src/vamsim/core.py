"""Shared domain types: kinematics, coverage circles, VAM records and station modes.

Geometry is a flat 2-D plane in meters. Headings are degrees measured
counter-clockwise from the +x axis and normalized to [0, 360).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

StationId = int

BASE_VAM_BYTES = 190
CLUSTER_VAM_BYTES = 240


class Point(NamedTuple):
    x: float
    y: float


def distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def normalize_heading(deg: float) -> float:
    h = math.fmod(deg, 360.0)
    if h < 0.0:
        h += 360.0
    # fmod of a tiny negative number can round to exactly 360.0
    return 0.0 if h >= 360.0 else h


def heading_delta(a: float, b: float) -> float:
    """Smallest angle between two headings, in [0, 180]."""
    d = abs(a - b) % 360.0
    return 360.0 - d if d > 180.0 else d


@dataclass(frozen=True)
class KinematicState:
    position: Point
    speed: float
    heading: float

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        object.__setattr__(self, "position", Point(*self.position))
        object.__setattr__(self, "heading", normalize_heading(self.heading))


@dataclass(frozen=True)
class CoverageOffer:
    center: Point
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"coverage radius must be > 0, got {self.radius}")
        object.__setattr__(self, "center", Point(*self.center))


def within_coverage(p, offer: CoverageOffer) -> bool:
    # boundary is inclusive
    return distance(p, offer.center) <= offer.radius


class ClusterOp(enum.Enum):
    LEAD = "Lead"
    JOIN_REQUEST = "JoinRequest"
    JOIN_CONFIRM = "JoinConfirm"
    KEEP_ALIVE = "KeepAlive"
    LEAVE = "Leave"
    BREAK_UP = "BreakUp"


class LeaveReason(enum.Enum):
    OUT_OF_RANGE = "OutOfRange"
    LEADER_LOST = "LeaderLost"
    ROLE_CHANGE = "RoleChange"
    OTHER = "Other"


@dataclass(frozen=True)
class EtsiClusterContainer:
    cluster_id: int
    shape: CoverageOffer
    operation: ClusterOp
    member_list: Optional[tuple] = None
    leave_reason: Optional[LeaveReason] = None

    def __post_init__(self):
        if self.operation is ClusterOp.LEAVE and self.leave_reason is None:
            raise ValueError("a Leave container must carry a leave reason")


class Mode(enum.Enum):
    IDLE = "Idle"
    ACTIVE_STANDALONE = "ActiveStandalone"
    ACTIVE_CLUSTER_LEADER = "ActiveClusterLeader"
    ACTIVE_CLUSTER_MEMBER = "ActiveClusterMember"
    PASSIVE = "Passive"

    @property
    def runs_vbs(self) -> bool:
        return self is not Mode.IDLE

    @property
    def transmits(self) -> bool:
        """Whether the mode transmits VAMs on its own kinematic schedule.

        Members and passive stations transmit only on the exceptional paths
        (leader timeout, leaving) and are therefore reported as False.
        """
        return self in (Mode.ACTIVE_STANDALONE, Mode.ACTIVE_CLUSTER_LEADER)


@dataclass(frozen=True)
class Vam:
    sender: StationId
    generation_time: float
    kinematics: KinematicState
    coverage: Optional[CoverageOffer] = None
    cluster: Optional[EtsiClusterContainer] = None
    size_bytes: int = 0

    def __post_init__(self):
        if self.coverage is not None and self.cluster is not None:
            raise ValueError("a VAM carries either a coverage offer or a cluster container, not both")
        if self.size_bytes == 0:
            object.__setattr__(
                self, "size_bytes", CLUSTER_VAM_BYTES if self.cluster is not None else BASE_VAM_BYTES
            )
        if self.size_bytes <= 0:
            raise ValueError(f"VAM size must be positive, got {self.size_bytes}")


@dataclass
class VbsState:
    """Per-station protocol mode; exactly one mode at any instant."""

    mode: Mode = Mode.IDLE
    history: list = field(default_factory=list)

    def set(self, mode: Mode, now: float, label: Optional[str] = None):
        self.history.append((now, self.mode, mode, label))
        self.mode = mode
