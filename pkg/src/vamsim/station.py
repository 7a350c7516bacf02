"""Per-station VRU Basic Service skeleton shared by the three schemes.

A station talks to the simulation through a small host object:

- ``host.now`` current simulation time
- ``host.kinematics(sid)`` current KinematicState of a station
- ``host.send(sid, vam)`` hand a generated VAM to the access layer
- ``host.schedule(sid, time, kind, token)`` request ``on_timer(kind, token)``
- ``host.transition(sid, old, new, label)`` transition bookkeeping
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import (
    BASE_VAM_BYTES,
    CLUSTER_VAM_BYTES,
    CoverageOffer,
    EtsiClusterContainer,
    KinematicState,
    Mode,
    StationId,
    Vam,
    VbsState,
    distance,
)
from .triggers import TriggerConfig, TriggerDecision, TriggerState, check_triggers, reset_triggers


@dataclass(frozen=True)
class Heard:
    time: float
    vam: Vam
    distance: float
    """Sender-receiver distance at reception, receiver's current position."""


class VbsStation:
    scheme = "standalone"
    # cleared to run a clustering scheme as plain standalone until a start time
    clustering = True

    def __init__(
        self,
        sid: StationId,
        host,
        trigger_cfg: TriggerConfig = TriggerConfig(),
        base_bytes: int = BASE_VAM_BYTES,
        cluster_bytes: int = CLUSTER_VAM_BYTES,
    ):
        self.sid = sid
        self.host = host
        self.trigger_cfg = trigger_cfg
        self.base_bytes = base_bytes
        self.cluster_bytes = cluster_bytes
        self.trig = TriggerState()
        self.vbs = VbsState()
        self.heard: dict[StationId, Heard] = {}

    @property
    def mode(self) -> Mode:
        return self.vbs.mode

    def set_mode(self, mode: Mode, label: Optional[str] = None):
        old = self.vbs.mode
        self.vbs.set(mode, self.host.now, label)
        self.host.transition(self.sid, old, mode, label)

    def kin(self) -> KinematicState:
        return self.host.kinematics(self.sid)

    # lifecycle

    def activate(self):
        if self.mode is Mode.IDLE:
            self.trig = TriggerState()
            self.set_mode(Mode.ACTIVE_STANDALONE, self.start_label)

    def deactivate(self):
        if self.mode is not Mode.IDLE:
            self.set_mode(Mode.IDLE, self.stop_label())

    start_label = "a"

    def stop_label(self) -> str:
        return "b"

    # events

    def on_check(self):
        if self.mode is Mode.ACTIVE_STANDALONE and self.trigger_fired():
            self.generate()

    def on_receive(self, vam: Vam):
        now = self.host.now
        self.heard[vam.sender] = Heard(now, vam, distance(self.kin().position, vam.kinematics.position))

    def on_timer(self, kind: str, token):
        pass

    # helpers

    def trigger_fired(self) -> bool:
        return check_triggers(self.trig, self.host.now, self.kin(), self.trigger_cfg) is TriggerDecision.FIRE

    def reset(self):
        self.trig = reset_triggers(self.trig, self.host.now, self.kin())

    def generate(
        self,
        coverage: Optional[CoverageOffer] = None,
        cluster: Optional[EtsiClusterContainer] = None,
    ) -> Vam:
        now = self.host.now
        kin = self.kin()
        vam = Vam(
            sender=self.sid,
            generation_time=now,
            kinematics=kin,
            coverage=coverage,
            cluster=cluster,
            size_bytes=self.cluster_bytes if cluster is not None else self.base_bytes,
        )
        self.trig = reset_triggers(self.trig, now, kin)
        self.host.send(self.sid, vam)
        return vam

    def recent_neighbors(self, radius: float, window: float) -> list:
        """Distinct senders heard within ``window`` seconds at most ``radius`` away."""
        now = self.host.now
        return sorted(
            sid
            for sid, h in self.heard.items()
            if now - h.time <= window and h.distance <= radius and sid != self.sid
        )


class StandaloneStation(VbsStation):
    """Plain VBS: every trigger fire produces a VAM, no clustering."""
