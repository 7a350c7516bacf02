"""Implicit (non-negotiated) VAM clustering.

No cluster messages exist. A standalone VRU that has heard a neighbour
within ``cluster_radius`` attaches a coverage circle to its next regular
VAM. Stations inside a received circle become members: they reset their
kinematic triggers and, when a trigger later fires, wait a random holdoff
to give the leader the chance to cover them again. A covering leader VAM
inhibits them; silence makes the member with the shortest holdoff
transmit, offering coverage itself when it has neighbours. A leader that
stops attaching the circle disbands the cluster implicitly.

Transition labels (a)-(i):
a Idle -> standalone, b standalone -> Idle, c standalone -> member,
d member -> standalone, e standalone -> leader, f leader -> standalone
(offer dropped), g leader -> Idle, h member -> leader (takeover),
i leader -> member (yield).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

from .core import CoverageOffer, Mode, StationId, Vam, within_coverage
from .station import VbsStation


@dataclass(frozen=True)
class ImplicitConfig:
    cluster_radius: float = 5.0
    holdoff_min: float = 0.1
    holdoff_max: float = 5.0
    # how far back a standalone looks for neighbours before offering
    neighbor_window: float = 5.0
    # same, for a member taking over from a silent leader
    takeover_window: float = 10.0
    processing_power: bool = True

    def __post_init__(self):
        if not 0 < self.holdoff_min < self.holdoff_max:
            raise ValueError("need 0 < holdoff_min < holdoff_max")
        if not self.cluster_radius > 0:
            raise ValueError("cluster_radius must be > 0")


@dataclass
class MemberRuntime:
    leader_id: StationId
    last_leader_offer: CoverageOffer
    last_leader_vam_time: float
    pending_holdoff: Optional[float] = None  # expiry time
    holdoff_started: Optional[float] = None


class OfferDecision(enum.Enum):
    OFFER_COVERAGE = "offerCoverage"
    STAY = "stay"


class OfferReaction(enum.Enum):
    BECOME_MEMBER = "becomeMember"
    IGNORE = "ignore"
    YIELD_LEADERSHIP = "yieldLeadership"


class HoldoffOutcome(enum.Enum):
    INHIBIT = "inhibit"
    TAKE_OVER_AND_TRANSMIT = "takeOverAndTransmit"


class LeaderVamOutcome(enum.Enum):
    REFRESH = "refresh"
    EXIT_TO_STANDALONE = "exitToStandalone"


class LeaderLifecycle(enum.Enum):
    KEEP_OFFERING = "keepOffering"
    DROP_OFFER = "dropOffer"
    GO_IDLE = "goIdle"


def on_standalone_heard(heard: Iterable, cfg: ImplicitConfig) -> OfferDecision:
    """heard: (sender, distance at reception) pairs from the recent window."""
    if cfg.processing_power and any(d <= cfg.cluster_radius for _, d in heard):
        return OfferDecision.OFFER_COVERAGE
    return OfferDecision.STAY


def on_offer_received(mode: Mode, ego_id: StationId, ego_position, vam: Vam) -> OfferReaction:
    offer = vam.coverage
    if offer is None or vam.sender == ego_id or not within_coverage(ego_position, offer):
        return OfferReaction.IGNORE
    if mode in (Mode.ACTIVE_STANDALONE, Mode.ACTIVE_CLUSTER_MEMBER):
        return OfferReaction.BECOME_MEMBER
    if mode is Mode.ACTIVE_CLUSTER_LEADER and vam.sender < ego_id:
        # lower id wins; the other leader keeps its circle
        return OfferReaction.YIELD_LEADERSHIP
    return OfferReaction.IGNORE


def on_member_trigger_fired(now: float, rng, cfg: ImplicitConfig) -> float:
    return now + rng.uniform(cfg.holdoff_min, cfg.holdoff_max)


def on_holdoff_expiry(
    ego_position, holdoff_started: float, member: MemberRuntime
) -> HoldoffOutcome:
    if (
        member.last_leader_vam_time >= holdoff_started
        and member.last_leader_offer is not None
        and within_coverage(ego_position, member.last_leader_offer)
    ):
        return HoldoffOutcome.INHIBIT
    return HoldoffOutcome.TAKE_OVER_AND_TRANSMIT


def on_leader_vam_received(ego_position, vam: Vam) -> LeaderVamOutcome:
    if vam.coverage is not None and within_coverage(ego_position, vam.coverage):
        return LeaderVamOutcome.REFRESH
    return LeaderVamOutcome.EXIT_TO_STANDALONE


def leader_lifecycle(now: float, drop_offer_at=None, idle_at=None) -> LeaderLifecycle:
    if idle_at is not None and now >= idle_at:
        return LeaderLifecycle.GO_IDLE
    if drop_offer_at is not None and now >= drop_offer_at:
        return LeaderLifecycle.DROP_OFFER
    return LeaderLifecycle.KEEP_OFFERING


class ImplicitStation(VbsStation):
    scheme = "implicitCluster"

    def __init__(self, sid, host, trigger_cfg, cfg: ImplicitConfig = ImplicitConfig(), rng=None, **kw):
        super().__init__(sid, host, trigger_cfg, **kw)
        self.cfg = cfg
        self.rng = rng
        self.member: Optional[MemberRuntime] = None
        self._holdoff_token = 0
        self.drop_offer_at: Optional[float] = None
        self.idle_at: Optional[float] = None
        self._offer_blackout = float("-inf")

    def stop_label(self) -> str:
        return "g" if self.mode is Mode.ACTIVE_CLUSTER_LEADER else "b"

    def deactivate(self):
        super().deactivate()
        self.member = None

    def disband(self):
        """Stop offering coverage from the next check on; nothing is sent."""
        if self.mode is Mode.ACTIVE_CLUSTER_LEADER:
            self.drop_offer_at = self.host.now

    def _offer(self) -> CoverageOffer:
        return CoverageOffer(self.kin().position, self.cfg.cluster_radius)

    def _heard_close(self, window: float):
        now = self.host.now
        return [
            (sid, h.distance)
            for sid, h in self.heard.items()
            if now - h.time <= window and h.time > self._offer_blackout
        ]

    def _transmit_standalone(self, window: float, offer_label: str):
        """Send the VAM owed by a fired trigger, with a circle if neighbours were heard."""
        if on_standalone_heard(self._heard_close(window), self.cfg) is OfferDecision.OFFER_COVERAGE:
            self.set_mode(Mode.ACTIVE_CLUSTER_LEADER, offer_label)
            self.generate(coverage=self._offer())
        else:
            if self.mode is not Mode.ACTIVE_STANDALONE:
                self.set_mode(Mode.ACTIVE_STANDALONE, "d")
            self.generate()

    def on_check(self):
        if not self.clustering:
            return VbsStation.on_check(self)
        mode = self.mode
        if mode is Mode.ACTIVE_STANDALONE:
            if self.trigger_fired():
                self._transmit_standalone(self.cfg.neighbor_window, "e")
        elif mode is Mode.ACTIVE_CLUSTER_LEADER:
            fate = leader_lifecycle(self.host.now, self.drop_offer_at, self.idle_at)
            if fate is LeaderLifecycle.GO_IDLE:
                self.deactivate()
            elif fate is LeaderLifecycle.DROP_OFFER:
                self.drop_offer_at = None
                self.set_mode(Mode.ACTIVE_STANDALONE, "f")
                # dropping the offer sends nothing; neighbours heard so far no longer count
                self._offer_blackout = self.host.now
                if self.trigger_fired():
                    self.generate()
            elif self.trigger_fired():
                self.generate(coverage=self._offer())
        elif mode is Mode.ACTIVE_CLUSTER_MEMBER:
            m = self.member
            if m.pending_holdoff is None and self.trigger_fired():
                now = self.host.now
                m.pending_holdoff = on_member_trigger_fired(now, self.rng, self.cfg)
                m.holdoff_started = now
                self._holdoff_token += 1
                self.host.schedule(self.sid, m.pending_holdoff, "holdoff", self._holdoff_token)

    def on_timer(self, kind: str, token):
        m = self.member
        if kind != "holdoff" or m is None or token != self._holdoff_token or m.pending_holdoff is None:
            return
        if on_holdoff_expiry(self.kin().position, m.holdoff_started, m) is HoldoffOutcome.INHIBIT:
            m.pending_holdoff = m.holdoff_started = None
            self.reset()
            return
        self.member = None
        self._transmit_standalone(self.cfg.takeover_window, "h")

    def on_receive(self, vam: Vam):
        super().on_receive(vam)
        mode = self.mode
        if mode is Mode.IDLE or not self.clustering:
            return
        m = self.member
        pos = self.kin().position
        if m is not None and vam.sender == m.leader_id:
            if on_leader_vam_received(pos, vam) is LeaderVamOutcome.REFRESH:
                self._follow(vam)
            else:
                self._exit()
            return
        reaction = on_offer_received(mode, self.sid, pos, vam)
        if reaction is OfferReaction.BECOME_MEMBER:
            self._follow(vam, "c" if mode is Mode.ACTIVE_STANDALONE else None)
        elif reaction is OfferReaction.YIELD_LEADERSHIP:
            self._follow(vam, "i")

    def _follow(self, vam: Vam, label: Optional[str] = None):
        self.member = MemberRuntime(vam.sender, vam.coverage, self.host.now)
        self._holdoff_token += 1
        self.reset()
        if label is not None:
            self.set_mode(Mode.ACTIVE_CLUSTER_MEMBER, label)

    def _exit(self):
        # a trigger that already fired is served by the next standalone check
        self.member = None
        self._holdoff_token += 1
        self.set_mode(Mode.ACTIVE_STANDALONE, "d")
