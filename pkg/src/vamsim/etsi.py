"""Explicit (negotiated) VAM clustering.

Cluster operations travel in a cluster container attached to a VAM. A
standalone VRU that hears enough close neighbours offers to lead; others
request to join, the leader confirms within ``time_cluster_join_success``
and keeps the cluster alive with a cluster VAM at least every
``time_cluster_continuity``. Members are passive and only transmit to leave.

Transition labels (1)-(7):
1 Idle -> standalone, 2 standalone -> Idle, 3 standalone -> member,
4 member -> standalone, 5 standalone -> leader, 6 leader -> standalone
(break-up), 7 leader keep-alive.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    ClusterOp,
    CoverageOffer,
    EtsiClusterContainer,
    KinematicState,
    LeaveReason,
    Mode,
    Point,
    StationId,
    Vam,
    distance,
)
from .station import VbsStation
from .triggers import EPS


@dataclass(frozen=True)
class EtsiClusterConfig:
    max_members: int = 20
    min_neighbors_to_form: int = 3
    join_distance: float = 5.0
    speed_homogeneity: float = 0.05
    time_cluster_continuity: float = 2.0
    time_cluster_join_notification: float = 3.0
    time_cluster_join_success: float = 0.5
    # access-layer delay tolerance before a member declares the leader lost
    leader_loss_grace: float = 0.05
    join_retries: int = 1

    def __post_init__(self):
        if self.min_neighbors_to_form < 1:
            raise ValueError("min_neighbors_to_form must be >= 1")
        if not 0 < self.time_cluster_join_success < self.time_cluster_continuity:
            raise ValueError("need 0 < time_cluster_join_success < time_cluster_continuity")


@dataclass
class EtsiClusterRuntime:
    cluster_id: int
    leader: StationId
    members: set = field(default_factory=set)
    last_leader_vam_time: float = float("-inf")
    pending_joins: dict = field(default_factory=dict)
    formed_at: float = 0.0


class Formation(enum.Enum):
    FORM_CLUSTER = "formCluster"
    STAY = "stay"


class JoinDecision(enum.Enum):
    SEND_JOIN_REQUEST = "sendJoinRequest"
    IGNORE = "ignore"


class MemberDecision(enum.Enum):
    STAY = "stay"
    LEAVE_TO_STANDALONE = "leaveToStandalone"


def speeds_homogeneous(ego_speed: float, leader_speed: float, tolerance: float) -> bool:
    return abs(ego_speed - leader_speed) <= tolerance * leader_speed + 1e-12


def evaluate_formation(
    ego: KinematicState, neighbors_heard, now: float, cfg: EtsiClusterConfig
) -> Formation:
    """neighbors_heard: iterable of (station id, reported kinematics, reception time)."""
    close = {
        sid
        for sid, kin, t in neighbors_heard
        if now - t <= cfg.time_cluster_continuity + EPS
        and distance(ego.position, kin.position) <= cfg.join_distance
    }
    return Formation.FORM_CLUSTER if len(close) >= cfg.min_neighbors_to_form else Formation.STAY


def evaluate_join(ego: KinematicState, heard: Vam, cfg: EtsiClusterConfig) -> JoinDecision:
    c = heard.cluster
    if c is None or c.operation not in (ClusterOp.LEAD, ClusterOp.KEEP_ALIVE, ClusterOp.JOIN_CONFIRM):
        return JoinDecision.IGNORE
    if len(c.member_list or ()) >= cfg.max_members:
        return JoinDecision.IGNORE
    if distance(ego.position, heard.kinematics.position) > cfg.join_distance:
        return JoinDecision.IGNORE
    if not speeds_homogeneous(ego.speed, heard.kinematics.speed, cfg.speed_homogeneity):
        return JoinDecision.IGNORE
    return JoinDecision.SEND_JOIN_REQUEST


def leader_tick(rt: EtsiClusterRuntime, now: float, cfg: EtsiClusterConfig) -> list:
    """Cluster VAMs the leader owes at ``now``, as (operation, new member ids).

    Pending joins are batched: once the oldest request reaches its deadline,
    every request received so far is confirmed in a single cluster VAM.
    A confirmation also counts as the keep-alive.
    """
    if rt.pending_joins:
        oldest = min(rt.pending_joins.values())
        if now >= oldest + cfg.time_cluster_join_success - EPS:
            room = max(cfg.max_members - len(rt.members), 0)
            batch = sorted(s for s, t in rt.pending_joins.items() if t <= now + EPS)[:room]
            return [(ClusterOp.JOIN_CONFIRM, tuple(batch))]
    if now - rt.last_leader_vam_time >= cfg.time_cluster_continuity - EPS:
        return [(ClusterOp.KEEP_ALIVE, ())]
    return []


def extrapolate(kin: KinematicState, dt: float) -> Point:
    h = math.radians(kin.heading)
    return Point(kin.position.x + kin.speed * dt * math.cos(h), kin.position.y + kin.speed * dt * math.sin(h))


def member_tick(
    ego: KinematicState,
    now: float,
    last_leader_vam_time: float,
    leader: Optional[KinematicState],
    cfg: EtsiClusterConfig,
):
    """Returns (decision, leave reason or None).

    The leader's position is dead-reckoned from its last cluster VAM.
    """
    if now - last_leader_vam_time > cfg.time_cluster_continuity + cfg.leader_loss_grace:
        return MemberDecision.LEAVE_TO_STANDALONE, LeaveReason.LEADER_LOST
    if leader is not None:
        where = extrapolate(leader, now - last_leader_vam_time)
        if distance(ego.position, where) > cfg.join_distance:
            return MemberDecision.LEAVE_TO_STANDALONE, LeaveReason.OUT_OF_RANGE
        if not speeds_homogeneous(ego.speed, leader.speed, cfg.speed_homogeneity):
            return MemberDecision.LEAVE_TO_STANDALONE, LeaveReason.OUT_OF_RANGE
    return MemberDecision.STAY, None


def break_up(rt: EtsiClusterRuntime, shape: CoverageOffer) -> EtsiClusterContainer:
    return EtsiClusterContainer(
        cluster_id=rt.cluster_id,
        shape=shape,
        operation=ClusterOp.BREAK_UP,
        member_list=tuple(sorted(rt.members)),
    )


@dataclass
class _Membership:
    cluster_id: int
    leader: StationId
    last_leader_vam_time: float
    leader_kin: KinematicState


@dataclass
class _JoinAttempt:
    cluster_id: int
    leader: StationId
    first_request: float
    last_request: float
    attempts: int = 1


class EtsiStation(VbsStation):
    scheme = "etsiCluster"
    start_label = "1"

    def __init__(self, sid, host, trigger_cfg, cfg: EtsiClusterConfig = EtsiClusterConfig(), **kw):
        super().__init__(sid, host, trigger_cfg, **kw)
        self.cfg = cfg
        self.runtime: Optional[EtsiClusterRuntime] = None
        self.membership: Optional[_Membership] = None
        self.joining: Optional[_JoinAttempt] = None
        self.refused: dict = {}  # cluster id -> time until which it is not re-tried
        self.break_up_requested = False

    def stop_label(self) -> str:
        return "2"

    def deactivate(self):
        if self.mode is Mode.ACTIVE_CLUSTER_LEADER:
            # a leaving leader breaks the cluster up
            self._break_up()
        elif self.mode is Mode.PASSIVE:
            self._leave(LeaveReason.ROLE_CHANGE)
        super().deactivate()

    def _shape(self) -> CoverageOffer:
        return CoverageOffer(self.kin().position, self.cfg.join_distance)

    def _container(self, op: ClusterOp, members=None, reason=None, cluster_id=None) -> EtsiClusterContainer:
        return EtsiClusterContainer(
            cluster_id=self.runtime.cluster_id if cluster_id is None else cluster_id,
            shape=self._shape(),
            operation=op,
            member_list=members,
            leave_reason=reason,
        )

    # periodic check

    def on_check(self):
        if not self.clustering:
            return VbsStation.on_check(self)
        now = self.host.now
        mode = self.mode
        if mode is Mode.ACTIVE_STANDALONE:
            self._check_join_timeout(now)
            if self.joining is None:
                neighbors = [
                    (sid, h.vam.kinematics, h.time)
                    for sid, h in self.heard.items()
                    if h.distance <= self.cfg.join_distance
                ]
                if evaluate_formation(self.kin(), neighbors, now, self.cfg) is Formation.FORM_CLUSTER:
                    self._form(now)
                    return
            if self.trigger_fired():
                self.generate()
        elif mode is Mode.ACTIVE_CLUSTER_LEADER:
            rt = self.runtime
            if self.break_up_requested or (
                not rt.members
                and not rt.pending_joins
                and now - rt.formed_at >= self.cfg.time_cluster_join_notification - EPS
            ):
                self._break_up()
                return
            if self.trigger_fired():
                self._leader_emit(now)
        elif mode is Mode.PASSIVE:
            m = self.membership
            decision, reason = member_tick(self.kin(), now, m.last_leader_vam_time, m.leader_kin, self.cfg)
            if decision is MemberDecision.LEAVE_TO_STANDALONE:
                self._leave(reason)

    def _form(self, now):
        self.runtime = EtsiClusterRuntime(
            cluster_id=self.host.next_cluster_id(), leader=self.sid, formed_at=now
        )
        self.set_mode(Mode.ACTIVE_CLUSTER_LEADER, "5")
        self.runtime.last_leader_vam_time = now
        self.generate(cluster=self._container(ClusterOp.LEAD, members=()))
        self._arm_keep_alive()

    def _arm_keep_alive(self):
        rt = self.runtime
        self.host.schedule(
            self.sid, rt.last_leader_vam_time + self.cfg.time_cluster_continuity, "keepalive", rt.last_leader_vam_time
        )

    def _leader_emit(self, now):
        """Send a cluster VAM; pending joins are folded into it as a confirmation."""
        rt = self.runtime
        op = ClusterOp.KEEP_ALIVE
        if rt.pending_joins:
            room = max(self.cfg.max_members - len(rt.members), 0)
            batch = sorted(s for s, t in rt.pending_joins.items() if t <= now + EPS)[:room]
            rt.members.update(batch)
            rt.pending_joins.clear()
            op = ClusterOp.JOIN_CONFIRM
        rt.last_leader_vam_time = now
        self.generate(cluster=self._container(op, members=tuple(sorted(rt.members))))
        if op is ClusterOp.KEEP_ALIVE:
            self.host.transition(self.sid, Mode.ACTIVE_CLUSTER_LEADER, Mode.ACTIVE_CLUSTER_LEADER, "7")
        self._arm_keep_alive()

    def _break_up(self):
        rt = self.runtime
        self.generate(cluster=break_up(rt, self._shape()))
        self.runtime = None
        self.break_up_requested = False
        self.set_mode(Mode.ACTIVE_STANDALONE, "6")

    def request_break_up(self):
        """Break up at the next check."""
        self.break_up_requested = True

    def disband(self):
        if self.mode is Mode.ACTIVE_CLUSTER_LEADER:
            self._break_up()

    def _leave(self, reason: LeaveReason):
        m = self.membership
        self.membership = None
        self.set_mode(Mode.ACTIVE_STANDALONE, "4")
        self.generate(cluster=self._container(ClusterOp.LEAVE, reason=reason, cluster_id=m.cluster_id))

    def _check_join_timeout(self, now):
        j = self.joining
        if j is None:
            return
        deadline = j.last_request + self.cfg.time_cluster_join_success + self.cfg.leader_loss_grace
        if now < deadline:
            return
        if (
            j.attempts <= self.cfg.join_retries
            and now - j.first_request < self.cfg.time_cluster_join_notification
        ):
            j.attempts += 1
            j.last_request = now
            self.generate(cluster=self._container(ClusterOp.JOIN_REQUEST, cluster_id=j.cluster_id))
        else:
            self.refused[j.cluster_id] = now + self.cfg.time_cluster_join_notification
            self.joining = None

    # reception

    def on_receive(self, vam: Vam):
        super().on_receive(vam)
        c = vam.cluster
        if c is None or self.mode is Mode.IDLE or not self.clustering:
            return
        now = self.host.now
        op = c.operation
        if op in (ClusterOp.LEAD, ClusterOp.KEEP_ALIVE, ClusterOp.JOIN_CONFIRM):
            self._on_leader_vam(vam, now)
        elif op is ClusterOp.BREAK_UP:
            if self.membership is not None and self.membership.cluster_id == c.cluster_id:
                self.membership = None
                self.set_mode(Mode.ACTIVE_STANDALONE, "4")
            if self.joining is not None and self.joining.cluster_id == c.cluster_id:
                self.joining = None
        elif self.runtime is not None and c.cluster_id == self.runtime.cluster_id:
            rt = self.runtime
            if op is ClusterOp.JOIN_REQUEST and vam.sender not in rt.members:
                if len(rt.members) + len(rt.pending_joins) < self.cfg.max_members:
                    first = vam.sender not in rt.pending_joins
                    rt.pending_joins.setdefault(vam.sender, now)
                    if first:
                        self.host.schedule(
                            self.sid, now + self.cfg.time_cluster_join_success, "confirm", rt.cluster_id
                        )
            elif op is ClusterOp.LEAVE:
                rt.members.discard(vam.sender)
                rt.pending_joins.pop(vam.sender, None)

    def _on_leader_vam(self, vam: Vam, now):
        c = vam.cluster
        listed = c.member_list is not None and self.sid in c.member_list
        m = self.membership
        if m is not None:
            if m.cluster_id == c.cluster_id:
                if c.member_list is not None and not listed:
                    # leader dropped us without a break-up
                    self.membership = None
                    self.set_mode(Mode.ACTIVE_STANDALONE, "4")
                    return
                m.last_leader_vam_time = vam.generation_time
                m.leader_kin = vam.kinematics
            return
        if self.mode is not Mode.ACTIVE_STANDALONE:
            return
        j = self.joining
        if j is not None:
            if j.cluster_id == c.cluster_id and listed:
                self.joining = None
                self.membership = _Membership(c.cluster_id, vam.sender, vam.generation_time, vam.kinematics)
                self.set_mode(Mode.PASSIVE, "3")
            return
        if self.refused.get(c.cluster_id, float("-inf")) > now:
            return
        if evaluate_join(self.kin(), vam, self.cfg) is JoinDecision.SEND_JOIN_REQUEST:
            self.joining = _JoinAttempt(c.cluster_id, vam.sender, now, now)
            self.generate(cluster=self._container(ClusterOp.JOIN_REQUEST, cluster_id=c.cluster_id))

    # timers

    def on_timer(self, kind: str, token):
        rt = self.runtime
        if rt is None or self.mode is not Mode.ACTIVE_CLUSTER_LEADER:
            return
        now = self.host.now
        if kind == "keepalive" and token == rt.last_leader_vam_time:
            self._leader_emit(now)
        elif kind == "confirm" and token == rt.cluster_id and rt.pending_joins:
            if leader_tick(rt, now, self.cfg):
                self._leader_emit(now)
