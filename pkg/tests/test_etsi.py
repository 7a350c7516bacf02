import pytest

from vamsim.core import ClusterOp, EtsiClusterContainer, CoverageOffer, KinematicState, LeaveReason, Mode, Point, Vam
from vamsim.engine import Simulator, accounting_scenario
from vamsim.etsi import (
    EtsiClusterConfig,
    EtsiClusterRuntime,
    EtsiStation,
    Formation,
    JoinDecision,
    MemberDecision,
    evaluate_formation,
    evaluate_join,
    leader_tick,
    member_tick,
)
from vamsim.triggers import TriggerConfig

CFG = EtsiClusterConfig()


def kin(x, speed=1.0, y=0.0):
    return KinematicState(Point(x, y), speed, 0.0)


def cluster_vam(sender, x, op=ClusterOp.LEAD, members=(), cid=1, speed=1.0, t=0.0):
    c = EtsiClusterContainer(cid, CoverageOffer(Point(x, 0.0), 5.0), op, member_list=tuple(members))
    return Vam(sender, t, kin(x, speed), cluster=c)


def test_formation_needs_three_close_neighbours():
    near = [(i, kin(1.0 + i), 0.0) for i in range(3)]
    assert evaluate_formation(kin(0.0), near, 0.5, CFG) is Formation.FORM_CLUSTER
    assert evaluate_formation(kin(0.0), [], 0.5, CFG) is Formation.STAY
    far = [(i, kin(8.0, y=i), 0.0) for i in range(5)]
    assert evaluate_formation(kin(0.0), far, 0.5, CFG) is Formation.STAY
    # stale neighbours do not count
    assert evaluate_formation(kin(0.0), near, 3.0, CFG) is Formation.STAY


def test_join_conditions():
    assert evaluate_join(kin(0.0), cluster_vam(1, 3.0), CFG) is JoinDecision.SEND_JOIN_REQUEST
    assert evaluate_join(kin(0.0), cluster_vam(1, 6.0), CFG) is JoinDecision.IGNORE
    assert evaluate_join(kin(0.0, speed=1.2), cluster_vam(1, 3.0), CFG) is JoinDecision.IGNORE
    full = cluster_vam(1, 3.0, members=range(100, 120))
    assert evaluate_join(kin(0.0), full, CFG) is JoinDecision.IGNORE
    assert evaluate_join(kin(0.0), Vam(1, 0.0, kin(3.0)), CFG) is JoinDecision.IGNORE


def test_leader_keep_alive_after_continuity():
    rt = EtsiClusterRuntime(1, 0, last_leader_vam_time=0.0)
    assert leader_tick(rt, 1.9, CFG) == []
    assert leader_tick(rt, 2.0, CFG) == [(ClusterOp.KEEP_ALIVE, ())]


def test_joins_in_one_window_get_one_confirmation():
    rt = EtsiClusterRuntime(1, 0, last_leader_vam_time=0.0)
    for i in range(5):
        rt.pending_joins[10 + i] = 0.1 + 0.08 * i
    assert leader_tick(rt, 0.5, CFG) == []
    assert leader_tick(rt, 0.6, CFG) == [(ClusterOp.JOIN_CONFIRM, (10, 11, 12, 13, 14))]


def test_joins_spread_out_get_separate_confirmations(host):
    host.place(0, 0.0)
    s = EtsiStation(0, host, TriggerConfig(), CFG)
    s.activate()
    s._form(0.0)
    confirms = []
    for i in range(5):
        host.now = 0.5 * i
        host.place(10 + i, 1.0)
        s.on_receive(Vam(10 + i, host.now, kin(1.0), cluster=EtsiClusterContainer(
            s.runtime.cluster_id, CoverageOffer(Point(1, 0), 5), ClusterOp.JOIN_REQUEST)))
        host.now += CFG.time_cluster_join_success
        s.on_timer("confirm", s.runtime.cluster_id)
        confirms += [v for v in host.sent if v.cluster.operation is ClusterOp.JOIN_CONFIRM and v not in confirms]
    assert 1 <= len(confirms) <= 5
    assert s.runtime.members == {10, 11, 12, 13, 14}


def test_member_tick():
    assert member_tick(kin(0.0), 1.9, 0.0, kin(2.0), CFG) == (MemberDecision.STAY, None)
    assert member_tick(kin(0.0), 2.1, 0.0, kin(2.0), CFG) == (MemberDecision.LEAVE_TO_STANDALONE, LeaveReason.LEADER_LOST)
    # the leader walked away at 6 m
    assert member_tick(kin(0.0), 1.0, 0.0, kin(5.0), CFG)[1] is LeaveReason.OUT_OF_RANGE


def test_config_invariants():
    with pytest.raises(ValueError):
        EtsiClusterConfig(min_neighbors_to_form=0)
    with pytest.raises(ValueError):
        EtsiClusterConfig(time_cluster_join_success=3.0)


# transition labels, one station at a time


def station(host, sid=5, x=0.0):
    host.place(sid, x, speed=1.0)
    s = EtsiStation(sid, host, TriggerConfig(), CFG)
    s.activate()
    return s


def test_1_and_2(host):
    s = station(host)
    s.deactivate()
    assert host.labels() == ["1", "2"]


def test_5_and_7_form_and_keep_alive(host):
    s = station(host)
    for i in range(3):
        s.on_receive(Vam(10 + i, 0.0, kin(1.0 + i)))
    host.now = 0.1
    s.on_check()
    assert host.labels()[-1] == "5" and host.sent[-1].cluster.operation is ClusterOp.LEAD
    expiry, _, kind, token = host.timers[-1]
    assert kind == "keepalive" and expiry == pytest.approx(2.1)
    host.now = expiry
    s.on_timer(kind, token)
    assert host.labels()[-1] == "7" and host.sent[-1].cluster.operation is ClusterOp.KEEP_ALIVE


def _joined(host):
    s = station(host)
    host.now = 1.0
    s.on_receive(cluster_vam(1, 2.0, t=1.0))
    req = host.sent[-1]
    assert req.cluster.operation is ClusterOp.JOIN_REQUEST
    host.now = 1.5
    s.on_receive(cluster_vam(1, 2.5, op=ClusterOp.JOIN_CONFIRM, members=(5,), t=1.5))
    return s


def test_3_join_confirmed(host):
    s = _joined(host)
    assert host.labels()[-1] == "3" and s.mode is Mode.PASSIVE


def test_4_break_up_received(host):
    s = _joined(host)
    n = len(host.sent)
    host.now = 2.0
    s.on_receive(cluster_vam(1, 3.0, op=ClusterOp.BREAK_UP, members=(5,), t=2.0))
    assert host.labels()[-1] == "4" and s.mode is Mode.ACTIVE_STANDALONE
    assert len(host.sent) == n


def test_4_missed_break_up_leaves_after_continuity(host):
    s = _joined(host)
    host.now = 3.5
    s.on_check()
    assert s.mode is Mode.PASSIVE
    host.now = 3.6
    s.on_check()
    assert host.labels()[-1] == "4"
    assert host.sent[-1].cluster.leave_reason is LeaveReason.LEADER_LOST


def test_6_leader_alone_breaks_up(host):
    s = station(host)
    for i in range(3):
        s.on_receive(Vam(10 + i, 0.0, kin(1.0 + i)))
    s.on_check()
    host.now = CFG.time_cluster_join_notification
    s.on_check()
    assert host.labels()[-1] == "6" and host.sent[-1].cluster.operation is ClusterOp.BREAK_UP


def test_unanswered_join_is_retried_once_then_refused(host):
    s = station(host)
    host.now = 1.0
    s.on_receive(cluster_vam(1, 2.0, t=1.0))
    for t in (1.6, 2.2, 2.8):
        host.now = t
        s.on_check()
    ops = [v.cluster.operation for v in host.sent if v.cluster is not None]
    assert ops == [ClusterOp.JOIN_REQUEST, ClusterOp.JOIN_REQUEST]
    host.now = 3.0
    s.on_receive(cluster_vam(1, 2.0, op=ClusterOp.KEEP_ALIVE, t=3.0))
    assert len([v for v in host.sent if v.cluster is not None]) == 2


# group runs on a lossless channel


def test_lossless_break_up_frees_every_member():
    sim = Simulator(accounting_scenario("etsiCluster", disband_at=None))
    sim.run_until(20.0)
    leaders = sim.leaders()
    assert len(leaders) == 1
    members = [s.sid for s in sim.stations if s.mode is Mode.PASSIVE]
    assert len(members) == 5
    sim.at(20.05, sim.stations[leaders[0]].disband)
    sim.run_until(20.2)
    freed = {tr.station: tr.time for tr in sim.transitions if tr.label == "4" and tr.time >= 20.05}
    assert set(freed) == set(members)
    # one break-up frame, no leave messages
    assert all(t < 20.06 for t in freed.values())
    labels = {tr.label for tr in sim.transitions}
    assert {"1", "3", "4", "5", "6", "7"} <= labels
