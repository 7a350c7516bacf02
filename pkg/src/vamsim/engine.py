"""Discrete-event simulation binding mobility, VBS stations and the channel.

Stations 0..P-1 are pedestrians running the configured scheme; the rest are
vehicles that only emit CAMs. Each station draws from its own generator
keyed by (run seed, station, purpose), and mobility depends on the seed
alone, so every scheme sees the same traces for a given seed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Channel, TransmissionEvent
from .config import ScenarioConfig
from .core import ClusterOp, Mode, Vam, within_coverage
from .etsi import EtsiStation
from .events import EventKind, EventQueue
from .implicit import ImplicitStation
from .metrics import Broadcast, MetricLog, evaluation_times
from .mobility import (
    VehicleTraffic,
    place_pedestrians,
    place_platoon,
    place_vehicles,
    simulate_crowd,
)
from .station import StandaloneStation

# generator purposes
PLACEMENT, ACTIVATION, HOLDOFF, BACKOFF, VEHICLES = range(5)
# placement is not tied to a station
SHARED = 2**31 - 1

CAM = "CAM"


def run_seed(seed: int, repetition: int) -> int:
    return seed ^ repetition


def station_rng(seed: int, station: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([seed, station, purpose])


@dataclass
class Transition:
    time: float
    station: int
    old: Mode
    new: Mode
    label: str


@dataclass
class RunResult:
    config: ScenarioConfig
    repetition: int
    log: MetricLog
    transitions: list
    mobility_digest: str
    transmissions: int
    events: int = 0
    trace_digest: str = ""


class Simulator:
    def __init__(self, cfg: ScenarioConfig, repetition: int = 0):
        self.cfg = cfg
        self.repetition = repetition
        self.seed = run_seed(cfg.seed, repetition)
        self.queue = EventQueue()
        self._build_mobility()
        self._build_stations()
        self.log = MetricLog(cfg.warmup_seconds, cfg.duration, tuple(range(self.n_peds)))
        self.transitions: list = []
        self._cluster_ids = 0
        self._positions_cache = (None, None)
        self._trace = hashlib.sha256()
        self.generated = [0] * self.n_peds
        self.events = 0

        tx_power = np.concatenate(
            [np.full(self.n_peds, cfg.phy.tx_power_pedestrian_w), np.full(self.n_veh, cfg.phy.tx_power_vehicle_w)]
        )
        heights = np.concatenate(
            [np.full(self.n_peds, cfg.phy.antenna_height_pedestrian), np.full(self.n_veh, cfg.phy.antenna_height_vehicle)]
        )
        self.channel = Channel(
            self.queue,
            self.positions,
            tx_power,
            heights,
            [station_rng(self.seed, i, BACKOFF) for i in range(self.n_peds + self.n_veh)],
            cfg.phy,
            cfg.mac,
            lossless=cfg.lossless,
            on_delivery=self._deliver,
        )
        self._schedule_initial()

    # setup

    def _build_mobility(self):
        cfg = self.cfg
        rng = station_rng(self.seed, SHARED, PLACEMENT)
        if cfg.layout == "platoon":
            specs = place_platoon(cfg.pedestrian_count, cfg.pedestrian_speed)
            length = max(cfg.segment_length, cfg.pedestrian_speed * (cfg.duration + 1) + 20.0)
        else:
            specs = place_pedestrians(cfg.segment_length, cfg.pedestrian_density, rng, cfg.pedestrian_speed, cfg.speed_spread)
            length = cfg.segment_length
        self.traj = simulate_crowd(specs, length, cfg.duration + 1.0)
        self.n_peds = len(specs)
        vrng = station_rng(self.seed, SHARED, VEHICLES)
        vspecs = place_vehicles(cfg.segment_length, cfg.vehicle_density, cfg.lanes, vrng, cfg.vehicle_speed, cfg.cam_rate_hz)
        self.traffic = VehicleTraffic(vspecs, cfg.segment_length, max(cfg.lanes, 1))
        self.n_veh = len(vspecs)
        self._veh_phase = vrng.uniform(0.0, 1.0 / cfg.cam_rate_hz, self.n_veh) if self.n_veh else np.zeros(0)

    def _build_stations(self):
        cfg = self.cfg
        kw = dict(base_bytes=cfg.base_vam_bytes, cluster_bytes=cfg.cluster_vam_bytes)
        self.stations = []
        for i in range(self.n_peds):
            if cfg.scheme == "standalone":
                st = StandaloneStation(i, self, cfg.trigger, **kw)
            elif cfg.scheme == "implicitCluster":
                st = ImplicitStation(i, self, cfg.trigger, cfg.implicit, rng=station_rng(self.seed, i, HOLDOFF), **kw)
            else:
                st = EtsiStation(i, self, cfg.trigger, cfg.etsi, **kw)
            st.clustering = cfg.clustering_start <= 0.0
            self.stations.append(st)
        self.activation = np.array(
            [station_rng(self.seed, i, ACTIVATION).uniform(0.0, 1.0) for i in range(self.n_peds)]
        )

    def _schedule_initial(self):
        q = self.queue
        cfg = self.cfg
        if cfg.clustering_start > 0.0:
            q.schedule(cfg.clustering_start, EventKind.CALL, ("clustering",))
        if cfg.disband_at is not None:
            q.schedule(cfg.disband_at, EventKind.CALL, ("disband",))
        for i in range(self.n_peds):
            q.schedule(float(self.activation[i]), EventKind.TRIGGER_CHECK, (i, 0))
        for v in range(self.n_veh):
            q.schedule(float(self._veh_phase[v]), EventKind.CALL, ("cam", v, 0))

    # host interface used by the stations

    @property
    def now(self) -> float:
        return self.queue.now

    def kinematics(self, sid: int):
        return self.traj.kinematics(sid, self.queue.now)

    def send(self, sid: int, vam: Vam):
        t = self.queue.now
        if self.cfg.warmup_seconds <= t < self.cfg.duration:
            self.log.add_generation(sid, t)
            self.generated[sid] += 1
        self._trace.update(f"g{sid}:{t:.9f}:{vam.size_bytes}".encode())
        self.channel.enqueue(sid, vam, vam.size_bytes)

    def schedule(self, sid: int, time: float, kind: str, token):
        self.queue.schedule(max(time, self.queue.now), EventKind.TIMER_EXPIRY, (sid, kind, token))

    def transition(self, sid: int, old: Mode, new: Mode, label):
        if label is not None:
            self.transitions.append(Transition(self.queue.now, sid, old, new, label))

    def next_cluster_id(self) -> int:
        self._cluster_ids += 1
        return self._cluster_ids

    # positions

    def positions(self, t: float) -> np.ndarray:
        if self._positions_cache[0] == t:
            return self._positions_cache[1]
        ped = self.traj.positions(t)
        pos = np.vstack([ped, self.traffic.positions(t)]) if self.n_veh else ped
        self._positions_cache = (t, pos)
        return pos

    # event handling

    def _on_check(self, sid: int, k: int):
        st = self.stations[sid]
        if k == 0:
            st.activate()
            # the first VAM goes out on activation
        st.on_check()
        nxt = self.activation[sid] + (k + 1) * self.cfg.trigger.check_interval
        if nxt <= self.cfg.duration:
            self.queue.schedule(float(nxt), EventKind.TRIGGER_CHECK, (sid, k + 1))

    def _on_call(self, payload):
        what = payload[0]
        if what == "cam":
            _, v, k = payload
            sid = self.n_peds + v
            self.channel.enqueue(sid, CAM, self.cfg.cam_bytes)
            nxt = self._veh_phase[v] + (k + 1) / self.cfg.cam_rate_hz
            if nxt <= self.cfg.duration:
                self.queue.schedule(float(nxt), EventKind.CALL, ("cam", v, k + 1))
        elif what == "clustering":
            for st in self.stations:
                st.clustering = True
        elif what == "disband":
            self.disband_leaders()
        elif what == "fn":
            payload[1]()

    def disband_leaders(self):
        for st in self.stations:
            if hasattr(st, "disband"):
                st.disband()

    def at(self, time: float, fn):
        """Run ``fn()`` at ``time`` inside the event loop."""
        self.queue.schedule(time, EventKind.CALL, ("fn", fn))

    def _interested(self, st, vam: Vam) -> bool:
        """Whether a far receiver still has protocol state tied to the sender."""
        if isinstance(st, ImplicitStation):
            return st.member is not None and st.member.leader_id == vam.sender
        if isinstance(st, EtsiStation):
            c = vam.cluster
            if c is None:
                return False
            if st.membership is not None and st.membership.cluster_id == c.cluster_id:
                return True
            if st.runtime is not None and st.runtime.cluster_id == c.cluster_id:
                return True
            return st.joining is not None and st.joining.cluster_id == c.cluster_id
        return False

    def _covered(self, tx: TransmissionEvent, vam: Vam) -> tuple:
        if vam.coverage is not None:
            pos = self.traj.positions(tx.start_time)
            return tuple(
                i for i in range(self.n_peds) if i != vam.sender and within_coverage(pos[i], vam.coverage)
            )
        c = vam.cluster
        if c is not None and c.operation in (ClusterOp.LEAD, ClusterOp.KEEP_ALIVE, ClusterOp.JOIN_CONFIRM):
            return tuple(m for m in (c.member_list or ()) if m != vam.sender)
        return ()

    def _deliver(self, tx: TransmissionEvent, ok: np.ndarray):
        vam = tx.frame
        if vam is CAM:
            return
        now = self.queue.now
        self._trace.update(f"t{tx.sender}:{tx.start_time:.9f}:{len(ok)}".encode())
        pos = self.positions(now)
        sender_pos = pos[tx.sender]
        receivers = ok[ok < self.n_peds]
        d = np.hypot(pos[receivers, 0] - sender_pos[0], pos[receivers, 1] - sender_pos[1])
        if self.log.start <= now < self.log.end:
            self.log.add_broadcast(
                Broadcast(now, tx.sender, vam.generation_time, self._covered(tx, vam), tuple(receivers.tolist()), tuple(d.tolist()))
            )
        radius = self.cfg.handler_radius
        for r, dist in zip(receivers.tolist(), d.tolist()):
            st = self.stations[r]
            if dist <= radius or self._interested(st, vam):
                st.on_receive(vam)

    def step(self) -> bool:
        ev = self.queue.pop()
        if ev is None:
            return False
        kind = ev.kind
        if kind is EventKind.TRIGGER_CHECK:
            self._on_check(*ev.payload)
        elif kind is EventKind.TX_START or kind is EventKind.TX_END or kind is EventKind.MAC_ENQUEUE:
            self.channel.dispatch(ev)
        elif kind is EventKind.TIMER_EXPIRY:
            sid, what, token = ev.payload
            self.stations[sid].on_timer(what, token)
        elif kind is EventKind.CALL:
            self._on_call(ev.payload)
        self.events += 1
        return True

    def run_until(self, t: float):
        q = self.queue
        while (nt := q.peek_time()) is not None and nt <= t:
            self.step()

    def run(self) -> RunResult:
        self.run_until(self.cfg.duration)
        self._snapshot()
        return RunResult(
            self.cfg,
            self.repetition,
            self.log,
            self.transitions,
            self.traj.digest(),
            self.channel.n_tx,
            self.events,
            self._trace.hexdigest()[:16],
        )

    def _snapshot(self):
        log = self.log
        for t in evaluation_times(log, self.cfg.awareness_step):
            log.snapshot_times.append(t)
            log.snapshot_positions.append(self.traj.positions(t))

    def leaders(self) -> list:
        return [st.sid for st in self.stations if st.mode is Mode.ACTIVE_CLUSTER_LEADER]


def run_repetition(cfg: ScenarioConfig, repetition: int = 0) -> RunResult:
    return Simulator(cfg, repetition).run()


def run_scenario(cfg: ScenarioConfig, workers: int = 1) -> list:
    """One RunResult per repetition, in repetition order."""
    reps = range(cfg.repetitions)
    if workers > 1 and cfg.repetitions > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_repetition, [cfg] * cfg.repetitions, reps))
    return [run_repetition(cfg, r) for r in reps]


def accounting_scenario(scheme: str, **overrides) -> ScenarioConfig:
    """Six pedestrians walking together, lossless channel, 30 s window.

    The group walks at 4/3 m/s so the 4 m position rule fires exactly every
    3 s. Clustering switches on when the window opens, after a standalone
    warm-up in which everyone has heard everyone, and the cluster disbands
    just before the window closes: the break-up VAM is generated inside
    the window while its reception, and whatever members do about it, falls
    after it.
    """
    warmup = 5.0
    base = dict(
        scheme=scheme,
        layout="platoon",
        pedestrian_count=6,
        pedestrian_speed=4.0 / 3.0,
        vehicle_density=0.0,
        warmup_seconds=warmup,
        measure_seconds=30.0,
        repetitions=1,
        lossless=True,
        clustering_start=warmup,
        disband_at=warmup + 30.0 - 2e-4,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


def desk_scenario(scheme: str = "standalone", **overrides) -> ScenarioConfig:
    """200 m segment at the default density: 96 pedestrians, 12 vehicles."""
    base = dict(scheme=scheme, segment_length=200.0, warmup_seconds=20.0, measure_seconds=60.0, repetitions=1)
    base.update(overrides)
    return ScenarioConfig(**base)


def generations_per_station(result: RunResult) -> float:
    n = len(result.log.vrus)
    return sum(result.log.generation_count(s) for s in result.log.vrus) / n if n else math.nan
