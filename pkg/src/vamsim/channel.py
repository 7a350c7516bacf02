"""Lossy broadcast medium.

Reception is gated by a two-ray interference path-loss model and a
reception threshold; overlapping frames collide unless the wanted frame is
``capture_margin_db`` above every other concurrent frame at the receiver.
Access is CSMA/CA broadcast: sense, wait AIFS, and when the medium was busy
draw a random backoff of [0, CW-1] slots. There are no ACKs and no
retransmissions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .events import EventKind, EventQueue

SPEED_OF_LIGHT = 299_792_458.0
# slot boundaries computed along different paths must compare equal
TIME_EPS = 1e-12


@dataclass(frozen=True)
class PhyConfig:
    frequency_hz: float = 5.9e9
    bandwidth_hz: float = 10e6
    data_rate_bps: float = 6e6
    tx_power_pedestrian_w: float = 0.016
    tx_power_vehicle_w: float = 0.020
    antenna_height_pedestrian: float = 1.5
    antenna_height_vehicle: float = 1.5
    ground_permittivity: float = 1.02
    reception_threshold_dbm: float = -91.0  # two-ray range just above 540 m
    carrier_sense_threshold_dbm: float = -94.0
    capture_margin_db: float = 10.0
    phy_overhead_s: float = 40e-6  # preamble + signal field
    # MAC/LLC/FCS 36 B, GeoNetworking + BTP 44 B, signed security envelope 90 B
    stack_overhead_bytes: int = 170

    def __post_init__(self):
        if not self.data_rate_bps > 0:
            raise ValueError("data rate must be > 0")
        if self.stack_overhead_bytes < 0 or self.phy_overhead_s < 0:
            raise ValueError("overheads must be >= 0")
        if self.carrier_sense_threshold_dbm > self.reception_threshold_dbm:
            raise ValueError("carrier sense threshold must not exceed the reception threshold")


@dataclass(frozen=True)
class MacConfig:
    slot_time: float = 13e-6
    aifs: float = 58e-6
    contention_window: int = 15
    # stack processing before a frame reaches the MAC, drawn per frame
    handover_jitter: float = 1e-3

    def __post_init__(self):
        if min(self.slot_time, self.aifs) <= 0 or self.contention_window < 1:
            raise ValueError("MAC timings and contention window must be positive")
        if self.handover_jitter < 0:
            raise ValueError("handover jitter must be >= 0")


def watts_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w) * 1e3)


def airtime(size_bytes: int, phy: PhyConfig = PhyConfig()) -> float:
    """On-air duration of a message of ``size_bytes`` application bytes."""
    if size_bytes <= 0:
        raise ValueError("size must be > 0")
    return (size_bytes + phy.stack_overhead_bytes) * 8.0 / phy.data_rate_bps + phy.phy_overhead_s


def two_ray_gain(d, ht: float, hr: float, frequency_hz: float, permittivity: float):
    """Linear power gain of the two-ray interference model at ground distance d.

    Direct and ground-reflected rays are summed as phasors; the reflection
    coefficient follows the Fresnel equation for the given permittivity.
    """
    d = np.asarray(d, dtype=float)
    lam = SPEED_OF_LIGHT / frequency_hz
    d_los = np.sqrt(d * d + (ht - hr) ** 2)
    d_ref = np.sqrt(d * d + (ht + hr) ** 2)
    sin_t = (ht + hr) / d_ref
    cos_t = d / d_ref
    root = np.sqrt(permittivity - cos_t * cos_t)
    gamma = (sin_t - root) / (sin_t + root)
    phi = 2.0 * np.pi * (d_ref - d_los) / lam
    field_sum = 1.0 / d_los + gamma * np.exp(1j * phi) / d_ref
    return (lam / (4.0 * np.pi)) ** 2 * np.abs(field_sum) ** 2


def crossover_distance(ht: float, hr: float, frequency_hz: float) -> float:
    lam = SPEED_OF_LIGHT / frequency_hz
    return 4.0 * np.pi * ht * hr / lam


def path_loss_two_ray(tx_pos, rx_pos, tx_power_w: float, phy: PhyConfig = PhyConfig(), ht=None, hr=None) -> float:
    """Received power in dBm between two points."""
    d = math.hypot(tx_pos[0] - rx_pos[0], tx_pos[1] - rx_pos[1])
    if d == 0.0:
        raise ValueError("transmitter and receiver positions coincide")
    ht = phy.antenna_height_pedestrian if ht is None else ht
    hr = phy.antenna_height_pedestrian if hr is None else hr
    g = two_ray_gain(d, ht, hr, phy.frequency_hz, phy.ground_permittivity)
    return float(watts_to_dbm(tx_power_w * g))


def received_power_dbm(tx_pos, rx_positions, tx_power_w, heights_rx, ht, phy: PhyConfig) -> np.ndarray:
    """Vectorised received power; the transmitter itself gets +inf."""
    delta = rx_positions - np.asarray(tx_pos)
    d = np.hypot(delta[:, 0], delta[:, 1])
    with np.errstate(divide="ignore"):
        # heights only matter when they differ per receiver
        if np.all(heights_rx == heights_rx[0]):
            g = two_ray_gain(np.maximum(d, 1e-3), ht, float(heights_rx[0]), phy.frequency_hz, phy.ground_permittivity)
        else:
            g = np.array(
                [two_ray_gain(max(di, 1e-3), ht, hi, phy.frequency_hz, phy.ground_permittivity) for di, hi in zip(d, heights_rx)]
            )
        p = 10.0 * np.log10(tx_power_w * g * 1e3)
    p[d == 0.0] = np.inf
    return p


class Outcome(enum.Enum):
    OK = "ok"
    COLLIDED = "collided"
    BELOW_THRESHOLD = "belowThreshold"


@dataclass
class TransmissionEvent:
    sender: int
    start_time: float
    airtime: float
    position: tuple
    frame: object = None
    power_dbm: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.airtime > 0:
            raise ValueError("airtime must be > 0")

    @property
    def end_time(self) -> float:
        return self.start_time + self.airtime


@dataclass(frozen=True)
class ReceptionEvent:
    transmission: TransmissionEvent
    receiver: int
    outcome: Outcome
    time: float


def arbitrate(transmissions: list, receivers, phy: PhyConfig = PhyConfig()) -> list:
    """Resolve every transmission at every receiver.

    ``transmissions`` must be sorted by start time and carry ``power_dbm``
    indexed by receiver. A frame is received iff it clears the reception
    threshold, the receiver is not transmitting meanwhile, and no concurrent
    frame comes within the capture margin.
    """
    starts = [t.start_time for t in transmissions]
    if starts != sorted(starts):
        raise ValueError("transmissions must be sorted by start time")
    out = []
    for i, f in enumerate(transmissions):
        others = [g for j, g in enumerate(transmissions) if j != i and g.start_time < f.end_time and g.end_time > f.start_time]
        busy = {g.sender for g in others}
        for r in receivers:
            if r == f.sender:
                continue
            p = f.power_dbm[r]
            if p < phy.reception_threshold_dbm:
                outcome = Outcome.BELOW_THRESHOLD
            elif r in busy or any(p - g.power_dbm[r] < phy.capture_margin_db for g in others):
                outcome = Outcome.COLLIDED
            else:
                outcome = Outcome.OK
            out.append(ReceptionEvent(f, r, outcome, f.end_time))
    return out


def csma_start(now: float, busy_until: Optional[float], mac: MacConfig, backoff_slots: int = 0) -> float:
    """Earliest start under CSMA: AIFS on a medium idle for at least AIFS,
    else AIFS after the medium frees up plus the drawn backoff."""
    if busy_until is None or busy_until <= now - mac.aifs:
        return now + mac.aifs
    return busy_until + mac.aifs + backoff_slots * mac.slot_time


class Channel:
    """Shared medium driven by an EventQueue.

    ``locate(t)`` returns an (N, 2) array of all station positions. Stations
    hand frames to ``enqueue``; delivered frames are reported through
    ``on_delivery(tx, ok_receivers, distances)``.
    """

    def __init__(
        self,
        queue: EventQueue,
        locate,
        tx_power_w: np.ndarray,
        heights: np.ndarray,
        rngs,
        phy: PhyConfig = PhyConfig(),
        mac: MacConfig = MacConfig(),
        lossless: bool = False,
        on_delivery=None,
        on_reception_log=None,
    ):
        self.queue = queue
        self.locate = locate
        self.tx_power_w = np.asarray(tx_power_w, dtype=float)
        self.heights = np.asarray(heights, dtype=float)
        self.rngs = rngs
        self.phy = phy
        self.mac = mac
        self.lossless = lossless
        self.on_delivery = on_delivery
        self.on_reception_log = on_reception_log
        n = len(self.tx_power_w)
        self.n = n
        self.queues = [[] for _ in range(n)]
        self.busy = [False] * n  # contending or on air
        self.active: list = []  # transmissions not yet ended
        self.recent: list = []  # ended transmissions that may still overlap
        self.transmitting_until = np.full(n, -np.inf)
        self.suppressed: dict = {}
        self.cs_threshold = phy.carrier_sense_threshold_dbm
        self.rx_threshold = phy.reception_threshold_dbm
        self.max_airtime = 0.0
        self.n_tx = 0

    # access

    def enqueue(self, sid: int, frame, size_bytes: int):
        now = self.queue.now
        if sid in self.suppressed and now >= self.suppressed[sid]:
            return
        if self.mac.handover_jitter > 0:
            delay = float(self.rngs[sid].uniform(0.0, self.mac.handover_jitter))
            self.queue.schedule(now + delay, EventKind.MAC_ENQUEUE, (sid, frame, size_bytes))
        else:
            self._mac_enqueue(sid, frame, size_bytes)

    def _mac_enqueue(self, sid: int, frame, size_bytes: int):
        now = self.queue.now
        self.queues[sid].append((frame, size_bytes))
        if not self.busy[sid]:
            self._contend(sid, now, fresh=True)

    def _sensed_busy_until(self, sid: int, now: float, recent: bool = False) -> Optional[float]:
        """End of the latest frame ``sid`` senses at ``now``; with ``recent``
        also frames that ended less than AIFS ago."""
        until = None
        delay = self.mac.slot_time
        frames = self.active + self.recent if recent else self.active
        horizon = now - self.mac.aifs + TIME_EPS if recent else now - TIME_EPS
        for tx in frames:
            if tx.start_time + delay <= now + TIME_EPS and tx.end_time > horizon and (
                tx.sender == sid or tx.power_dbm[sid] >= self.cs_threshold
            ):
                if until is None or tx.end_time > until:
                    until = tx.end_time
        return until

    def _contend(self, sid: int, now: float, fresh: bool):
        # immediate access only after the medium has been idle for AIFS
        busy = self._sensed_busy_until(sid, now, recent=fresh)
        if busy is None:
            start = csma_start(now, None, self.mac) if fresh else now
        else:
            k = int(self.rngs[sid].integers(0, self.mac.contention_window))
            start = csma_start(now, busy, self.mac, k)
        self.busy[sid] = True
        self.queue.schedule(start, EventKind.TX_START, sid)

    def on_tx_start(self, sid: int):
        now = self.queue.now
        if self._sensed_busy_until(sid, now) is not None:
            self._contend(sid, now, fresh=False)
            return
        frame, size = self.queues[sid].pop(0)
        pos = self.locate(now)
        power = received_power_dbm(
            pos[sid], pos, self.tx_power_w[sid], self.heights, float(self.heights[sid]), self.phy
        )
        tx = TransmissionEvent(sid, now, airtime(size, self.phy), tuple(pos[sid]), frame, power)
        self.max_airtime = max(self.max_airtime, tx.airtime)
        self.active.append(tx)
        self.transmitting_until[sid] = tx.end_time
        self.n_tx += 1
        self.queue.schedule(tx.end_time, EventKind.TX_END, tx)

    def on_tx_end(self, tx: TransmissionEvent):
        now = self.queue.now
        self.active.remove(tx)
        horizon = now - 2.0 * self.max_airtime
        self.recent = [r for r in self.recent if r.end_time > horizon]
        overlapping = [
            g for g in self.recent + self.active if g.start_time < tx.end_time and g.end_time > tx.start_time
        ]
        self.recent.append(tx)

        p = tx.power_dbm
        if self.lossless:
            ok = np.ones(self.n, dtype=bool)
            ok[tx.sender] = False
            outcome = np.where(ok, 0, 0)
        else:
            audible = p >= self.rx_threshold
            ok = audible.copy()
            for g in overlapping:
                ok &= p - g.power_dbm >= self.phy.capture_margin_db
                ok[g.sender] = False
            ok[tx.sender] = False
            # 0 ok, 1 collided, 2 below threshold
            outcome = np.where(ok, 0, np.where(audible, 1, 2))
            outcome[tx.sender] = -1
        if self.on_reception_log is not None:
            self.on_reception_log(tx, outcome)
        if self.on_delivery is not None:
            self.on_delivery(tx, np.flatnonzero(ok))

        sid = tx.sender
        self.busy[sid] = False
        if self.queues[sid]:
            self._contend(sid, now, fresh=True)

    def suppress(self, sid: int, from_time: float):
        self.suppressed[sid] = from_time

    def dispatch(self, ev) -> bool:
        if ev.kind is EventKind.TX_START:
            self.on_tx_start(ev.payload)
        elif ev.kind is EventKind.TX_END:
            self.on_tx_end(ev.payload)
        elif ev.kind is EventKind.MAC_ENQUEUE:
            self._mac_enqueue(*ev.payload)
        else:
            return False
        return True


# Analytical PDR
#
# Contention is modelled as an embedded Markov chain over the number of
# stations holding a frame at the end of each busy period. Frames arriving
# while the medium is busy, or within AIFS after it frees up, back off:
# they draw a uniform slot in [0, CW-1] counted from AIFS after the busy
# end, and redraw every round they lose. A frame arriving on a medium idle
# for AIFS starts AIFS later, which puts it at a continuous offset on the
# same slot axis, never earlier than AIFS/slot. Every start within one slot
# of the first start of a round is undetectable and collides with it.
# Capture is not modelled, so the model is the collision-only PDR of a
# fully connected broadcast group.


def _binomial_rows(xmax: int, p: float) -> np.ndarray:
    """B[x, j] = P(Binomial(x, p) = j)."""
    x = np.arange(xmax + 1)
    X, J = x[:, None], x[None, :]
    if p >= 1.0:
        return (J == X).astype(float)
    lf = gammaln(x + 1)
    ok = J <= X
    with np.errstate(invalid="ignore"):
        lg = lf[:, None] - lf[None, :] - lf[np.where(ok, X - J, 0)] + J * np.log(p) + (X - J) * np.log1p(-p)
    return np.where(ok, np.exp(np.where(ok, lg, -np.inf)), 0.0)


def _arrival_matrix(xmax: int, mean: float) -> np.ndarray:
    """T[r, y] = P(r stations left over plus Poisson arrivals make y)."""
    pmf = poisson.pmf(np.arange(xmax + 1), mean)
    r, y = np.arange(xmax + 1)[:, None], np.arange(xmax + 1)[None, :]
    return np.where(y >= r, pmf[np.clip(y - r, 0, xmax)], 0.0)


def _remaining(leave: np.ndarray) -> np.ndarray:
    """leave[x, j] (j of x transmit) -> R[x, r] with r = x - j left over."""
    n = leave.shape[0]
    x, r = np.arange(n)[:, None], np.arange(n)[None, :]
    j = x - r
    return np.where(j >= 0, leave[x, np.clip(j, 0, n - 1)], 0.0)


def analytical_pdr(
    n_stations: int,
    msg_rate_hz: float,
    frame_airtime: float,
    mac: MacConfig = MacConfig(),
    backlog_limit: int = 200,
) -> float:
    """Fraction of broadcast frames received, for ``n_stations`` that all
    hear each other and each send Poisson traffic at ``msg_rate_hz``."""
    if n_stations < 1:
        raise ValueError("need at least one station")
    if msg_rate_hz < 0 or frame_airtime <= 0:
        raise ValueError("rate must be >= 0 and airtime > 0")
    if n_stations == 1 or msg_rate_hz == 0:
        return 1.0
    W = mac.contention_window
    sigma = mac.slot_time
    xmax = backlog_limit
    x = np.arange(xmax + 1)
    lam = n_stations * msg_rate_hz
    # earliest slot position of a fresh start
    first_fresh = mac.aifs / sigma
    # fresh starts from the other stations per unit of slot axis
    mu = (n_stations - 1) * msg_rate_hz * sigma

    def fresh_mass(a: float, b: float) -> float:
        return mu * max(0.0, b - max(a, first_fresh))

    reach = np.ones(xmax + 1)  # P(round not opened before slot s)
    alone = np.zeros(xmax + 1)
    sent = np.zeros(xmax + 1)
    P = np.zeros((xmax + 1, xmax + 1))
    late_fresh = max(first_fresh - 1.0, 0.0)
    for s in range(W):
        b = _binomial_rows(xmax, 1.0 / (W - s))
        m_here = fresh_mass(s, s + 1)
        q_here = math.exp(-m_here)
        # a backlogged station opens the round at slot s
        alone += reach * b[:, 1] * q_here
        sent += reach * (x / (W - s) + (1.0 - b[:, 0]) * m_here)
        leave = np.zeros((xmax + 1, xmax + 1))
        leave[:, 1:] = reach[:, None] * b[:, 1:]
        # fresh frames arriving before the opening that would start later
        carry = frame_airtime + sigma * min(float(s), late_fresh)
        P += _remaining(leave) @ _arrival_matrix(xmax, lam * carry)
        if s < W - 1 and m_here > 0:
            # a fresh arrival opens it between slot s and s+1; slot s+1 cannot hear it
            nb = _binomial_rows(xmax, 1.0 / (W - s - 1))
            w = reach * b[:, 0] * (1.0 - q_here)
            alone += w * math.exp(-mu) * nb[:, 0]
            sent += w * (1.0 + mu + x / (W - s - 1))
            leave = w[:, None] * nb
            P += _remaining(leave) @ _arrival_matrix(xmax, lam * (frame_airtime + sigma * late_fresh))
        reach = reach * b[:, 0] * q_here
    # empty backlog: a fresh arrival opens the round
    q = math.exp(-mu)
    alone[0], sent[0] = q, 1.0 + mu
    P[0] = _arrival_matrix(xmax, lam * (frame_airtime + sigma * late_fresh))[0]
    # frames arriving within AIFS of the busy end join the round's backlog
    P = _arrival_matrix(xmax, lam * mac.aifs) @ P
    P /= P.sum(axis=1, keepdims=True)
    A = P.T - np.eye(xmax + 1)
    A[-1] = 1.0
    rhs = np.zeros(xmax + 1)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    # per-round success and attempts are defined on the round's backlog
    pi_round = pi @ _arrival_matrix(xmax, lam * mac.aifs)
    return float(np.clip(pi_round @ alone / (pi_round @ sent), 0.0, 1.0))


def clustered_senders(n_stations: int, cluster_size: int) -> int:
    if cluster_size < 1:
        raise ValueError("cluster size must be >= 1")
    return math.ceil(n_stations / cluster_size)


def simulate_pdr(
    n_stations: int,
    msg_rate_hz: float,
    size_bytes: int,
    duration: float = 5.0,
    seed: int = 0,
    segment_length: float = 50.0,
    phy: PhyConfig = PhyConfig(),
    mac: MacConfig = MacConfig(),
    arrivals: str = "poisson",
) -> float:
    """Measured PDR of the homogeneous segment: ok receptions over in-range
    reception opportunities, pedestrians static on both sidewalks."""
    if arrivals not in ("poisson", "periodic"):
        raise ValueError(f"unknown arrival process {arrivals!r}")
    rng = np.random.default_rng([seed, n_stations])
    side = np.where(np.arange(n_stations) % 2 == 0, 6.0, -6.0)
    pos = np.column_stack(
        [rng.uniform(0.0, segment_length, n_stations), side + rng.uniform(-1.5, 1.5, n_stations)]
    )
    q = EventQueue()
    rngs = [np.random.default_rng([seed, i, 1]) for i in range(n_stations)]
    counts = [0, 0]

    def log(tx, outcome):
        audible = outcome >= 0
        audible &= outcome != 2
        counts[0] += int(np.count_nonzero(outcome == 0))
        counts[1] += int(np.count_nonzero(audible))

    ch = Channel(q, lambda t: pos, np.full(n_stations, phy.tx_power_pedestrian_w),
                 np.full(n_stations, phy.antenna_height_pedestrian), rngs, phy, mac,
                 on_reception_log=log)
    for i in range(n_stations):
        t = rng.uniform(0.0, 1.0 / msg_rate_hz)
        while t < duration:
            q.schedule(t, EventKind.CALL, i)
            t += rng.exponential(1.0 / msg_rate_hz) if arrivals == "poisson" else 1.0 / msg_rate_hz
    while (ev := q.pop()) is not None:
        if ev.kind is EventKind.CALL:
            ch.enqueue(ev.payload, None, size_bytes)
        else:
            ch.dispatch(ev)
    return counts[0] / counts[1] if counts[1] else 1.0
