"""IPG, IGG, awareness and message accounting over a measurement window."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy import stats

AWARENESS_WINDOW = 3.0
DISTANCE_BIN = 100.0


@dataclass(frozen=True)
class AwarenessWindow:
    seconds: float = AWARENESS_WINDOW

    def __post_init__(self):
        if not self.seconds > 0:
            raise ValueError("awareness window must be > 0")


@dataclass
class Broadcast:
    """One transmitted VAM and who decoded it."""

    time: float  # end of airtime
    sender: int
    generation_time: float
    covered: tuple = ()  # VRUs represented vicariously
    receivers: tuple = ()
    distances: tuple = ()


@dataclass
class MetricLog:
    start: float
    end: float
    vrus: tuple
    generations: dict = field(default_factory=dict)
    broadcasts: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    snapshot_positions: list = field(default_factory=list)
    _pairs: Optional[dict] = field(default=None, repr=False)

    def add_generation(self, sid: int, t: float):
        gens = self.generations.setdefault(sid, [])
        if gens and t < gens[-1]:
            raise ValueError("generation times must be non-decreasing")
        gens.append(t)
        self._pairs = None

    def add_broadcast(self, b: Broadcast):
        self.broadcasts.append(b)
        self._pairs = None

    @property
    def receptions(self) -> dict:
        """(receiver, sender) -> list of (time, distance, generation_time)."""
        if self._pairs is None:
            pairs = defaultdict(list)
            for b in self.broadcasts:
                for r, d in zip(b.receivers, b.distances):
                    pairs[(r, b.sender)].append((b.time, d, b.generation_time))
            for v in pairs.values():
                v.sort()
            self._pairs = dict(pairs)
        return self._pairs

    def generation_count(self, sid: int) -> int:
        return len(self.generations.get(sid, ()))


def _gaps(times) -> list:
    return [b - a for a, b in zip(times, times[1:])]


def compute_ipg(log: MetricLog, pair) -> list:
    rx = log.receptions.get(tuple(pair), [])
    return _gaps([t for t, _, _ in rx])


def compute_igg(log: MetricLog, station) -> list:
    return _gaps(log.generations.get(station, []))


def distance_bin(d: float, width: float = DISTANCE_BIN) -> int:
    return int(d // width)


def ipg_igg_by_bin(log: MetricLog, width: float = DISTANCE_BIN) -> dict:
    """bin -> (gaps, mean IPG, mean IGG over the same generation spans).

    Each reception gap is assigned to the bin of its closing reception and
    is paired with the sender's generation gaps between the two received
    frames, so that losses are the only source of difference.
    """
    gens = {s: np.asarray(g) for s, g in log.generations.items()}
    acc = defaultdict(lambda: [0, 0.0, 0.0, 0])  # n, sum ipg, sum gen span, gen gaps
    for (r, s), rx in log.receptions.items():
        g = gens.get(s)
        for (t0, _, g0), (t1, d1, g1) in zip(rx, rx[1:]):
            a = acc[distance_bin(d1, width)]
            a[0] += 1
            a[1] += t1 - t0
            a[2] += g1 - g0
            if g is not None and len(g):
                inside = int(np.searchsorted(g, g1 + 1e-9) - np.searchsorted(g, g0 - 1e-9))
                a[3] += max(inside - 1, 1)
            else:
                a[3] += 1
    return {k: (v[0], v[1] / v[0], v[2] / v[3]) for k, v in sorted(acc.items())}


def mean_igg(log: MetricLog) -> float:
    gaps = [x for s in log.vrus for x in compute_igg(log, s)]
    return float(np.mean(gaps)) if gaps else math.nan


def _visible_times(log: MetricLog, vicarious: bool = True) -> dict:
    seen = defaultdict(list)
    vru = set(log.vrus)
    for b in log.broadcasts:
        if not b.receivers:
            continue
        if b.sender in vru:
            seen[b.sender].append(b.time)
        if vicarious:
            for c in b.covered:
                seen[c].append(b.time)
    return {k: np.sort(np.asarray(v)) for k, v in seen.items()}


def compute_awareness(
    log: MetricLog, evaluation_times: Iterable[float], window: float = AWARENESS_WINDOW, vicarious: bool = True
) -> list:
    """Fraction of VRUs whose last successful broadcast, direct or
    vicarious, is less than ``window`` seconds old."""
    if not window > 0:
        raise ValueError("window must be > 0")
    n = len(log.vrus)
    if n < 1:
        raise ValueError("no VRUs to evaluate")
    seen = _visible_times(log, vicarious)
    out = []
    for t in evaluation_times:
        visible = 0
        for v in log.vrus:
            ts = seen.get(v)
            if ts is None:
                continue
            i = int(np.searchsorted(ts, t, side="right")) - 1
            if i >= 0 and t - ts[i] < window:
                visible += 1
        out.append(visible / n)
    return out


def per_receiver_awareness(log: MetricLog, window: float = AWARENESS_WINDOW, radius: float = DISTANCE_BIN) -> list:
    """Secondary series: at each snapshot, the mean over VRU receivers of the
    fraction of VRUs within ``radius`` they heard of inside the window."""
    vrus = list(log.vrus)
    index = {v: i for i, v in enumerate(vrus)}
    heard = defaultdict(list)  # receiver -> [(time, represented ids)]
    for b in log.broadcasts:
        rep = ([b.sender] if b.sender in index else []) + list(b.covered)
        if not rep:
            continue
        for r in b.receivers:
            if r in index:
                heard[r].append((b.time, rep))
    out = []
    for t, pos in zip(log.snapshot_times, log.snapshot_positions):
        fractions = []
        for r in vrus:
            pr = pos[index[r]]
            d = np.hypot(pos[:, 0] - pr[0], pos[:, 1] - pr[1])
            near = {vrus[i] for i in np.flatnonzero(d <= radius) if vrus[i] != r}
            if not near:
                continue
            known = set()
            for ht, rep in heard.get(r, ()):
                if ht <= t and t - ht < window:
                    known.update(rep)
            fractions.append(len(near & known) / len(near))
        out.append(float(np.mean(fractions)) if fractions else math.nan)
    return out


def account_messages(
    scheme: str, duration: float = 30.0, leader_igg: float = 3.0, n_members: int = 5, confirm_batches: int = 1
) -> int:
    """Messages a group of ``n_members`` + 1 VRUs spends over ``duration``
    seconds, counting every message as delivered."""
    if not 1 <= confirm_batches <= max(n_members, 1):
        raise ValueError("confirm_batches must lie in [1, n_members]")
    per_node = int(round(duration / leader_igg))
    if scheme == "standalone":
        return per_node * (n_members + 1)
    if scheme == "implicitCluster":
        return per_node
    if scheme == "etsiCluster":
        # offer + join requests + confirmations + cluster VAMs + break-up
        return 1 + n_members + confirm_batches + per_node + 1
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True)
class Summary:
    mean: float
    half_width: Optional[float]
    n: int

    @property
    def interval(self):
        if self.half_width is None:
            return None
        return (self.mean - self.half_width, self.mean + self.half_width)

    def __str__(self):
        if self.half_width is None:
            return f"{self.mean:.4f} (n={self.n}, CI n/a)"
        return f"{self.mean:.4f} ± {self.half_width:.4f} (n={self.n})"


def summarize(values, confidence: float = 0.95) -> Summary:
    x = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if len(x) == 0:
        return Summary(math.nan, None, 0)
    if len(x) == 1:
        return Summary(float(x[0]), None, 1)
    sem = x.std(ddof=1) / math.sqrt(len(x))
    return Summary(float(x.mean()), float(stats.t.ppf(0.5 + confidence / 2, len(x) - 1) * sem), len(x))


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6f}"
    return str(v)


def write_rows(path, rows: Iterable):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["scheme", "repetition", "key", "value"])
        for scheme, rep, key, value in rows:
            w.writerow([scheme, rep, _fmt(key), _fmt(value)])


def metric_rows(scheme: str, repetition: int, log: MetricLog, eval_step: float = 1.0) -> dict:
    """CSV rows per output file for one repetition."""
    gens = [(scheme, repetition, s, log.generation_count(s)) for s in log.vrus]
    ipg = [
        (scheme, repetition, f"{int(b * DISTANCE_BIN)}-{int((b + 1) * DISTANCE_BIN)}", m_ipg)
        for b, (_, m_ipg, _) in ipg_igg_by_bin(log).items()
    ]
    igg = []
    for s in log.vrus:
        g = compute_igg(log, s)
        if g:
            igg.append((scheme, repetition, s, float(np.mean(g))))
    times = evaluation_times(log, eval_step)
    aw = [(scheme, repetition, round(t, 6), a) for t, a in zip(times, compute_awareness(log, times))]
    return {"generations.csv": gens, "ipg.csv": ipg, "igg.csv": igg, "awareness.csv": aw}


def evaluation_times(log: MetricLog, step: float = 1.0, window: float = AWARENESS_WINDOW) -> list:
    """Instants whose trailing window lies inside the measurement window."""
    first = log.start + window
    n = int(math.floor((log.end - first) / step + 1e-9)) + 1
    return [first + i * step for i in range(max(n, 0))]
