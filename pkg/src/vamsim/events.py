"""Deterministic discrete-event queue."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Any


class EventKind(enum.Enum):
    MOBILITY_TICK = "mobilityTick"
    TRIGGER_CHECK = "triggerCheck"
    HOLDOFF_EXPIRY = "holdoffExpiry"
    TIMER_EXPIRY = "timerExpiry"
    TX_START = "txStart"
    TX_END = "txEnd"
    RX_DELIVER = "rxDeliver"
    MAC_ENQUEUE = "macEnqueue"
    CALL = "call"


@dataclass(order=True, frozen=True)
class Event:
    time: float
    sequence: int
    kind: EventKind = field(compare=False)
    payload: Any = field(compare=False, default=None)


class CausalityError(ValueError):
    pass


class EventQueue:
    """Min-queue on (time, sequence); ties pop in insertion order."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.now = 0.0

    def __len__(self):
        return len(self._heap)

    def schedule(self, time: float, kind: EventKind, payload=None) -> None:
        if time < self.now:
            raise CausalityError(f"event at {time} scheduled in the past (now={self.now})")
        item = (time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, item)

    def pop(self):
        """Next event, advancing the clock; None once the queue is empty."""
        if not self._heap:
            return None
        item = heapq.heappop(self._heap)
        self.now = item[0]
        return Event(*item)

    def peek_time(self):
        return self._heap[0][0] if self._heap else None
