import os

import pytest
from hypothesis import settings

from vamsim.core import KinematicState, Point

settings.register_profile("default", deadline=None, max_examples=100)
settings.register_profile("quick", deadline=None, max_examples=25)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


class FakeHost:
    """Just enough of the simulator for driving one station by hand."""

    def __init__(self, now=0.0):
        self.now = now
        self.kin = {}
        self.sent = []
        self.timers = []
        self.transitions = []
        self._cluster = 0

    def place(self, sid, x, y=0.0, speed=0.0, heading=0.0):
        self.kin[sid] = KinematicState(Point(x, y), speed, heading)

    def kinematics(self, sid):
        return self.kin[sid]

    def send(self, sid, vam):
        self.sent.append(vam)

    def schedule(self, sid, time, kind, token):
        self.timers.append((time, sid, kind, token))

    def transition(self, sid, old, new, label):
        if label is not None:
            self.transitions.append((self.now, sid, old, new, label))

    def next_cluster_id(self):
        self._cluster += 1
        return self._cluster

    def labels(self):
        return [t[4] for t in self.transitions]


@pytest.fixture
def host():
    return FakeHost()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
