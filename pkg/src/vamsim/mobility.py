"""Synthetic pedestrian and vehicle mobility on a straight road segment.

Pedestrians walk on two sidewalks at y = +/-6 m, both directions, at a
target speed of at most 5 km/h. A faster pedestrian closing on a slower
one ahead side-steps, passes and steps back; each step deviates the heading
by ``overtake_angle`` degrees, which is what produces the occasional extra
VAM. Pedestrians turn around at the segment ends. Vehicles drive at
constant speed on lanes around y = 0 and wrap around at the ends; they only
exist as CAM load on the channel.

Trajectories are sampled once on a fixed grid so every scheme sees the
same mobility for a given seed.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .core import KinematicState, Point

MAX_PEDESTRIAN_SPEED = 5.0 / 3.6
MAX_VEHICLE_SPEED = 60.0 / 3.6
SIDEWALK_OFFSET = 6.0
MAX_LATERAL_JITTER = 1.5
LANE_WIDTH = 3.5


class Sidewalk(enum.IntEnum):
    NORTH = 1
    SOUTH = -1


@dataclass(frozen=True)
class PedestrianSpec:
    target_speed: float = MAX_PEDESTRIAN_SPEED
    sidewalk: Sidewalk = Sidewalk.NORTH
    direction: int = 1
    start_offset: float = 0.0
    lateral_jitter: float = 0.0

    def __post_init__(self):
        if not 0 < self.target_speed <= MAX_PEDESTRIAN_SPEED + 1e-9:
            raise ValueError(f"pedestrian speed {self.target_speed} outside (0, 5 km/h]")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if abs(self.lateral_jitter) > MAX_LATERAL_JITTER:
            raise ValueError("lateral jitter above 1.5 m")


@dataclass(frozen=True)
class VehicleSpec:
    speed: float = MAX_VEHICLE_SPEED
    lane: int = 0
    cam_rate_hz: float = 10.0
    start_offset: float = 0.0
    direction: int = 1

    def __post_init__(self):
        if not 0 <= self.speed <= MAX_VEHICLE_SPEED + 1e-9:
            raise ValueError(f"vehicle speed {self.speed} above 60 km/h")
        if not 1 <= self.cam_rate_hz <= 10:
            raise ValueError("CAM rate must lie in [1, 10] Hz")


def pedestrian_count(segment_length, density=None, separation=None, abreast=4, sidewalks=2) -> int:
    """Pedestrians on a segment, from a density per 100 m or from a row separation.

    With ``separation`` the sidewalks are filled with ``abreast``
    pedestrians per ``separation`` meters of each sidewalk.
    """
    if segment_length <= 0:
        return 0
    if separation is not None:
        if separation <= 0:
            raise ValueError("separation must be > 0")
        return int(round(segment_length / separation * abreast * sidewalks))
    if density is None or density <= 0:
        raise ValueError("density must be > 0")
    return int(round(segment_length / 100.0 * density))


def place_pedestrians(
    segment_length: float,
    density: float,
    rng: np.random.Generator,
    target_speed: float = MAX_PEDESTRIAN_SPEED,
    speed_spread: float = 0.05,
) -> list:
    """Evenly spaced pedestrians with seeded jitter, alternating sidewalks,
    half of each sidewalk walking each way."""
    if density <= 0:
        raise ValueError("density must be > 0")
    n = pedestrian_count(segment_length, density)
    if n == 0:
        return []
    per_side = [(n + 1) // 2, n // 2]
    specs = []
    for side, count in zip((Sidewalk.NORTH, Sidewalk.SOUTH), per_side):
        if count == 0:
            continue
        sep = segment_length / count
        xs = (np.arange(count) + 0.5) * sep + rng.uniform(-0.4, 0.4, count) * sep
        xs = np.clip(xs, 0.0, segment_length)
        dirs = np.where(rng.permutation(count) < (count + 1) // 2, 1, -1)
        jitter = rng.uniform(-MAX_LATERAL_JITTER, MAX_LATERAL_JITTER, count)
        speeds = target_speed * rng.uniform(1.0 - speed_spread, 1.0, count)
        for x, d, j, v in zip(xs, dirs, jitter, speeds):
            specs.append(PedestrianSpec(float(v), side, int(d), float(x), float(j)))
    return specs


def place_platoon(
    count: int, speed: float, start_x: float = 10.0, spacing: float = 1.0, per_row: int = 3
) -> list:
    """A tight group walking together on the north sidewalk."""
    specs = []
    for i in range(count):
        row, col = divmod(i, per_row)
        specs.append(
            PedestrianSpec(speed, Sidewalk.NORTH, 1, start_x + row * spacing, (col - (per_row - 1) / 2) * spacing)
        )
    return specs


def place_vehicles(
    segment_length: float,
    density_per_km_lane: float,
    lanes: int,
    rng: np.random.Generator,
    speed: float = MAX_VEHICLE_SPEED,
    cam_rate_hz: float = 10.0,
) -> list:
    per_lane = int(round(segment_length / 1000.0 * density_per_km_lane))
    specs = []
    for lane in range(lanes):
        direction = 1 if lane % 2 == 0 else -1
        xs = np.sort(rng.uniform(0.0, segment_length, per_lane))
        for x in xs:
            specs.append(VehicleSpec(speed, lane, cam_rate_hz, float(x), direction))
    return specs


def lane_y(lane: int, lanes: int) -> float:
    return (lane - (lanes - 1) / 2.0) * LANE_WIDTH


def step_kinematics(state: KinematicState, dt: float) -> KinematicState:
    """Advance at constant speed along the current heading."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    h = math.radians(state.heading)
    p = state.position
    return KinematicState(
        Point(p.x + state.speed * dt * math.cos(h), p.y + state.speed * dt * math.sin(h)),
        state.speed,
        state.heading,
    )


class Trajectories:
    """Pedestrian positions and velocities sampled every ``dt`` seconds.

    Between samples a pedestrian moves with the velocity of the sample that
    starts the interval, so interpolation is exact for the stepped motion.
    """

    def __init__(self, dt: float, pos: np.ndarray, vel: np.ndarray):
        self.dt = dt
        self.pos = pos  # (K+1, N, 2)
        self.vel = vel  # (K+1, N, 2)
        self.speed = np.hypot(vel[..., 0], vel[..., 1])
        self.heading = np.degrees(np.arctan2(vel[..., 1], vel[..., 0])) % 360.0

    @property
    def n(self) -> int:
        return self.pos.shape[1]

    def _index(self, t: float):
        k = int(math.floor(t / self.dt + 1e-9))
        k = min(max(k, 0), self.pos.shape[0] - 1)
        return k, t - k * self.dt

    def kinematics(self, i: int, t: float) -> KinematicState:
        k, tau = self._index(t)
        p = self.pos[k, i]
        v = self.vel[k, i]
        return KinematicState(
            Point(float(p[0] + tau * v[0]), float(p[1] + tau * v[1])),
            float(self.speed[k, i]),
            float(self.heading[k, i]),
        )

    def positions(self, t: float) -> np.ndarray:
        k, tau = self._index(t)
        return self.pos[k] + tau * self.vel[k]

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.pos).tobytes()).hexdigest()[:16]


def simulate_crowd(
    specs: list,
    segment_length: float,
    duration: float,
    dt: float = 0.1,
    overtake_angle: float = 15.0,
    overtake_gap: float = 1.5,
    step_duration: float = 1.0,
) -> Trajectories:
    n = len(specs)
    steps = int(round(duration / dt)) + 1
    pos = np.zeros((steps + 1, n, 2))
    vel = np.zeros((steps + 1, n, 2))
    if n == 0:
        return Trajectories(dt, pos, vel)

    x = np.array([s.start_offset for s in specs], dtype=float)
    base_y = np.array([s.sidewalk * SIDEWALK_OFFSET + s.lateral_jitter for s in specs], dtype=float)
    side = np.array([int(s.sidewalk) for s in specs])
    direction = np.array([s.direction for s in specs], dtype=float)
    speed = np.array([s.target_speed for s in specs], dtype=float)
    offset = np.zeros(n)
    # 0 walking, 1 stepping out, 2 passing, 3 stepping back
    phase = np.zeros(n, dtype=int)
    phase_left = np.zeros(n)
    passing = np.full(n, -1)
    theta = math.radians(overtake_angle)
    # outward = away from the road
    outward = np.sign(base_y)

    for k in range(steps + 1):
        # turn around before leaving the segment
        nxt = x + direction * speed * dt
        turn = (nxt < 0.0) | (nxt > segment_length)
        direction[turn] *= -1.0

        walking = phase == 0
        if walking.any():
            for s_val in (1, -1):
                for d_val in (1.0, -1.0):
                    grp = np.flatnonzero((side == s_val) & (direction == d_val))
                    if len(grp) < 2:
                        continue
                    order = grp[np.argsort(x[grp] * d_val)]
                    behind, ahead = order[:-1], order[1:]
                    gap = (x[ahead] - x[behind]) * d_val
                    closing = (
                        walking[behind]
                        & (phase[ahead] == 0)
                        & (gap < overtake_gap)
                        & (speed[behind] > speed[ahead])
                        & (np.abs((base_y[behind] + offset[behind]) - (base_y[ahead] + offset[ahead])) < 0.5)
                    )
                    for b, a in zip(behind[closing], ahead[closing]):
                        phase[b] = 1
                        phase_left[b] = step_duration
                        passing[b] = a

        # phase 2 ends once clearly ahead of the passed pedestrian
        in_pass = np.flatnonzero(phase == 2)
        for i in in_pass:
            j = passing[i]
            if j < 0 or (x[i] - x[j]) * direction[i] > overtake_gap or direction[i] != direction[j]:
                phase[i] = 3
                phase_left[i] = step_duration

        lateral = np.zeros(n)
        along = np.ones(n)
        out = phase == 1
        back = phase == 3
        lateral[out] = math.sin(theta) * outward[out]
        lateral[back] = -math.sin(theta) * outward[back]
        along[out | back] = math.cos(theta)

        vx = direction * speed * along
        vy = speed * lateral
        pos[k, :, 0] = x
        pos[k, :, 1] = base_y + offset
        vel[k, :, 0] = vx
        vel[k, :, 1] = vy

        x = x + vx * dt
        offset = offset + vy * dt
        phase_left[out | back] -= dt
        done_out = out & (phase_left <= 1e-9)
        done_back = back & (phase_left <= 1e-9)
        phase[done_out] = 2
        phase[done_back] = 0
        offset[done_back] = 0.0
        passing[done_back] = -1

    return Trajectories(dt, pos, vel)


class VehicleTraffic:
    """Constant-speed vehicles wrapping around the segment."""

    def __init__(self, specs: list, segment_length: float, lanes: int):
        self.specs = specs
        self.length = segment_length
        self.x0 = np.array([s.start_offset for s in specs], dtype=float)
        self.v = np.array([s.speed * s.direction for s in specs], dtype=float)
        self.y = np.array([lane_y(s.lane, lanes) for s in specs], dtype=float)

    @property
    def n(self) -> int:
        return len(self.specs)

    def positions(self, t: float) -> np.ndarray:
        if self.length <= 0:
            return np.column_stack([self.x0, self.y])
        return np.column_stack([np.mod(self.x0 + self.v * t, self.length), self.y])
