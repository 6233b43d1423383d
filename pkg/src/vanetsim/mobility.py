"""Straight-highway Manhattan mobility.

Vehicles drive along x only. The lower half of the strip carries two
eastbound lanes, the upper half two westbound lanes. Speeds are drawn once
per vehicle and never change; a vehicle leaving one end of the strip
re-enters at the other end of the same lane.
"""

from dataclasses import dataclass, replace

import numpy as np

KMH = 1000.0 / 3600.0

AREA_X = 10_000.0
AREA_Y = 1_000.0
SPEED_MIN_KMH = 80.0
SPEED_MAX_KMH = 110.0

EASTBOUND = "eastbound"
WESTBOUND = "westbound"

# (direction, lane index, lane y); round-robin order for fleet placement
STREAMS = (
    (EASTBOUND, 0, 200.0),
    (EASTBOUND, 1, 400.0),
    (WESTBOUND, 0, 600.0),
    (WESTBOUND, 1, 800.0),
)


class EmptyFleet(ValueError):
    pass


@dataclass(frozen=True)
class Position:
    x: float
    y: float


@dataclass(frozen=True)
class LaneAssignment:
    direction: str
    lane_index: int
    lane_y: float

    @property
    def sign(self) -> int:
        return 1 if self.direction == EASTBOUND else -1


@dataclass(frozen=True)
class VehicleMotion:
    position: Position
    speed: float  # m/s
    lane: LaneAssignment


def advance(v: VehicleMotion, dt: float, length: float = AREA_X) -> VehicleMotion:
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return v
    x = (v.position.x + v.lane.sign * v.speed * dt) % length
    return replace(v, position=Position(x, v.position.y))


def init_fleet(n: int, rng, length: float = AREA_X,
               speed_kmh: tuple[float, float] = (SPEED_MIN_KMH, SPEED_MAX_KMH)) -> list[VehicleMotion]:
    if n < 1:
        raise EmptyFleet("fleet needs at least one vehicle")
    lo, hi = speed_kmh
    fleet = []
    for i in range(n):
        direction, idx, y = STREAMS[i % len(STREAMS)]
        x = rng.uniform(0.0, length)
        speed = rng.uniform(lo, hi) * KMH
        fleet.append(VehicleMotion(Position(x, y), speed, LaneAssignment(direction, idx, y)))
    return fleet


class Fleet:
    """Vectorised fleet state advanced on fixed mobility ticks."""

    def __init__(self, vehicles: list[VehicleMotion], length: float = AREA_X):
        self.vehicles0 = list(vehicles)
        self.length = length
        self.x = np.array([v.position.x for v in vehicles], dtype=float)
        self.y = np.array([v.position.y for v in vehicles], dtype=float)
        self.velocity = np.array([v.lane.sign * v.speed for v in vehicles], dtype=float)
        self.t = 0.0

    def __len__(self):
        return len(self.x)

    def step(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("dt must be non-negative")
        self.x = np.mod(self.x + self.velocity * dt, self.length)
        self.t += dt

    def positions(self) -> dict[int, Position]:
        return {i: Position(float(x), float(y)) for i, (x, y) in enumerate(zip(self.x, self.y))}

    def dump_lines(self, t_label: str) -> list[str]:
        return [f"{t_label} {i} {x:.3f} {y:.3f}" for i, (x, y) in enumerate(zip(self.x, self.y))]
