"""Unit-disk broadcast channel."""

import math
from dataclasses import dataclass

import numpy as np

from .engine import EventKind, US_PER_S

SPEED_OF_LIGHT = 3.0e8


@dataclass
class RadioConfig:
    range: float = 1000.0
    bandwidth: float = 11e6  # bits/s
    loss_probability: float = 0.0
    collisions: bool = False

    def errors(self) -> list[str]:
        errs = []
        if not self.range > 0:
            errs.append("radio range must be positive")
        if not self.bandwidth > 0:
            errs.append("radio bandwidth must be positive")
        if not 0.0 <= self.loss_probability <= 1.0:
            errs.append("loss_probability must lie in [0, 1]")
        return errs


def tx_delay_us(size_bytes: int, bandwidth: float) -> int:
    return max(1, int(round(size_bytes * 8 / bandwidth * US_PER_S)))


def prop_delay_us(distance: float) -> int:
    return int(round(distance / SPEED_OF_LIGHT * US_PER_S))


class Radio:
    """Connects each transmission to every node within range at send time.

    Positions come from ``positions`` (an object exposing numpy arrays ``x``
    and ``y``); call :meth:`refresh` after each mobility tick. Receivers of
    one transmission are grouped by their (microsecond) propagation delay so
    a broadcast costs a handful of heap operations, not one per neighbour.
    """

    def __init__(self, sim, positions, config: RadioConfig, deliver, trace=None):
        self.sim = sim
        self.positions = positions
        self.config = config
        self.deliver = deliver
        self.trace = trace
        self._dist = None
        self._groups = {}
        self._rx_busy = {}  # receiver -> (end_us, token) in collision mode
        self.transmissions = 0
        self.refresh()

    def refresh(self) -> None:
        x = self.positions.x
        y = self.positions.y
        self._dist = np.hypot(x[:, None] - x[None, :], y[:, None] - y[None, :])
        self._groups = {}

    def distance(self, a: int, b: int) -> float:
        return float(self._dist[a, b])

    def in_range(self, a: int, b: int) -> bool:
        return bool(self._dist[a, b] <= self.config.range)

    def neighbors(self, a: int) -> list[int]:
        return [n for _, group in self._neighbor_groups(a) for n in group]

    def _neighbor_groups(self, a: int):
        groups = self._groups.get(a)
        if groups is None:
            row = self._dist[a]
            idx = np.nonzero(row <= self.config.range)[0]
            by_delay = {}
            for j in idx.tolist():
                if j == a:
                    continue
                by_delay.setdefault(prop_delay_us(float(row[j])), []).append(j)
            groups = self._groups[a] = [(d, tuple(by_delay[d])) for d in sorted(by_delay)]
        return groups

    def broadcast(self, sender: int, packet) -> list[tuple[int, int]]:
        """Transmit ``packet`` from ``sender`` now; returns (receiver, arrival_us)."""
        sim = self.sim
        now = sim.now
        packet.sender = sender
        if self.trace is not None:
            self.trace.send(now, sender, packet)
        self.transmissions += 1
        tx = tx_delay_us(packet.size, self.config.bandwidth)
        loss = self.config.loss_probability
        rng = sim.rng["radio"] if loss > 0 else None
        scheduled = []
        for delay, group in self._neighbor_groups(sender):
            if rng is not None:
                group = tuple(n for n in group if rng.random() >= loss)
                if not group:
                    continue
            arrival = now + tx + delay
            if self.config.collisions:
                tokens = [self._occupy(n, arrival - tx, arrival) for n in group]
                sim.schedule(arrival, EventKind.RADIO_DELIVER, self._deliver_checked, group, tokens, packet)
            else:
                sim.schedule(arrival, EventKind.RADIO_DELIVER, self._deliver_group, group, packet)
            scheduled.extend((n, arrival) for n in group)
        return scheduled

    def _deliver_group(self, group, packet) -> None:
        deliver = self.deliver
        for n in group:
            deliver(n, packet)

    def _occupy(self, receiver: int, start: int, end: int) -> list:
        token = [False]
        prev = self._rx_busy.get(receiver)
        if prev is not None and prev[0] > start:
            prev[1][0] = True
            token[0] = True
        if prev is None or end > prev[0]:
            self._rx_busy[receiver] = (end, token)
        return token

    def _deliver_checked(self, group, tokens, packet) -> None:
        for n, token in zip(group, tokens):
            if not token[0]:
                self.deliver(n, packet)
            elif self.trace is not None:
                self.trace.drop(self.sim.now, n, packet, "collision")


def euclid(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
