"""Discrete-event kernel: integer-microsecond clock, event heap, RNG streams."""

import enum
import hashlib
import heapq
import random
import time as _wallclock

US_PER_S = 1_000_000

RNG_LABELS = ("mobility", "traffic", "sessions", "protocol", "radio")


def to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


def to_seconds(us: int) -> float:
    return us / US_PER_S


def fmt_time(us: int) -> str:
    """Render a microsecond timestamp as seconds with 6 decimals, exactly."""
    return "%d.%06d" % divmod(us, US_PER_S)


class EventKind(enum.Enum):
    RADIO_DELIVER = "radio"
    TIMER = "timer"
    MOBILITY_TICK = "mobility"
    SESSION_JOIN = "join"
    SESSION_LEAVE = "leave"
    TRAFFIC_EMIT = "traffic"


class PastEvent(ValueError):
    pass


class BudgetExceeded(RuntimeError):
    pass


def stream_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed & 0xFFFFFFFFFFFFFFFF}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RngStreams:
    """Named random streams derived from one master seed.

    Each label gets its own generator so draws on one stream never shift
    another (changing a protocol timer must not move a vehicle).
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._streams = {}

    def __getitem__(self, label: str) -> random.Random:
        if label not in RNG_LABELS:
            raise KeyError(f"unknown rng stream {label!r}")
        rng = self._streams.get(label)
        if rng is None:
            rng = self._streams[label] = random.Random(stream_seed(self.seed, label))
        return rng


class Simulator:
    """Single-threaded event loop.

    Heap entries are ``(fire_at, seq, kind, fn, args)``; ``seq`` is unique so
    equal-time events pop in insertion order and tuples never compare past it.
    """

    def __init__(self, duration_us: int, seed: int = 0, wall_budget_s: float | None = None,
                 check_monotonic: bool = False):
        if duration_us <= 0:
            raise ValueError("duration must be positive")
        self.duration = duration_us
        self.now = 0
        self.rng = RngStreams(seed)
        self._heap = []
        self._seq = 0
        self._cancelled = set()
        self.processed = 0
        self.wall_budget_s = wall_budget_s
        self.check_monotonic = check_monotonic
        self.history = None  # list of (time, seq, kind) when instrumented

    def schedule(self, fire_at: int, kind: EventKind, fn, *args) -> int:
        if fire_at < self.now:
            raise PastEvent(f"event at {fire_at}us is before clock {self.now}us")
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (fire_at, seq, kind, fn, args))
        return seq

    def schedule_in(self, delay_us: int, kind: EventKind, fn, *args) -> int:
        return self.schedule(self.now + delay_us, kind, fn, *args)

    def timer(self, delay_us: int, fn, *args) -> int:
        return self.schedule(self.now + delay_us, EventKind.TIMER, fn, *args)

    def cancel(self, handle: int | None) -> None:
        if handle is not None:
            self._cancelled.add(handle)

    def pending(self) -> int:
        return len(self._heap)

    def run(self, until_us: int | None = None) -> None:
        """Process events up to ``until_us`` (default: the run duration).

        Events later than the horizon stay queued; at run end they are simply
        never fired.
        """
        horizon = self.duration if until_us is None else min(until_us, self.duration)
        heap = self._heap
        cancelled = self._cancelled
        pop = heapq.heappop
        budget = self.wall_budget_s
        started = _wallclock.monotonic()
        last = self.now
        history = self.history
        while heap and heap[0][0] <= horizon:
            fire_at, seq, kind, fn, args = pop(heap)
            if cancelled and seq in cancelled:
                cancelled.discard(seq)
                continue
            if self.check_monotonic:
                assert fire_at >= last, "event time went backwards"
                last = fire_at
            self.now = fire_at
            if history is not None:
                history.append((fire_at, seq, kind))
            fn(*args)
            self.processed += 1
            if budget is not None and not self.processed & 0xFFFF:
                if _wallclock.monotonic() - started > budget:
                    raise BudgetExceeded(f"wall-clock budget {budget}s exceeded at t={fmt_time(self.now)}")
        if until_us is None or until_us >= self.duration:
            self.now = self.duration
        else:
            self.now = max(self.now, horizon)
