"""VBR video-like source and the listener session plan."""

from dataclasses import dataclass, field

from .engine import US_PER_S, fmt_time, to_us
from .packets import DATA, DataHeader, Packet


class InvalidScenario(ValueError):
    pass


class InvalidPlan(AssertionError):
    pass


@dataclass
class VbrSource:
    node: int
    group: int = 1
    frame_rate: float = 25.0
    mean_packet_size: int = 512
    packet_size_bounds: tuple[int, int] = (256, 768)
    mean_bitrate: float = 64_000.0
    jitter: float = 0.2
    active: tuple[int, int] | None = None  # [start, end) in microseconds
    next_seq: int = 0

    def is_active(self, now: int) -> bool:
        if self.active is None:
            return True
        start, end = self.active
        return start <= now < end

    def emit(self, now: int, rng) -> tuple[Packet, int]:
        """Build the next packet and return it with the next emission time."""
        lo, hi = self.packet_size_bounds
        size = rng.randint(lo, hi)
        gap_s = size * 8 / self.mean_bitrate * rng.uniform(1.0 - self.jitter, 1.0 + self.jitter)
        seq = self.next_seq
        self.next_seq += 1
        pkt = Packet(DATA, DATA, self.node, seq, size, self.group, now, self.node, DataHeader())
        return pkt, now + max(1, int(round(gap_s * US_PER_S)))

    def first_emission(self) -> int | None:
        if self.active is None:
            return 0
        start, end = self.active
        return start if end > start else None


def emit_all(source: VbrSource, rng, horizon_us: int) -> list[Packet]:
    """Emit packets back to back over the active window (used by tests)."""
    t = source.first_emission()
    out = []
    if t is None:
        return out
    while t <= horizon_us and source.is_active(t):
        pkt, t = source.emit(t, rng)
        out.append(pkt)
    return out


@dataclass
class SessionPlan:
    """Per listener node: ordered, disjoint (join_us, leave_us) pairs."""

    sessions: dict[int, list[tuple[int, int]]] = field(default_factory=dict)

    @property
    def pool(self) -> list[int]:
        return sorted(self.sessions)

    def events(self) -> list[tuple[int, int, str, int]]:
        """(time, node, 'join'|'leave', session index), time-ordered."""
        out = []
        for node, pairs in self.sessions.items():
            for k, (j, l) in enumerate(pairs):
                out.append((j, node, "join", k))
                out.append((l, node, "leave", k))
        out.sort(key=lambda e: (e[0], e[1], e[2] == "join"))
        return out

    def listeners_at(self, t_us: int) -> int:
        return sum(1 for pairs in self.sessions.values() for j, l in pairs if j <= t_us < l)

    def dumps(self) -> str:
        lines = []
        for node in self.pool:
            for j, l in self.sessions[node]:
                lines.append(f"{node} {fmt_time(j)} {fmt_time(l)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "SessionPlan":
        plan = cls()
        for raw in text.splitlines():
            if not raw.strip():
                continue
            node, j, l = raw.split()
            plan.sessions.setdefault(int(node), []).append((to_us(float(j)), to_us(float(l))))
        for pairs in plan.sessions.values():
            pairs.sort()
        return plan


def build_session_plan(listeners: int, sessions: int, duration_s: float, rng,
                       candidates: list[int]) -> SessionPlan:
    """Place ``sessions`` join/leave pairs for each of ``listeners`` pooled nodes.

    Each node's run is cut into ``sessions`` windows; the node joins in the
    first quarter of every window and leaves in the last quarter. Window
    boundaries are staggered across the pool (evenly spaced phases, shuffled)
    so that the pool never switches off all at once; each node's first
    window starts at 0 and its last ends at ``duration_s``. Join/leave
    offsets never exceed a quarter of the nominal window, so a node is idle
    only within w/4 of one of its boundaries and at most half the pool is
    idle at any instant.
    """
    if listeners < 1:
        raise InvalidScenario("at least one listener is required")
    if listeners > len(candidates):
        raise InvalidScenario(f"listeners ({listeners}) exceed available nodes ({len(candidates)})")
    if sessions < 1:
        raise InvalidScenario("sessions per node must be >= 1")
    pool = rng.sample(sorted(candidates), listeners)
    ranks = list(range(listeners))
    rng.shuffle(ranks)
    w = duration_s / sessions
    plan = SessionPlan()
    for node, rank in zip(pool, ranks):
        phase = 0.0 if sessions == 1 else ((rank + 0.5) / listeners - 0.5) * w
        bounds = [0.0] + [phase + k * w for k in range(1, sessions)] + [duration_s]
        pairs = []
        for k in range(sessions):
            start, end = bounds[k], bounds[k + 1]
            quarter = 0.25 * min(end - start, w)
            join = start + rng.uniform(0.0, quarter)
            leave = end - rng.uniform(0.0, quarter)
            pairs.append((to_us(join), to_us(leave)))
        plan.sessions[node] = pairs
    return plan


def apply_session_event(agent, kind: str, now: int, trace, proto: str, index: int, group: int = 1):
    """Hand a plan event to the node's routing agent and trace it."""
    if kind == "join":
        if agent.is_member():
            raise InvalidPlan(f"node {agent.node} joined twice")
        agent.join(now)
    elif kind == "leave":
        if not agent.is_member():
            raise InvalidPlan(f"node {agent.node} left without joining")
        agent.leave(now)
    else:
        raise ValueError(kind)
    if trace is not None:
        trace.session(now, agent.node, proto, kind, index, group)
