"""Behaviour shared by the per-node routing agents."""

from .engine import to_us
from .packets import Packet

INF = 1 << 30


class Agent:
    """One node's routing instance. Subclasses implement the protocol.

    ``net`` supplies ``sim``, ``radio`` and ``trace``; agents talk to each
    other only through radio transmissions.
    """

    proto = "?"

    def __init__(self, node: int, net, config):
        self.node = node
        self.net = net
        self.sim = net.sim
        self.trace = net.trace
        self.cfg = config
        self.joined_at = None  # listener join time, None when not listening
        self.seen = set()      # data (origin, seq) already handled
        self.delivered = 0
        self._ctrl_seq = 0

    # -- membership -----------------------------------------------------
    def is_member(self) -> bool:
        return self.joined_at is not None

    # -- packet helpers -------------------------------------------------
    def control(self, kind: str, size: int, header) -> Packet:
        self._ctrl_seq += 1
        return Packet(self.proto, kind, self.node, self._ctrl_seq, size, 1, self.sim.now, self.node, header)

    def transmit(self, pkt: Packet) -> None:
        self.net.radio.broadcast(self.node, pkt)

    def jitter_us(self) -> int:
        hi = to_us(self.cfg.jitter)
        return self.sim.rng["protocol"].randint(0, hi) if hi > 0 else 0

    def later(self, fn, *args) -> int:
        """Run ``fn`` after a random broadcast jitter."""
        return self.sim.timer(self.jitter_us(), fn, *args)

    def deliver(self, pkt: Packet) -> None:
        joined = self.joined_at
        if joined is not None and pkt.created >= joined:
            self.delivered += 1
            if self.trace is not None:
                self.trace.recv(self.sim.now, self.node, pkt)

    def no_route(self, pkt: Packet) -> None:
        """Source-side drop: the emission is still traced as sent."""
        if self.trace is not None:
            self.trace.send(self.sim.now, self.node, pkt)
            self.trace.drop(self.sim.now, self.node, pkt, "noroute")

    def drop(self, pkt: Packet, reason: str) -> None:
        if self.trace is not None:
            self.trace.drop(self.sim.now, self.node, pkt, reason)

    # -- protocol surface -------------------------------------------------
    def join(self, now: int) -> None:
        raise NotImplementedError

    def leave(self, now: int) -> None:
        raise NotImplementedError

    def start_source(self) -> None:
        """Called once at t=0 on the node that originates data."""

    def originate(self, pkt: Packet) -> None:
        raise NotImplementedError

    def receive(self, pkt: Packet) -> None:
        raise NotImplementedError
