"""Mesh-based multicast routing (PUMA).

The only control message is the multicast announcement, originated by the
core once per period and relayed exactly once per (core, seq) by every
node. Each relay carries the relayer's distance to the core, its chosen
parent and whether it is a mesh member, so every node learns a route to
the core and which neighbours rely on it as their mesh parent.

Receivers are mesh members; so is every node named as parent by a fresh
mesh-member announcement, which pulls the parent chains of all receivers
into a mesh rooted at the core. Data is flooded among mesh members; a
source outside the mesh first unicasts-by-broadcast along its parent chain.
"""

from dataclasses import dataclass

from .agent import Agent
from .engine import to_us
from .packets import DATA, MESH, UPSTREAM, DataHeader, Packet

ANNOUNCEMENT = "announcement"
ANN_SIZE = 32


@dataclass
class PumaConfig:
    announce_interval: float = 3.0
    expiry_periods: int = 3
    jitter: float = 0.01
    member_source: bool = False  # the source joins the mesh instead of routing toward it


@dataclass(slots=True)
class Announcement:
    core: int
    seq: int
    distance: int
    mesh: bool
    parent: int
    kind: str = ANNOUNCEMENT


@dataclass(slots=True)
class ConnEntry:
    core: int
    seq: int
    distance: int
    mesh: bool
    parent: int
    arrival: int


class PumaAgent(Agent):
    proto = "puma"

    def __init__(self, node, net, config: PumaConfig):
        super().__init__(node, net, config)
        self.period_us = to_us(config.announce_interval)
        self.expiry_us = self.period_us * config.expiry_periods
        self.receiver = False
        self.sender = False
        self.is_core = False
        self.core_id = None
        self.core_seq = 0
        self.core_heard = -1
        self.own_seq = 0
        self.conn = {}           # neighbour -> ConnEntry
        self.relayed = {}        # core -> last seq relayed
        self.announce_timer = None
        self.check_timer = None
        self._mesh_cache = None  # (value, valid_until_us)
        self.originated = []     # (core, seq) this node put on the air as core

    # -- state queries ----------------------------------------------------
    def core_fresh(self) -> bool:
        if self.is_core:
            return True
        return self.core_id is not None and self.sim.now - self.core_heard <= self.expiry_us

    def _fresh(self, e: ConnEntry, now: int) -> bool:
        return now - e.arrival <= self.expiry_us

    def is_mesh_member(self) -> bool:
        if self.receiver or self.is_core or (self.sender and self.cfg.member_source):
            return True
        now = self.sim.now
        cache = self._mesh_cache
        if cache is not None and now <= cache[1]:
            return cache[0]
        until = None
        for e in self.conn.values():
            if e.mesh and e.parent == self.node and e.core == self.core_id and self._fresh(e, now):
                t = e.arrival + self.expiry_us
                until = t if until is None or t > until else until
        if until is None:
            # not a member until some entry says otherwise; entries invalidate the cache
            self._mesh_cache = (False, 1 << 62)
            return False
        self._mesh_cache = (True, until)
        return True

    def best_parent(self):
        """Fresh same-core neighbour with newest seq, then least distance, then lowest id."""
        now = self.sim.now
        best = None
        best_key = None
        for nbr, e in self.conn.items():
            if e.core != self.core_id or e.parent == self.node or not self._fresh(e, now):
                continue
            key = (-e.seq, e.distance, nbr)
            if best_key is None or key < best_key:
                best, best_key = nbr, key
        return best

    def distance(self):
        if self.is_core:
            return 0
        p = self.best_parent()
        return None if p is None else self.conn[p].distance + 1

    # -- membership -----------------------------------------------------------
    def join(self, now: int) -> None:
        self.joined_at = now
        self.receiver = True
        self._ensure_check()

    def leave(self, now: int) -> None:
        self.joined_at = None
        self.receiver = False
        if self.is_core and not self._wants_core():
            self._stop_core()

    def start_source(self) -> None:
        self.sender = True
        if self.cfg.member_source:
            self._ensure_check()

    def _wants_core(self) -> bool:
        return self.receiver or (self.sender and self.cfg.member_source)

    def _ensure_check(self) -> None:
        if self.check_timer is None:
            self.check_timer = self.sim.timer(self.period_us, self._check_core)

    def _check_core(self) -> None:
        self.check_timer = None
        if not self._wants_core():
            return
        if not self.core_fresh():
            self._become_core()
        self._ensure_check()

    # -- core role --------------------------------------------------------------
    def _become_core(self) -> None:
        self.is_core = True
        self.core_id = self.node
        self.core_seq = self.own_seq
        self._mesh_cache = None
        if self.announce_timer is None:
            self._announce()

    def _stop_core(self) -> None:
        self.is_core = False
        self.sim.cancel(self.announce_timer)
        self.announce_timer = None
        self.core_heard = self.sim.now
        self._mesh_cache = None

    def _announce(self) -> None:
        self.announce_timer = None
        if not self.is_core:
            return
        self.own_seq += 1
        self.core_seq = self.own_seq
        self.core_heard = self.sim.now
        self.relayed[self.node] = self.own_seq
        self.originated.append((self.node, self.own_seq))
        self._send(Announcement(self.node, self.own_seq, 0, True, -1))
        self.announce_timer = self.sim.timer(self.period_us, self._announce)

    def _send(self, ann: Announcement) -> None:
        self.transmit(self.control(ANNOUNCEMENT, ANN_SIZE, ann))

    # -- announcements -----------------------------------------------------------
    def _on_announcement(self, pkt: Packet, ann: Announcement) -> None:
        now = self.sim.now
        core = ann.core
        if core == self.node:
            if self.is_core:
                self._store(pkt.sender, ann, now)
            return
        if core != self.core_id:
            if self.core_id is not None and core < self.core_id and self.core_fresh():
                self.drop(pkt, "lowcore")
                return
            if self.is_core:
                self._stop_core()
            self.core_id = core
            self.core_seq = 0
            self._mesh_cache = None
        if ann.seq < self.core_seq:
            self.drop(pkt, "stale")
            return
        self._store(pkt.sender, ann, now)
        if ann.seq > self.core_seq:
            self.core_seq = ann.seq
            self.core_heard = now
        if self.relayed.get(core, 0) < ann.seq:
            self.relayed[core] = ann.seq
            self.later(self._relay, core, ann.seq)

    def _store(self, nbr: int, ann: Announcement, now: int) -> None:
        old = self.conn.get(nbr)
        if ann.mesh and ann.parent == self.node or (old is not None and old.parent == self.node):
            self._mesh_cache = None
        self.conn[nbr] = ConnEntry(ann.core, ann.seq, ann.distance, ann.mesh, ann.parent, now)

    def _relay(self, core: int, seq: int) -> None:
        if core != self.core_id or self.is_core:
            return
        parent = self.best_parent()
        if parent is None:
            return
        dist = self.conn[parent].distance + 1
        self._send(Announcement(core, seq, dist, self.is_mesh_member(), parent))

    # -- data ---------------------------------------------------------------------
    def originate(self, pkt: Packet) -> None:
        self.seen.add((pkt.origin, pkt.seq))
        if self.is_mesh_member():
            pkt.header = DataHeader(MESH)
            self.transmit(pkt)
            return
        parent = self.best_parent() if self.core_fresh() else None
        if parent is None:
            self.no_route(pkt)
            return
        pkt.header = DataHeader(UPSTREAM, parent)
        self.transmit(pkt)

    def _on_data(self, pkt: Packet) -> None:
        key = (pkt.origin, pkt.seq)
        hdr = pkt.header
        if self.is_mesh_member():
            if key in self.seen:
                return
            self.seen.add(key)
            self.deliver(pkt)
            self._forward(pkt, DataHeader(MESH))
            return
        if hdr.mode != UPSTREAM or hdr.via != self.node:
            return
        if key in self.seen:
            return
        self.seen.add(key)
        parent = self.best_parent() if self.core_fresh() else None
        if parent is None:
            self.drop(pkt, "noroute")
            return
        self._forward(pkt, DataHeader(UPSTREAM, parent))

    def _forward(self, pkt: Packet, header: DataHeader) -> None:
        self.transmit(Packet(pkt.proto, pkt.kind, pkt.origin, pkt.seq, pkt.size, pkt.group,
                             pkt.created, self.node, header))

    def receive(self, pkt: Packet) -> None:
        if pkt.proto == DATA:
            self._on_data(pkt)
        else:
            self._on_announcement(pkt, pkt.header)
