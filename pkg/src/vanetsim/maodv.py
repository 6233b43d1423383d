"""Tree-based multicast routing (MAODV).

A node joins by flooding a join request; tree nodes answer with replies
that travel back along the reverse path; the requester keeps the best reply
and activates exactly one branch toward it. The group leader floods a
GroupHello every ``hello_interval``; every node relays it once and tree
nodes piggyback their own tree position (hop count to the leader, upstream
and leader id) on the relayed copy, which doubles as the link-liveness
signal between tree neighbours.

Data is broadcast hop by hop along the single shared tree: a tree node only
accepts a packet from one of its tree neighbours and forwards it once.
"""

from dataclasses import dataclass, field, replace

from .agent import INF, Agent
from .engine import to_us
from .packets import DataHeader, Packet

RREQ = "rreq_j"
RREP = "rrep"
MACT = "mact"
GHELLO = "ghello"
PRUNE = "prune"

SIZES = {RREQ: 28, RREP: 28, MACT: 24, GHELLO: 28, PRUNE: 20}

JOIN = "join"
REPAIR = "repair"
MERGE = "merge"


@dataclass
class MaodvConfig:
    hello_interval: float = 1.0
    allowed_hello_loss: int = 3
    rreq_retries: int = 3
    rreq_wait: float = 0.1  # first reply window; doubles per retry
    ttl: int = 32
    jitter: float = 0.01


@dataclass(slots=True)
class ControlMessage:
    kind: str
    group: int
    origin: int
    dest: int = -1
    seq: int = 0
    hop_count: int = 0
    ttl: int = 32
    next_hop: int = -1       # addressee for reply/activate/prune
    group_seq: int = 0
    leader: int = -1         # originating leader (hello) / replier's leader
    tree_hops: int = INF     # sender's hop count to its leader
    max_tree_hops: int = INF  # repair: only tree nodes this close may reply
    merge_leader: int = -1   # merge: only nodes of this leader's tree may reply
    # relayer's own tree position, filled in on every GroupHello copy
    relay_on_tree: bool = False
    relay_upstream: int = -1
    relay_leader: int = -1


@dataclass
class Reply:
    group_seq: int
    hop_count: int
    replier: int
    via: int
    leader: int
    tree_hops: int

    def rank(self):
        # highest group_seq, then fewest hops, then lowest replier id
        return (self.group_seq, -self.hop_count, -self.replier)


@dataclass
class Pending:
    mode: str
    seq: int
    attempt: int = 0
    max_tree_hops: int = INF
    merge_leader: int = -1
    replies: list = field(default_factory=list)
    timer: int | None = None


class MaodvAgent(Agent):
    proto = "maodv"

    def __init__(self, node, net, config: MaodvConfig):
        super().__init__(node, net, config)
        self.sender = False
        self.on_tree = False
        self.leader = False
        self.leader_id = -1
        self.upstream = None
        self.downstream = set()
        self.hop = INF
        self.anchor_hop = INF  # last finite hop count, kept while the upstream is itself repairing
        self.tree_heard = -INF  # last time the upstream confirmed a finite path to the leader
        self.group_seq = 0
        self.last_heard = {}
        self.rreq_seq = 0
        self.seen_rreq = set()
        self.reverse = {}   # (requester, rreq seq) -> previous hop toward requester
        self.forward = {}   # (requester, rreq seq, replier) -> next hop toward replier
        self.relayed_rrep = {}
        self.pending = None
        self.hello_seen = {}
        self.hello_timer = None
        self.check_timer = None
        self.merge_blocked_until = -1
        self.control_counts = {}

    # -- helpers --------------------------------------------------------
    @property
    def timeout_us(self) -> int:
        return to_us(self.cfg.hello_interval * self.cfg.allowed_hello_loss)

    def _send(self, msg: ControlMessage) -> None:
        self.control_counts[msg.kind] = self.control_counts.get(msg.kind, 0) + 1
        self.transmit(self.control(msg.kind, SIZES[msg.kind], msg))

    def _set_hop(self, hop: int) -> None:
        self.hop = hop
        if hop < INF:
            self.anchor_hop = hop

    def _anchored(self) -> bool:
        """Our path to the leader was confirmed recently enough to offer it to others."""
        if self.leader:
            return True
        return self.hop < INF and self.sim.now - self.tree_heard <= self.timeout_us // 2

    def _needed(self) -> bool:
        return self.is_member() or self.sender or bool(self.downstream)

    def tree_neighbors(self) -> set:
        out = set(self.downstream)
        if self.upstream is not None:
            out.add(self.upstream)
        return out

    # -- membership -----------------------------------------------------
    def join(self, now: int) -> None:
        self.joined_at = now
        if self.on_tree or self.pending is not None:
            return
        self._start_request(JOIN)

    def start_source(self) -> None:
        """The data source rides on the tree as a non-member router."""
        self.sender = True
        if not self.on_tree and self.pending is None:
            self._start_request(JOIN)

    def leave(self, now: int) -> None:
        self.joined_at = None
        p = self.pending
        if p is not None and p.mode == JOIN and not self.sender:
            self._cancel_pending()
        self._maybe_prune()

    def _maybe_prune(self) -> None:
        """Retract this node from the tree if nothing keeps it there."""
        if not self.on_tree or self._needed():
            return
        if self.pending is not None:
            self._cancel_pending()
        if self.upstream is not None:
            self._send(ControlMessage(PRUNE, 1, self.node, dest=self.upstream, next_hop=self.upstream))
        self._leave_tree()

    def _leave_tree(self) -> None:
        self.on_tree = False
        self.leader = False
        self.leader_id = -1
        self.upstream = None
        self.downstream.clear()
        self.hop = self.anchor_hop = INF
        self.sim.cancel(self.hello_timer)
        self.sim.cancel(self.check_timer)
        self.hello_timer = self.check_timer = None

    def _cancel_pending(self) -> None:
        if self.pending is not None:
            self.sim.cancel(self.pending.timer)
            self.pending = None

    # -- leader -----------------------------------------------------------
    def _become_leader(self) -> None:
        self.on_tree = True
        self.leader = True
        self.leader_id = self.node
        self.upstream = None
        self._set_hop(0)
        self._ensure_check_timer()
        if self.hello_timer is None:
            self._hello()

    def _hello(self) -> None:
        self.hello_timer = None
        if not self.leader:
            return
        self.group_seq += 1
        self.hello_seen[self.node] = self.group_seq
        self._send(ControlMessage(GHELLO, 1, self.node, seq=self.group_seq, ttl=self.cfg.ttl,
                                  group_seq=self.group_seq, leader=self.node, tree_hops=0,
                                  relay_on_tree=True, relay_upstream=-1, relay_leader=self.node))
        self.hello_timer = self.sim.timer(to_us(self.cfg.hello_interval), self._hello)

    # -- route request / reply / activation -----------------------------
    def _start_request(self, mode: str, max_tree_hops: int = INF, merge_leader: int = -1) -> None:
        self.pending = Pending(mode, 0, max_tree_hops=max_tree_hops, merge_leader=merge_leader)
        self._send_request()

    def _send_request(self) -> None:
        p = self.pending
        self.rreq_seq += 1
        p.seq = self.rreq_seq
        p.replies = []
        self.seen_rreq.add((self.node, p.seq))
        self._send(ControlMessage(RREQ, 1, self.node, seq=p.seq, ttl=self.cfg.ttl,
                                  group_seq=self.group_seq, max_tree_hops=p.max_tree_hops,
                                  merge_leader=p.merge_leader))
        wait = to_us(self.cfg.rreq_wait * (2 ** p.attempt))
        p.timer = self.sim.timer(wait, self._request_timeout, p.seq)

    def _request_timeout(self, seq: int) -> None:
        p = self.pending
        if p is None or p.seq != seq:
            return
        if p.replies:
            best = max(p.replies, key=Reply.rank)
            self.pending = None
            self._graft(best, seq, p.mode)
            return
        if p.attempt < self.cfg.rreq_retries:
            p.attempt += 1
            self._send_request()
            return
        self.pending = None
        if p.mode == MERGE:
            # stay leader of this partition; try again a few hellos later
            self.merge_blocked_until = self.sim.now + self.timeout_us
        elif self._needed():
            self._become_leader()
        else:
            self._leave_tree()

    def _graft(self, best: Reply, seq: int, mode: str) -> None:
        now = self.sim.now
        if self.leader:
            self.leader = False
            self.sim.cancel(self.hello_timer)
            self.hello_timer = None
        self.on_tree = True
        self.upstream = best.via
        self.downstream.discard(best.via)
        self.leader_id = best.leader
        self._set_hop(best.tree_hops + best.hop_count)
        self.tree_heard = now
        self.group_seq = max(self.group_seq, best.group_seq)
        self.last_heard[best.via] = now
        self._send(ControlMessage(MACT, 1, self.node, dest=best.replier, seq=seq, hop_count=1,
                                  next_hop=best.via, leader=best.leader, tree_hops=self.hop,
                                  merge_leader=best.leader if mode == MERGE else -1))
        self._ensure_check_timer()

    def _on_rreq(self, pkt: Packet, msg: ControlMessage) -> None:
        key = (msg.origin, msg.seq)
        if key in self.seen_rreq:
            return
        self.seen_rreq.add(key)
        prev = pkt.sender
        self.reverse[key] = prev
        if self.on_tree and msg.merge_leader >= 0 and self.leader_id == msg.origin:
            # our own leader is looking for the other tree; pass it outward
            pass
        elif self.on_tree:
            eligible = (self.pending is None and self.hop <= msg.max_tree_hops and self._anchored()
                        and (msg.merge_leader < 0 or msg.merge_leader == self.leader_id))
            if eligible:
                self._send(ControlMessage(RREP, 1, self.node, dest=msg.origin, seq=msg.seq, hop_count=1,
                                          next_hop=prev, group_seq=self.group_seq, leader=self.leader_id,
                                          tree_hops=self.hop))
            return
        if msg.ttl > 1:
            fwd = replace(msg, hop_count=msg.hop_count + 1, ttl=msg.ttl - 1)
            self.later(self._send, fwd)
        else:
            self.drop(pkt, "ttl")

    def _on_rrep(self, pkt: Packet, msg: ControlMessage) -> None:
        if msg.dest == self.node:
            p = self.pending
            if p is not None and p.seq == msg.seq:
                p.replies.append(Reply(msg.group_seq, msg.hop_count, msg.origin, pkt.sender,
                                       msg.leader, msg.tree_hops))
            return
        key = (msg.dest, msg.seq)
        prev = self.reverse.get(key)
        if prev is None:
            self.drop(pkt, "noroute")
            return
        rank = (msg.group_seq, -msg.hop_count, -msg.origin)
        best = self.relayed_rrep.get(key)
        if best is not None and best >= rank:
            return
        self.relayed_rrep[key] = rank
        self.forward[(msg.dest, msg.seq, msg.origin)] = pkt.sender
        self._send(replace(msg, hop_count=msg.hop_count + 1, next_hop=prev))

    def _on_mact(self, pkt: Packet, msg: ControlMessage) -> None:
        now = self.sim.now
        child = pkt.sender
        if (self.on_tree and msg.dest != self.node and msg.merge_leader >= 0
                and self.leader_id == msg.origin):
            self._reorient(pkt, msg)
            return
        if msg.dest == self.node or self.on_tree:
            if not self.on_tree:
                return  # replier left the tree meanwhile; requester will time out
            if child == self.upstream:
                return
            self.downstream.add(child)
            self.last_heard[child] = now
            return
        nxt = self.forward.get((msg.origin, msg.seq, msg.dest))
        if nxt is None:
            self.drop(pkt, "noroute")
            return
        self.on_tree = True
        self.upstream = nxt
        self.downstream = {child}
        self.leader_id = msg.leader
        self._set_hop(msg.tree_hops - 1 if msg.tree_hops < INF else INF)
        self.tree_heard = now
        self.last_heard[nxt] = now
        self.last_heard[child] = now
        self._send(replace(msg, next_hop=nxt, hop_count=msg.hop_count + 1, tree_hops=self.hop))
        self._ensure_check_timer()

    def _reorient(self, pkt: Packet, msg: ControlMessage) -> None:
        """A merge activation crosses our tree: point upstream along its path."""
        now = self.sim.now
        child = pkt.sender
        nxt = self.forward.get((msg.origin, msg.seq, msg.dest))
        self.downstream.add(child)
        self.last_heard[child] = now
        if nxt is None:
            # the path is gone past this point; hold the merged part as its leader
            self.drop(pkt, "noroute")
            self._become_leader()
            return
        self.upstream = nxt
        self.downstream.discard(nxt)
        self.leader_id = msg.leader
        self._set_hop(msg.tree_hops - 1 if msg.tree_hops < INF else INF)
        self.tree_heard = now
        self.last_heard[nxt] = now
        self._send(replace(msg, next_hop=nxt, hop_count=msg.hop_count + 1, tree_hops=self.hop))

    def _on_prune(self, pkt: Packet, msg: ControlMessage) -> None:
        self.downstream.discard(pkt.sender)
        self._maybe_prune()

    # -- group hello ------------------------------------------------------
    def _on_hello(self, pkt: Packet, msg: ControlMessage) -> None:
        self._note_tree_neighbor(pkt.sender, msg)
        L, s = msg.leader, msg.seq
        prev = self.hello_seen.get(L)
        if prev is not None and s <= prev:
            if s < prev:
                self.drop(pkt, "stale")
            return
        self.hello_seen[L] = s
        if self.on_tree and L == self.leader_id and s > self.group_seq:
            self.group_seq = s
        if (self.leader and L > self.node and self.pending is None
                and self.sim.now >= self.merge_blocked_until):
            self._start_request(MERGE, merge_leader=L)
        if msg.ttl > 1:
            self.later(self._relay_hello, msg)

    def _relay_hello(self, msg: ControlMessage) -> None:
        self._send(replace(msg, hop_count=msg.hop_count + 1, ttl=msg.ttl - 1,
                           relay_on_tree=self.on_tree, tree_hops=self.hop,
                           relay_upstream=-1 if self.upstream is None else self.upstream,
                           relay_leader=self.leader_id))

    def _note_tree_neighbor(self, nbr: int, msg: ControlMessage) -> None:
        if not self.on_tree:
            return
        if nbr == self.upstream:
            if msg.relay_on_tree and msg.relay_upstream != self.node:
                self.last_heard[nbr] = self.sim.now
                self._set_hop(msg.tree_hops + 1 if msg.tree_hops < INF else INF)
                self.leader_id = msg.relay_leader
                if msg.tree_hops < INF:
                    self.tree_heard = self.sim.now
        elif nbr in self.downstream:
            if msg.relay_on_tree and msg.relay_upstream == self.node:
                self.last_heard[nbr] = self.sim.now
            elif msg.relay_upstream != -1 or not msg.relay_on_tree:
                # it re-attached elsewhere or fell off the tree
                self.downstream.discard(nbr)
                self._maybe_prune()

    # -- link maintenance -------------------------------------------------
    def _ensure_check_timer(self) -> None:
        if self.check_timer is None:
            self.check_timer = self.sim.timer(to_us(self.cfg.hello_interval), self._check_links)

    def _check_links(self) -> None:
        self.check_timer = None
        if not self.on_tree:
            return
        now = self.sim.now
        timeout = self.timeout_us
        for d in sorted(self.downstream):
            if now - self.last_heard.get(d, -INF) > timeout:
                self.downstream.discard(d)
        self._maybe_prune()
        if not self.on_tree:
            return
        if self.upstream is not None and self.pending is None:
            # INF means the upstream is repairing: wait for it. A finite hop
            # count beyond the TTL can only come from an upstream loop.
            looped = self.cfg.ttl < self.hop < INF
            if now - self.last_heard.get(self.upstream, -INF) > timeout or looped:
                self.repair_link()
        self._ensure_check_timer()

    def repair_link(self) -> None:
        """Upstream lost: re-join toward a tree node closer to the leader."""
        self.upstream = None
        self.hop = INF
        if not self._needed():
            self._leave_tree()
            return
        # only nodes no farther from the leader than we were may answer, which
        # keeps our own subtree (all farther away) from being grafted onto us
        self._start_request(REPAIR, max_tree_hops=min(self.anchor_hop, self.cfg.ttl))

    # -- data -------------------------------------------------------------
    def originate(self, pkt: Packet) -> None:
        self.seen.add((pkt.origin, pkt.seq))
        if self.on_tree:
            self.transmit(pkt)
        else:
            self.no_route(pkt)

    def _on_data(self, pkt: Packet) -> None:
        if not self.on_tree:
            return
        frm = pkt.sender
        if frm != self.upstream and frm not in self.downstream:
            return
        self.last_heard[frm] = self.sim.now
        key = (pkt.origin, pkt.seq)
        if key in self.seen:
            return
        self.seen.add(key)
        self.deliver(pkt)
        if self.downstream - {frm} or (self.upstream is not None and self.upstream != frm):
            self.transmit(Packet(pkt.proto, pkt.kind, pkt.origin, pkt.seq, pkt.size, pkt.group,
                                 pkt.created, self.node, DataHeader()))

    # -- dispatch ---------------------------------------------------------
    def receive(self, pkt: Packet) -> None:
        if pkt.proto == "data":
            self._on_data(pkt)
            return
        msg = pkt.header
        kind = msg.kind
        if kind == GHELLO:
            self._on_hello(pkt, msg)
        elif kind == RREQ:
            self._on_rreq(pkt, msg)
        elif msg.next_hop != self.node:
            return  # addressed to someone else
        elif kind == RREP:
            self._on_rrep(pkt, msg)
        elif kind == MACT:
            self._on_mact(pkt, msg)
        elif kind == PRUNE:
            self._on_prune(pkt, msg)


def check_tree(agents) -> list[str]:
    """Structural problems in the (upstream, downstream) links; empty when sound.

    Checks that links are mutual, that upstream chains end at a leader
    without looping, that every non-leader tree node has an upstream and
    that every member sits on the tree.
    """
    problems = []
    by_id = {a.node: a for a in agents}
    for a in agents:
        if a.is_member() and not a.on_tree:
            problems.append(f"member {a.node} is off the tree")
        if not a.on_tree:
            if a.upstream is not None or a.downstream:
                problems.append(f"off-tree node {a.node} keeps links")
            continue
        if a.leader:
            if a.upstream is not None:
                problems.append(f"leader {a.node} has upstream {a.upstream}")
        elif a.upstream is None:
            problems.append(f"tree node {a.node} has no upstream")
        if a.upstream is not None:
            up = by_id[a.upstream]
            if not up.on_tree or a.node not in up.downstream:
                problems.append(f"link {a.node}->{a.upstream} not mirrored")
        for d in a.downstream:
            if by_id[d].upstream != a.node:
                problems.append(f"downstream {d} of {a.node} points elsewhere")
        seen = {a.node}
        cur = a
        while cur.upstream is not None:
            if cur.upstream in seen:
                problems.append(f"upstream cycle through {a.node}")
                break
            seen.add(cur.upstream)
            cur = by_id[cur.upstream]
        else:
            if not cur.leader:
                problems.append(f"chain from {a.node} ends at non-leader {cur.node}")
    return problems
