"""TR trace files and the four QoS analyzers.

Trace line layout (space separated, one record per line)::

    op time node origin:seq proto kind size group detail

``op`` is ``s`` (transmission), ``r`` (application delivery at a listener),
``d`` (drop) or ``sess`` (listener join/leave). ``time`` is seconds with
exactly six decimals. ``detail`` is ``-`` unless the record is a drop, in
which case it names the reason. Control transmissions carry
``proto`` = ``maodv``/``puma``; data carries ``proto`` = ``data``.

Every number reported by the simulator is computed from this file alone.
"""

import bisect
import math
import re
from dataclasses import dataclass, field
from collections.abc import Sequence
from itertools import repeat
from typing import Iterable, NamedTuple

import numpy as np

from .engine import US_PER_S, fmt_time

OPS = ("s", "r", "d", "sess")
PROTOS = ("data", "maodv", "puma")
N_FIELDS = 9


class MalformedRecord(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MetricUndefined(ValueError):
    pass


class PdrUndefined(MetricUndefined):
    pass


class EedUndefined(MetricUndefined):
    pass


class ThroughputUndefined(MetricUndefined):
    pass


class NrlUndefined(MetricUndefined):
    pass


class MembershipAccountingError(AssertionError):
    pass


class TraceRecord(NamedTuple):
    op: str
    time_us: int
    node: int
    origin: int
    seq: int
    proto: str
    kind: str
    size: int
    group: int
    detail: str = "-"

    @property
    def time(self) -> float:
        return self.time_us / US_PER_S

    @property
    def pkt_id(self) -> tuple[int, int]:
        return (self.origin, self.seq)


def format_record(rec: TraceRecord) -> str:
    return (f"{rec.op} {fmt_time(rec.time_us)} {rec.node} {rec.origin}:{rec.seq} "
            f"{rec.proto} {rec.kind} {rec.size} {rec.group} {rec.detail}")


class TraceWriter:
    """Collects trace lines in memory; flushed to disk once at run end."""

    def __init__(self):
        self.lines = []

    def send(self, t: int, node: int, pkt) -> None:
        self.lines.append(f"s {fmt_time(t)} {node} {pkt.origin}:{pkt.seq} {pkt.proto} {pkt.kind} "
                          f"{pkt.size} {pkt.group} -")

    def recv(self, t: int, node: int, pkt) -> None:
        self.lines.append(f"r {fmt_time(t)} {node} {pkt.origin}:{pkt.seq} {pkt.proto} {pkt.kind} "
                          f"{pkt.size} {pkt.group} -")

    def drop(self, t: int, node: int, pkt, reason: str) -> None:
        self.lines.append(f"d {fmt_time(t)} {node} {pkt.origin}:{pkt.seq} {pkt.proto} {pkt.kind} "
                          f"{pkt.size} {pkt.group} {reason}")

    def session(self, t: int, node: int, proto: str, kind: str, index: int, group: int) -> None:
        self.lines.append(f"sess {fmt_time(t)} {node} {node}:{index} {proto} {kind} 0 {group} -")

    def record(self, rec: TraceRecord) -> None:
        self.lines.append(format_record(rec))

    def text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")

    def write(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.text())


_OPS = frozenset(OPS)
_PROTOS = frozenset(PROTOS)
_TIME_COL = re.compile(r"(?:\d+\.\d{6} )*")
_PKT_COL = re.compile(r"(?:\d+:\d+ )*")


class Trace(Sequence):
    """Parsed trace held column-wise; indexing and iteration yield TraceRecords."""

    __slots__ = ("op", "time_us", "node", "origin", "seq", "proto", "kind", "size", "group", "detail")

    def __init__(self, op, time_us, node, origin, seq, proto, kind, size, group, detail):
        self.op = op
        self.time_us = time_us
        self.node = node
        self.origin = origin
        self.seq = seq
        self.proto = proto
        self.kind = kind
        self.size = size
        self.group = group
        self.detail = detail

    @classmethod
    def from_records(cls, records) -> "Trace":
        records = list(records)
        if not records:
            return cls(*([] for _ in range(10)))
        return cls(*(list(col) for col in zip(*records)))

    def columns(self):
        return (self.op, self.time_us, self.node, self.origin, self.seq, self.proto,
                self.kind, self.size, self.group, self.detail)

    def __len__(self):
        return len(self.op)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        return TraceRecord(*(col[i] for col in self.columns()))

    def __iter__(self):
        return map(TraceRecord._make, zip(*self.columns()))

    def __eq__(self, other):
        if isinstance(other, Trace):
            return self.columns() == other.columns()
        return list(self) == list(other)


def parse_text(text: str | bytes) -> Trace:
    """Strictly parse a whole trace; raises MalformedRecord with a 1-based line number.

    Fields are separated by exactly one space and every line, including the
    last, ends with a newline. Well-formed text is converted column by
    column; anything the bulk checks reject is re-parsed line by line to
    find and report the first bad line.
    """
    if isinstance(text, str):
        try:
            data = text.encode("ascii")
        except UnicodeEncodeError:
            return _parse_rows(text)
    else:
        data = text
    trace = _parse_columns(data)
    if trace is None:
        if isinstance(text, bytes):
            text = text.decode("ascii", errors="surrogateescape")
        trace = _parse_rows(text)
    return trace


def parse_lines(lines: Iterable[str]) -> Trace:
    lines = list(lines)
    return parse_text("\n".join(lines) + "\n" if lines else "")


def _parse_columns(data: bytes):
    if not data:
        return Trace.from_records([])
    if not data.endswith(b"\n"):
        return None
    buf = np.frombuffer(data, dtype=np.uint8)
    if ((buf == 9) | (buf == 13) | (buf > 127)).any():
        return None
    newlines = np.flatnonzero(buf == 10)
    spaces = np.flatnonzero(buf == 32)
    n = len(newlines)
    if len(spaces) != 8 * n or (np.diff(np.searchsorted(spaces, newlines), prepend=0) != 8).any():
        return None
    sp = spaces.reshape(n, 8)
    # every field non-empty rules out leading, trailing and doubled spaces
    bounds = np.empty((n, 10), dtype=np.int64)
    bounds[0, 0] = -1
    bounds[1:, 0] = newlines[:-1]
    bounds[:, 1:9] = sp
    bounds[:, 9] = newlines
    if (np.diff(bounds, axis=1) < 2).any():
        return None
    # time: digits '.' six digits, i.e. the dot sits 7 bytes before the field end
    dot = sp[:, 1] - 7
    if (dot - sp[:, 0] < 2).any() or (buf[dot] != 46).any():
        return None
    # packet id: exactly one ':' inside field 3, with digits on both sides
    colons = np.flatnonzero(buf == 58)
    field = np.searchsorted(spaces, colons)
    colons = colons[field % 8 == 3]
    if (len(colons) != n or (colons < sp[:, 2] + 2).any() or (colons > sp[:, 3] - 2).any()):
        return None
    # numeric fields straight from the bytes; field k spans (bounds[:, k], bounds[:, k+1])
    try:
        times_us = _digits(buf, sp[:, 0] + 1, dot) * US_PER_S + _digits(buf, dot + 1, sp[:, 1])
        nodes = _digits(buf, sp[:, 1] + 1, sp[:, 2])
        origins = _digits(buf, sp[:, 2] + 1, colons)
        seqs = _digits(buf, colons + 1, sp[:, 3])
        sizes = _digits(buf, sp[:, 5] + 1, sp[:, 6])
        groups = _digits(buf, sp[:, 6] + 1, sp[:, 7])
    except ValueError:
        return None
    op_names, op_codes = _intern(buf, bounds[:, 0] + 1, sp[:, 0])
    proto_names, proto_codes = _intern(buf, sp[:, 3] + 1, sp[:, 4])
    if not _OPS.issuperset(op_names) or not _PROTOS.issuperset(proto_names):
        return None
    op_ids = np.array([_OP_CODE[x] for x in op_names], dtype=np.int64)[op_codes]
    proto_ids = np.array([_PROTO_CODE[x] for x in proto_names], dtype=np.int64)[proto_codes]
    if not _causal(op_ids, origins, seqs, proto_ids):
        return None
    return Trace(_expand(op_names, op_codes), times_us.tolist(), nodes.tolist(), origins.tolist(),
                 seqs.tolist(), _expand(proto_names, proto_codes),
                 _expand(*_intern(buf, sp[:, 4] + 1, sp[:, 5])), sizes.tolist(), groups.tolist(),
                 _expand(*_intern(buf, sp[:, 7] + 1, newlines)))


def _intern(buf, start, end):
    """Distinct strings among the runs buf[start:end] and each run's index into them."""
    width = end - start
    w = int(width.max())
    idx = start[:, None] + np.arange(w)[None, :]
    win = buf[np.minimum(idx, len(buf) - 1)]
    win[idx >= end[:, None]] = 0
    if w <= 8:
        # pack the bytes into one integer per run, which is an exact key
        packed = np.zeros((len(start), 8), dtype=np.uint8)
        packed[:, :w] = win
        keys, first, codes = np.unique(packed.view(np.uint64).ravel(), return_index=True,
                                       return_inverse=True)
    else:
        key = np.zeros(len(start), dtype=np.uint64)
        for j in range(w):
            key = key * np.uint64(1_000_003) + win[:, j]
        keys, first, codes = np.unique(key, return_index=True, return_inverse=True)
        if (win != win[first[codes]]).any():
            return _intern_exact(buf, start, end)
    names = [buf[start[i]:end[i]].tobytes().decode("ascii") for i in first]
    return names, codes.ravel()


def _intern_exact(buf, start, end):
    table = {}
    codes = np.fromiter((table.setdefault(buf[a:b].tobytes(), len(table)) for a, b in zip(start, end)),
                        dtype=np.int64, count=len(start))
    return [k.decode("ascii") for k in table], codes


def _expand(names, codes) -> list:
    return np.array(names, dtype=object)[codes].tolist()


def _digits(buf, start, end):
    """Decimal values of the digit runs buf[start:end]; ValueError on non-digits."""
    width = end - start
    if (width < 1).any() or (width > 18).any():
        raise ValueError("bad numeric field width")
    narrowest, w = int(width.min()), int(width.max())
    acc = np.zeros(len(end), dtype=np.int64)
    # walk the runs right-aligned; positions before a run's start contribute nothing
    for j in range(w, 0, -1):
        if j <= narrowest:
            d = buf[end - j] - np.uint8(48)  # non-digits wrap above 9
            if (d > 9).any():
                raise ValueError("non-digit in numeric field")
        else:
            inside = j <= width
            d = buf[np.maximum(end - j, 0)] - np.uint8(48)
            if (inside & (d > 9)).any():
                raise ValueError("non-digit in numeric field")
            d[~inside] = 0
        acc *= 10
        acc += d
    return acc


_PROTO_CODE = {p: k for k, p in enumerate(PROTOS)}


def _causal(ops, origins, seqs, protos) -> bool:
    """True when every r record follows an s record of the same (origin, seq, proto).

    ops and protos are integer codes from _OP_CODE and _PROTO_CODE.
    """
    if origins.max() >= 1 << 20 or seqs.max() >= 1 << 40:
        return False  # let the row parser handle unusual ids
    key = (origins << 42) | (seqs << 2) | protos
    s_idx = np.flatnonzero(ops == 0)
    r_idx = np.flatnonzero(ops == 1)
    if not len(r_idx):
        return True
    if not len(s_idx):
        return False
    uniq, first = np.unique(key[s_idx], return_index=True)
    r_key = key[r_idx]
    pos = np.minimum(np.searchsorted(uniq, r_key), len(uniq) - 1)
    return bool(((uniq[pos] == r_key) & (s_idx[first[pos]] < r_idx)).all())


_OP_CODE = {"s": 0, "r": 1, "d": 2, "sess": 3}


def _parse_time(tok: str, lineno: int) -> int:
    sec, dot, frac = tok.partition(".")
    if not dot or len(frac) != 6 or not sec.isdigit() or not frac.isdigit() or not tok.isascii():
        raise MalformedRecord(lineno, f"bad time {tok!r}")
    return int(sec) * US_PER_S + int(frac)


def _parse_int(tok: str, what: str, lineno: int) -> int:
    if not tok.isdigit() or not tok.isascii():
        raise MalformedRecord(lineno, f"bad {what} {tok!r}")
    return int(tok)


def _parse_rows(text: str) -> Trace:
    lines = text.split("\n")
    if lines[-1] != "":
        raise MalformedRecord(len(lines), "truncated final line (no newline)")
    lines.pop()
    records = []
    sent = set()
    for lineno, line in enumerate(lines, 1):
        parts = line.split(" ")
        if len(parts) != N_FIELDS or "" in parts:
            raise MalformedRecord(lineno, f"expected {N_FIELDS} single-space separated fields")
        op, t, node, pkt, proto, kind, size, group, detail = parts
        if op not in _OPS:
            raise MalformedRecord(lineno, f"unknown op {op!r}")
        if proto not in _PROTOS:
            raise MalformedRecord(lineno, f"unknown proto {proto!r}")
        origin, sep, seq = pkt.partition(":")
        if not sep:
            raise MalformedRecord(lineno, f"bad packet id {pkt!r}")
        if not line.isascii() or "\t" in line or "\r" in line:
            raise MalformedRecord(lineno, "non-ascii or control characters")
        rec = TraceRecord(op, _parse_time(t, lineno), _parse_int(node, "node", lineno),
                          _parse_int(origin, "origin", lineno), _parse_int(seq, "seq", lineno),
                          proto, kind, _parse_int(size, "size", lineno),
                          _parse_int(group, "group", lineno), detail)
        key = (rec.origin, rec.seq, proto)
        if op == "s":
            sent.add(key)
        elif op == "r" and key not in sent:
            raise MalformedRecord(lineno, f"receive of {pkt} before any send")
        records.append(rec)
    return Trace.from_records(records)


def parse_trace(path) -> Trace:
    with open(path, "rb") as fh:
        return parse_text(fh.read())


@dataclass
class TraceSummary:
    """Everything the analyzers need, gathered in one pass over a trace."""

    emissions: dict = field(default_factory=dict)   # pkt id -> (time_us, size) at origin
    first_send: dict = field(default_factory=dict)  # pkt id -> first data send time (any node)
    receptions: dict = field(default_factory=dict)  # (node, pkt id) -> first receive time
    recv_size: dict = field(default_factory=dict)   # (node, pkt id) -> size
    control_sends: int = 0
    membership: dict = field(default_factory=dict)  # node -> list of [join, leave)

    def creation(self, pkt) -> int:
        em = self.emissions.get(pkt)
        return em[0] if em is not None else self.first_send[pkt]

    def emission_times(self) -> list[int]:
        return sorted(t for t, _ in self.emissions.values())

    def expected(self) -> int:
        times = self.emission_times()
        total = 0
        for intervals in self.membership.values():
            for join, leave in intervals:
                total += bisect.bisect_left(times, leave) - bisect.bisect_left(times, join)
        return total


INF_TIME = 1 << 62


def summarize(records: Iterable[TraceRecord]) -> TraceSummary:
    s = TraceSummary()
    open_join = {}
    first_send = s.first_send
    emissions = s.emissions
    receptions = s.receptions
    recv_size = s.recv_size
    columns = records.columns() if isinstance(records, Trace) else zip(*records)
    for op, t, node, origin, seq, proto, kind, size, _group, _detail in zip(*columns):
        if op == "s":
            if proto == "data":
                pkt = (origin, seq)
                if pkt not in first_send:
                    first_send[pkt] = t
                if node == origin and pkt not in emissions:
                    emissions[pkt] = (t, size)
            else:
                s.control_sends += 1
        elif op == "r":
            if proto == "data":
                key = (node, (origin, seq))
                if key not in receptions:
                    receptions[key] = t
                    recv_size[key] = size
        elif op == "sess":
            if kind == "join":
                open_join.setdefault(node, t)
            elif kind == "leave" and node in open_join:
                s.membership.setdefault(node, []).append((open_join.pop(node), t))
    for node, join in open_join.items():
        s.membership.setdefault(node, []).append((join, INF_TIME))
    return s


def _summary(trace) -> TraceSummary:
    return trace if isinstance(trace, TraceSummary) else summarize(trace)


def compute_pdr(trace) -> float:
    s = _summary(trace)
    expected = s.expected()
    if expected == 0:
        raise PdrUndefined("no packets were expected at any listener")
    pdr = len(s.receptions) / expected
    if pdr > 1.0:
        raise MembershipAccountingError(f"PDR {pdr} > 1: receptions outside membership intervals")
    return pdr


def compute_avg_eed(trace, per: str = "sent") -> float:
    """Total end-to-end delay over distinct receptions divided by packets sent.

    ``per="received"`` divides by the number of distinct receptions instead.
    """
    s = _summary(trace)
    total_us = 0
    for (node, pkt), t in s.receptions.items():
        total_us += t - s.creation(pkt)
    if per == "sent":
        denom = len(s.emissions)
        if denom == 0:
            raise EedUndefined("no data packets were sent")
    elif per == "received":
        denom = len(s.receptions)
        if denom == 0:
            raise EedUndefined("no data packets were received")
    else:
        raise ValueError(f"unknown EED denominator {per!r}")
    return total_us / US_PER_S / denom


def compute_throughput(trace) -> float:
    """Received bytes over the origin send window, in Kbps (x 8/1024)."""
    s = _summary(trace)
    if not s.emissions:
        raise ThroughputUndefined("no data packets were sent")
    times = [t for t, _ in s.emissions.values()]
    window_us = max(times) - min(times)
    if window_us <= 0:
        raise ThroughputUndefined("transmission window has zero length")
    total_bytes = sum(s.recv_size.values())
    return total_bytes / (window_us / US_PER_S) * 8 / 1024


def compute_nrl(trace) -> float:
    s = _summary(trace)
    if not s.receptions:
        raise NrlUndefined("no data packets were received")
    return s.control_sends / len(s.receptions)


@dataclass
class MetricsReport:
    pdr: float
    avg_eed: float
    throughput: float
    nrl: float
    data_sent: int
    data_received: int
    control_sent: int
    expected: int

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (self.data_sent, self.data_received, self.control_sent, self.expected)

    def csv_fields(self) -> list[str]:
        return [_fmt(self.pdr), _fmt(self.avg_eed), _fmt(self.throughput), _fmt(self.nrl)]


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


def _or_nan(fn, *args, **kw) -> float:
    try:
        return fn(*args, **kw)
    except MetricUndefined:
        return math.nan


def analyze(trace, eed_per: str = "sent") -> MetricsReport:
    s = _summary(trace)
    return MetricsReport(
        pdr=_or_nan(compute_pdr, s),
        avg_eed=_or_nan(compute_avg_eed, s, per=eed_per),
        throughput=_or_nan(compute_throughput, s),
        nrl=_or_nan(compute_nrl, s),
        data_sent=len(s.emissions),
        data_received=len(s.receptions),
        control_sent=s.control_sends,
        expected=s.expected(),
    )


CSV_HEADER = ["scenario", "protocol", "listeners", "sessions", "pdr", "avg_eed_s", "throughput_kbps", "nrl"]
