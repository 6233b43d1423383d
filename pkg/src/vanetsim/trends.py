"""Qualitative protocol-comparison checks over a results CSV."""

import csv
import math
import re
import statistics
from collections import defaultdict
from dataclasses import dataclass

from .matrix import LISTENER_LEVELS, SESSION_LEVELS

SEED_RE = re.compile(r"-seed(\d+)$")


class IncompleteMatrix(ValueError):
    pass


@dataclass
class Row:
    scenario: str
    protocol: str
    listeners: int
    sessions: int
    seed: int
    pdr: float
    avg_eed: float
    throughput: float
    nrl: float


@dataclass
class TrendResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def read_rows(path) -> list[Row]:
    with open(path, newline="", encoding="ascii") as fh:
        return parse_rows(fh.read().splitlines())


def parse_rows(lines) -> list[Row]:
    out = []
    for rec in csv.DictReader(lines):
        m = SEED_RE.search(rec["scenario"])
        out.append(Row(rec["scenario"], rec["protocol"], int(rec["listeners"]), int(rec["sessions"]),
                       int(m.group(1)) if m else 0, float(rec["pdr"]), float(rec["avg_eed_s"]),
                       float(rec["throughput_kbps"]), float(rec["nrl"])))
    return out


class Matrix:
    """Rows indexed by (protocol, listeners, sessions, seed)."""

    def __init__(self, rows: list[Row], cells=None):
        self.index = {(r.protocol, r.listeners, r.sessions, r.seed): r for r in rows}
        self.cells = cells or [(l, s) for l in LISTENER_LEVELS for s in SESSION_LEVELS]
        self.seeds = sorted({r.seed for r in rows})
        missing = []
        for l, s in self.cells:
            for seed in self.seeds or [None]:
                for proto in ("maodv", "puma"):
                    if (proto, l, s, seed) not in self.index:
                        missing.append(f"{proto} L={l} S={s} seed={seed}")
        if missing:
            raise IncompleteMatrix("missing rows: " + ", ".join(missing))

    def get(self, proto, l, s, seed) -> Row:
        return self.index[(proto, l, s, seed)]

    def mean(self, proto, l, s, metric) -> float:
        return statistics.fmean(getattr(self.get(proto, l, s, k), metric) for k in self.seeds)


def _majority(wins: int, total: int) -> bool:
    return wins * 2 > total


def throughput_ordering(m: Matrix) -> TrendResult:
    bad = []
    for l, s in m.cells:
        if l < 20:
            continue
        wins = sum(m.get("puma", l, s, k).throughput > m.get("maodv", l, s, k).throughput for k in m.seeds)
        if not _majority(wins, len(m.seeds)):
            bad.append(f"L={l} S={s} ({wins}/{len(m.seeds)})")
    return TrendResult("throughput ordering (PUMA > MAODV, L>=20)", not bad,
                       "all cells" if not bad else "fails in " + ", ".join(bad))


def throughput_scaling(m: Matrix, sessions: int = 5, factor: float = 2.5) -> TrendResult:
    lo, hi = min(LISTENER_LEVELS), max(LISTENER_LEVELS)
    pf = m.mean("puma", hi, sessions, "throughput") / m.mean("puma", lo, sessions, "throughput")
    mf = m.mean("maodv", hi, sessions, "throughput") / m.mean("maodv", lo, sessions, "throughput")
    ok = pf >= factor and mf < pf
    return TrendResult(f"throughput scaling L={lo}->{hi} (S={sessions})", ok,
                       f"PUMA x{pf:.2f} (need >= {factor}), MAODV x{mf:.2f} (need < PUMA)")


def nrl_trends(m: Matrix, slack: float = 0.10) -> TrendResult:
    problems = []
    for s in SESSION_LEVELS:
        vals = [m.mean("puma", l, s, "nrl") for l in LISTENER_LEVELS]
        for (l0, a), (l1, b) in zip(zip(LISTENER_LEVELS, vals), zip(LISTENER_LEVELS[1:], vals[1:])):
            if b > a * (1 + slack):
                problems.append(f"PUMA S={s} L{l0}->{l1} {a:.3f}->{b:.3f}")
        if not vals[-1] < 0.5 * vals[0]:
            problems.append(f"PUMA S={s} L60 {vals[-1]:.3f} not < half of L10 {vals[0]:.3f}")
    for l in LISTENER_LEVELS:
        vals = [m.mean("maodv", l, s, "nrl") for s in SESSION_LEVELS]
        for (s0, a), (s1, b) in zip(zip(SESSION_LEVELS, vals), zip(SESSION_LEVELS[1:], vals[1:])):
            if b < a * (1 - slack):
                problems.append(f"MAODV L={l} S{s0}->{s1} {a:.3f}->{b:.3f}")
    return TrendResult("NRL trends", not problems, "ok" if not problems else "; ".join(problems))


def pdr_ordering(m: Matrix) -> TrendResult:
    bad = []
    out_of_range = []
    for l, s in m.cells:
        wins = 0
        for k in m.seeds:
            p, q = m.get("puma", l, s, k).pdr, m.get("maodv", l, s, k).pdr
            wins += p > q
            for proto, v in (("puma", p), ("maodv", q)):
                if not (0 < v <= 1):
                    out_of_range.append(f"{proto} L={l} S={s} seed={k} pdr={v}")
        if not _majority(wins, len(m.seeds)):
            bad.append(f"L={l} S={s} ({wins}/{len(m.seeds)})")
    detail = []
    if bad:
        detail.append("PUMA not ahead in " + ", ".join(bad))
    if out_of_range:
        detail.append("out of (0,1]: " + ", ".join(out_of_range))
    return TrendResult("PDR ordering (PUMA > MAODV, all cells)", not detail, "; ".join(detail) or "all cells")


def delay_band(m: Matrix, lo: float = 0.020, hi: float = 0.120, max_gap: float = 0.015) -> TrendResult:
    outside = []
    gaps = []
    for l, s in m.cells:
        for proto in ("maodv", "puma"):
            v = m.mean(proto, l, s, "avg_eed")
            if math.isnan(v) or not lo <= v <= hi:
                outside.append(f"{proto} L={l} S={s} {v * 1000:.1f}ms")
        for k in m.seeds:
            gaps.append(abs(m.get("puma", l, s, k).avg_eed - m.get("maodv", l, s, k).avg_eed))
    gap = statistics.median(gaps)
    ok = not outside and gap < max_gap
    detail = f"median |PUMA-MAODV| {gap * 1000:.1f}ms (need < {max_gap * 1000:.0f}ms)"
    if outside:
        detail += f"; {len(outside)} cell values outside [{lo * 1000:.0f}, {hi * 1000:.0f}]ms: " + ", ".join(outside)
    return TrendResult("average delay band", ok, detail)


CHECKS = {
    "throughput-ordering": throughput_ordering,
    "throughput-scaling": throughput_scaling,
    "nrl": nrl_trends,
    "pdr-ordering": pdr_ordering,
    "delay-band": delay_band,
}


def report_trends(rows: list[Row], only=None) -> list[TrendResult]:
    m = Matrix(rows)
    names = only or list(CHECKS)
    return [CHECKS[n](m) for n in names]
