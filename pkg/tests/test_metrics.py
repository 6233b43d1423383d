import math
import random
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import brute_force, random_trace
from vanetsim.metrics import (EedUndefined, MalformedRecord, MembershipAccountingError, NrlUndefined,
                              PdrUndefined, ThroughputUndefined, Trace, TraceRecord, TraceWriter,
                              analyze, compute_avg_eed, compute_nrl, compute_pdr, compute_throughput,
                              format_record, parse_lines, parse_text, parse_trace)


def t(sec):
    us = round(sec * 1e6)
    return f"{us // 1_000_000}.{us % 1_000_000:06d}"


def emit(lines, sec, seq, size=512):
    lines.append(f"s {t(sec)} 0 0:{seq} data data {size} 1 -")


def recv(lines, sec, node, seq, size=512):
    lines.append(f"r {t(sec)} {node} 0:{seq} data data {size} 1 -")


def join(lines, sec, node):
    lines.append(f"sess {t(sec)} {node} {node}:0 puma join 0 1 -")


def leave(lines, sec, node):
    lines.append(f"sess {t(sec)} {node} {node}:0 puma leave 0 1 -")


def test_pdr_counts_distinct_receptions_against_membership():
    lines = []
    join(lines, 0, 1)
    for k in range(100):
        emit(lines, 1 + k * 0.1, k)
        if k < 85:
            recv(lines, 1.01 + k * 0.1, 1, k)
            if k < 10:
                recv(lines, 1.02 + k * 0.1, 1, k)  # duplicate counts once
    assert compute_pdr(parse_lines(lines)) == pytest.approx(0.85)


def test_pdr_lossless_and_undefined():
    lines = []
    join(lines, 0, 1)
    emit(lines, 1, 0)
    recv(lines, 1.001, 1, 0)
    assert compute_pdr(parse_lines(lines)) == 1.0
    nobody = []
    emit(nobody, 1, 0)
    with pytest.raises(PdrUndefined):
        compute_pdr(parse_lines(nobody))


def test_pdr_membership_window_only():
    lines = []
    emit(lines, 1, 0)
    join(lines, 2, 1)
    emit(lines, 3, 1)
    leave(lines, 4, 1)
    emit(lines, 5, 2)
    recv(lines, 3.5, 1, 1)
    assert compute_pdr(parse_lines(sorted(lines, key=lambda l: float(l.split()[1])))) == 1.0


def test_pdr_above_one_is_an_accounting_error():
    lines = []
    join(lines, 2, 1)
    emit(lines, 1, 0)  # emitted before the join
    emit(lines, 3, 1)
    recv(lines, 3.1, 1, 0)
    recv(lines, 3.2, 1, 1)
    with pytest.raises(MembershipAccountingError):
        compute_pdr(parse_lines(sorted(lines, key=lambda l: float(l.split()[1]))))


def test_eed_examples():
    one = []
    join(one, 0, 1)
    emit(one, 1, 0)
    recv(one, 1.05, 1, 0)
    assert compute_avg_eed(parse_lines(one)) == pytest.approx(0.050)

    two = []
    join(two, 0, 1)
    emit(two, 1, 0)
    emit(two, 2, 1)
    recv(two, 1.04, 1, 0)
    recv(two, 2.06, 1, 1)
    assert compute_avg_eed(parse_lines(sorted(two, key=lambda l: float(l.split()[1])))) == pytest.approx(0.050)

    lossy = []
    join(lossy, 0, 1)
    emit(lossy, 1, 0)
    emit(lossy, 2, 1)
    recv(lossy, 2.06, 1, 1)
    records = parse_lines(lossy)
    assert compute_avg_eed(records) == pytest.approx(0.030)
    assert compute_avg_eed(records, per="received") == pytest.approx(0.060)
    with pytest.raises(EedUndefined):
        compute_avg_eed(parse_lines([]))


def test_throughput_examples():
    lines = []
    join(lines, 0, 1)
    emit(lines, 0, 0, size=256_000)
    emit(lines, 10, 1, size=256_000)
    recv(lines, 0.5, 1, 0, size=256_000)
    recv(lines, 10.5, 1, 1, size=256_000)
    records = parse_lines(sorted(lines, key=lambda l: float(l.split()[1])))
    assert compute_throughput(records) == pytest.approx(400.0)

    none = []
    emit(none, 0, 0)
    emit(none, 10, 1)
    assert compute_throughput(parse_lines(none)) == 0.0
    single = []
    emit(single, 1, 0)
    with pytest.raises(ThroughputUndefined):
        compute_throughput(parse_lines(single))


def test_nrl_examples():
    lines = []
    for k in range(100):
        lines.append(f"s {t(0.001 * k)} 5 5:{k} maodv ghello 28 1 -")
    for n in range(1, 5):
        join(lines, 0, n)
    for k in range(100):
        emit(lines, 1 + k * 0.01, k)
        for n in range(1, 5):
            recv(lines, 1.001 + k * 0.01, n, k)
    assert compute_nrl(parse_lines(lines)) == pytest.approx(0.25)
    no_control = [l for l in lines if "maodv" not in l]
    assert compute_nrl(parse_lines(no_control)) == 0.0
    with pytest.raises(NrlUndefined):
        compute_nrl(parse_lines(lines[:100]))


def test_round_trip(tmp_path):
    recs = [TraceRecord("s", 1_500_000, 3, 3, 7, "puma", "announcement", 32, 1),
            TraceRecord("s", 2_000_000, 0, 0, 0, "data", "data", 512, 1),
            TraceRecord("r", 2_000_400, 4, 0, 0, "data", "data", 512, 1),
            TraceRecord("d", 2_000_500, 9, 0, 0, "data", "data", 512, 1, "noroute"),
            TraceRecord("sess", 3_000_000, 4, 4, 0, "maodv", "join", 0, 1)]
    w = TraceWriter()
    for r in recs:
        w.record(r)
    path = tmp_path / "x.tr"
    w.write(path)
    parsed = parse_trace(path)
    assert list(parsed) == recs
    assert parsed[2] == recs[2]
    assert format_record(parsed[3]) == "d 2.000500 9 0:0 data data 512 1 noroute"


def test_truncated_final_line_reports_its_number(tmp_path):
    path = tmp_path / "cut.tr"
    path.write_text("s 0.000000 0 0:0 data data 512 1 -\ns 0.100000 0 0:1 data da")
    with pytest.raises(MalformedRecord) as err:
        parse_trace(path)
    assert err.value.line == 2


@pytest.mark.parametrize("bad, reason", [
    ("x 0.000000 0 0:0 data data 512 1 -", "op"),
    ("s 0.0000 0 0:0 data data 512 1 -", "time"),
    ("s 0.000000 0 00 data data 512 1 -", "packet"),
    ("s 0.000000 0 0:0 tcp data 512 1 -", "proto"),
    ("s 0.000000 zero 0:0 data data 512 1 -", "node"),
    ("s 0.000000 0 0:0 data data 512 1", "fields"),
    ("s 0.000000  0 0:0 data data 512 1 -", "fields"),
])
def test_malformed_lines(bad, reason):
    good = "s 0.000000 0 0:0 data data 512 1 -"
    with pytest.raises(MalformedRecord) as err:
        parse_lines([good, bad, good])
    assert err.value.line == 2


def test_receive_before_send_is_rejected():
    lines = ["r 0.100000 1 0:0 data data 512 1 -", "s 0.200000 0 0:0 data data 512 1 -"]
    with pytest.raises(MalformedRecord) as err:
        parse_lines(lines)
    assert err.value.line == 1
    # a control transmission with the same id does not count as the data send
    with pytest.raises(MalformedRecord):
        parse_lines(["s 0.000000 0 0:0 puma announcement 32 1 -", "r 0.100000 1 0:0 data data 512 1 -"])


def test_analysis_is_pure():
    lines = random_trace(random.Random(7))
    a = analyze(parse_lines(lines))
    b = analyze(parse_lines(lines))
    assert a.csv_fields() == b.csv_fields()


def test_million_record_file_parses_fast(tmp_path):
    lines = [f"s {t(i * 1e-4)} {i % 100} 0:{i} data data {256 + i % 512} 1 -" for i in range(500_000)]
    lines += [f"r {t(50 + i * 1e-4)} {i % 100} 0:{i} data data {256 + i % 512} 1 -" for i in range(500_000)]
    path = tmp_path / "big.tr"
    path.write_text("\n".join(lines) + "\n")
    del lines
    start = time.perf_counter()
    trace = parse_trace(path)
    elapsed = time.perf_counter() - start
    assert len(trace) == 1_000_000
    assert elapsed < 2.0, f"parse took {elapsed:.2f}s"


def _close(a, b):
    if b is None:
        return math.isnan(a)
    return abs(a - b) <= 1e-9 * max(1.0, abs(b))


def check_against_oracle(lines):
    report = analyze(parse_lines(lines))
    oracle = brute_force(lines)
    assert report.counts == (oracle["sent"], oracle["received"], oracle["control"], oracle["expected"])
    assert _close(report.pdr, oracle["pdr"])
    assert _close(report.avg_eed, oracle["eed"])
    assert _close(report.throughput, oracle["throughput"])
    assert _close(report.nrl, oracle["nrl"])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_analyzers_match_brute_force(seed):
    check_against_oracle(random_trace(random.Random(seed), max_records=300))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_column_and_row_parsers_agree(seed):
    from vanetsim.metrics import _parse_columns, _parse_rows

    lines = random_trace(random.Random(seed), max_records=200)
    text = "\n".join(lines) + "\n" if lines else ""
    assert _parse_columns(text.encode()) == _parse_rows(text)


def test_trace_sequence_behaviour():
    recs = [TraceRecord("s", 0, 0, 0, k, "data", "data", 100, 1) for k in range(3)]
    tr = Trace.from_records(recs)
    assert len(tr) == 3 and tr[1] == recs[1] and tr[0:2] == recs[:2]
    assert tr == recs


@settings(max_examples=60, deadline=None)
@given(st.lists(st.text(alphabet="abcdefghij-_", min_size=1, max_size=20), min_size=1, max_size=50))
def test_field_interning_matches_exact_lookup(words):
    import numpy as np

    from vanetsim.metrics import _intern, _intern_exact

    text = " ".join(words) + " "
    buf = np.frombuffer(text.encode(), dtype=np.uint8)
    ends = np.flatnonzero(buf == 32)
    starts = np.concatenate(([0], ends[:-1] + 1))
    names, codes = _intern(buf, starts, ends)
    assert [names[c] for c in codes] == words
    exact_names, exact_codes = _intern_exact(buf, starts, ends)
    assert [exact_names[c] for c in exact_codes] == words
