"""Brute-force metric recomputation and a random mini-trace generator.

Deliberately naive: plain string splitting and nested scans, sharing no
code with the package's analyzers.
"""

import random


def _fields(line):
    op, t, node, pkt, proto, kind, size, group, detail = line.split(" ")
    sec, frac = t.split(".")
    origin, seq = pkt.split(":")
    return dict(op=op, t=int(sec) * 1_000_000 + int(frac), node=int(node), origin=int(origin),
                seq=int(seq), proto=proto, kind=kind, size=int(size))


def brute_force(lines):
    recs = [_fields(l) for l in lines]
    # origin emissions: first data send by the originating node
    emissions = []
    for r in recs:
        if r["op"] == "s" and r["proto"] == "data" and r["node"] == r["origin"]:
            if not any(e["origin"] == r["origin"] and e["seq"] == r["seq"] for e in emissions):
                emissions.append(r)
    # distinct receptions, first arrival wins
    receptions = []
    for r in recs:
        if r["op"] == "r" and r["proto"] == "data":
            if not any(x["node"] == r["node"] and x["origin"] == r["origin"] and x["seq"] == r["seq"]
                       for x in receptions):
                receptions.append(r)
    # membership intervals
    intervals = []
    for i, r in enumerate(recs):
        if r["op"] == "sess" and r["kind"] == "join":
            end = None
            for r2 in recs[i + 1:]:
                if r2["op"] == "sess" and r2["node"] == r["node"] and r2["kind"] == "leave":
                    end = r2["t"]
                    break
            intervals.append((r["node"], r["t"], end))
    expected = 0
    for node, start, end in intervals:
        for e in emissions:
            if e["t"] >= start and (end is None or e["t"] < end):
                expected += 1
    delay = 0
    for x in receptions:
        created = None
        for r in recs:
            if r["op"] == "s" and r["proto"] == "data" and r["origin"] == x["origin"] and r["seq"] == x["seq"]:
                if r["node"] == r["origin"]:
                    created = r["t"]
                    break
        if created is None:
            created = min(r["t"] for r in recs if r["op"] == "s" and r["proto"] == "data"
                          and r["origin"] == x["origin"] and r["seq"] == x["seq"])
        delay += x["t"] - created
    control = sum(1 for r in recs if r["op"] == "s" and r["proto"] != "data")
    out = dict(sent=len(emissions), received=len(receptions), expected=expected, control=control)
    out["pdr"] = len(receptions) / expected if expected else None
    out["eed"] = delay / 1e6 / len(emissions) if emissions else None
    if len(emissions) >= 1:
        window = max(e["t"] for e in emissions) - min(e["t"] for e in emissions)
        total = sum(x["size"] for x in receptions)
        out["throughput"] = total / (window / 1e6) * 8 / 1024 if window > 0 else None
    else:
        out["throughput"] = None
    out["nrl"] = control / len(receptions) if receptions else None
    return out


def _t(us):
    return f"{us // 1_000_000}.{us % 1_000_000:06d}"


def random_trace(rng: random.Random, max_records: int = 1000):
    """A well-formed trace: sessions, one data origin, relays, receptions, control."""
    nodes = rng.randint(2, 8)
    horizon = rng.randint(1_000_000, 60_000_000)
    events = []  # (time, order, line)
    members = {}
    for n in range(1, nodes):
        k = rng.randint(0, 3)
        open_end = k > 0 and rng.random() < 0.3
        cuts = sorted(rng.sample(range(1, horizon), 2 * k - open_end))
        pairs = [(cuts[i], cuts[i + 1] if i + 1 < len(cuts) else None) for i in range(0, len(cuts), 2)]
        members[n] = pairs
        for idx, (j, l) in enumerate(pairs):
            events.append((j, 0, f"sess {_t(j)} {n} {n}:{idx} puma join 0 1 -"))
            if l is not None:
                events.append((l, 0, f"sess {_t(l)} {n} {n}:{idx} puma leave 0 1 -"))
    budget = max_records - len(events)
    n_pkts = rng.randint(0, max(0, budget // 6))
    times = sorted(rng.sample(range(0, horizon), n_pkts))
    for seq, t in enumerate(times):
        size = rng.randint(256, 768)
        events.append((t, 1, f"s {_t(t)} 0 0:{seq} data data {size} 1 -"))
        for relay in rng.sample(range(1, nodes), rng.randint(0, min(2, nodes - 1))):
            st = t + rng.randint(1, 5000)
            events.append((st, 1, f"s {_t(st)} {relay} 0:{seq} data data {size} 1 -"))
        for n, pairs in members.items():
            if any(j <= t and (l is None or t < l) for j, l in pairs) and rng.random() < 0.7:
                rt = t + rng.randint(1, 200_000)
                for _ in range(rng.choice([1, 1, 1, 2])):
                    events.append((rt, 2, f"r {_t(rt)} {n} 0:{seq} data data {size} 1 -"))
                    rt += rng.randint(1, 1000)
    for k in range(rng.randint(0, max(0, max_records - len(events)) // 4)):
        t = rng.randint(0, horizon)
        node = rng.randrange(nodes)
        events.append((t, 1, f"s {_t(t)} {node} {node}:{k} puma announcement 32 1 -"))
    events.sort(key=lambda e: (e[0], e[1]))
    lines = [e[2] for e in events][:max_records]
    return lines
