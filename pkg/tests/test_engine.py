import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vanetsim.engine import (BudgetExceeded, EventKind, PastEvent, RngStreams, Simulator, fmt_time,
                             to_us)


def test_schedule_at_current_clock_runs_after_earlier_equal_time_events():
    sim = Simulator(10_000_000)
    order = []
    sim.schedule(5_000_000, EventKind.TIMER, order.append, "first")

    def at_five():
        order.append("handler")
        sim.schedule(sim.now, EventKind.TIMER, order.append, "same-time")

    sim.schedule(5_000_000, EventKind.TIMER, at_five)
    sim.schedule(5_000_000, EventKind.TIMER, order.append, "queued-before")
    sim.run()
    assert order == ["first", "handler", "queued-before", "same-time"]


def test_schedule_in_the_past_is_rejected():
    sim = Simulator(10_000_000)
    sim.schedule(2_000_000, EventKind.TIMER, lambda: None)
    sim.run(until_us=2_000_000)
    with pytest.raises(PastEvent):
        sim.schedule(sim.now - 1, EventKind.TIMER, lambda: None)


def test_equal_time_events_fire_in_insertion_order():
    sim = Simulator(10_000_000)
    sim.history = []
    a = sim.schedule(5_000_000, EventKind.TIMER, lambda: None)
    b = sim.schedule(5_000_000, EventKind.TIMER, lambda: None)
    sim.run()
    assert [seq for _, seq, _ in sim.history] == [a, b]


def test_cancelled_event_never_fires():
    sim = Simulator(1_000_000)
    fired = []
    h = sim.schedule(10, EventKind.TIMER, fired.append, 1)
    sim.schedule(20, EventKind.TIMER, fired.append, 2)
    sim.cancel(h)
    sim.run()
    assert fired == [2]


def test_events_beyond_duration_are_dropped_and_clock_stops_at_duration():
    sim = Simulator(1_000_000)
    fired = []
    sim.schedule(1_000_000, EventKind.TIMER, fired.append, "edge")
    sim.schedule(1_000_001, EventKind.TIMER, fired.append, "late")
    sim.run()
    assert fired == ["edge"]
    assert sim.now == 1_000_000


def test_time_rendering():
    assert fmt_time(0) == "0.000000"
    assert fmt_time(to_us(12.3)) == "12.300000"
    assert fmt_time(600_000_000) == "600.000000"


def test_rng_streams_are_reproducible_and_independent():
    a, b = RngStreams(42), RngStreams(42)
    assert [a["mobility"].random() for _ in range(5)] == [b["mobility"].random() for _ in range(5)]
    c = RngStreams(42)
    assert c["traffic"].random() != RngStreams(42)["mobility"].random()
    # drawing from one stream leaves the others untouched
    d = RngStreams(42)
    d["protocol"].random()
    assert d["radio"].random() == RngStreams(42)["radio"].random()
    with pytest.raises(KeyError):
        a["weather"]


def test_wall_clock_budget():
    sim = Simulator(10**12, wall_budget_s=1e-9)

    def spin():
        sim.schedule(sim.now + 1, EventKind.TIMER, spin)

    sim.schedule(0, EventKind.TIMER, spin)
    with pytest.raises(BudgetExceeded):
        sim.run()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1000), st.integers(0, 3)), min_size=1, max_size=60),
       st.sets(st.integers(0, 59)))
def test_processed_times_non_decreasing_and_cancelled_never_fire(plan, cancel):
    sim = Simulator(5000, check_monotonic=True)
    sim.history = []
    fired = []
    handles = {}

    def fire(i, spawn):
        fired.append(i)
        for k in range(spawn):
            sim.schedule(sim.now + k * 7, EventKind.TIMER, fired.append, ("child", i, k))

    for i, (t, spawn) in enumerate(plan):
        handles[i] = sim.schedule(t, EventKind.TIMER, fire, i, spawn)
    for i in cancel:
        if i in handles:
            sim.cancel(handles[i])
    sim.run()
    times = [t for t, _, _ in sim.history]
    assert times == sorted(times)
    assert not ({i for i in fired if isinstance(i, int)} & cancel)
    assert all(0 <= t <= 5000 for t in times)
