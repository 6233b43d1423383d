"""Wire mobility, radio, routing agents and traffic into one simulation run."""

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .engine import EventKind, Simulator, to_us
from .maodv import MaodvAgent, MaodvConfig
from .metrics import MetricsReport, TraceWriter, analyze, parse_lines
from .mobility import AREA_Y, Fleet, init_fleet
from .packets import DATA, DataHeader, Packet
from .puma import PumaAgent, PumaConfig
from .radio import Radio, RadioConfig
from .traffic import SessionPlan, VbrSource, apply_session_event, build_session_plan

AGENTS = {"maodv": MaodvAgent, "puma": PumaAgent}


class Network:
    """All per-run state: clock, fleet, channel, one agent per vehicle."""

    def __init__(self, config: ScenarioConfig, trace: TraceWriter | None = None, check_monotonic=False):
        self.config = config
        self.sim = Simulator(to_us(config.duration), config.seed, config.wall_budget, check_monotonic)
        self.trace = trace
        length, height = config.area
        vehicles = init_fleet(config.nodes, self.sim.rng["mobility"], length, config.speed_kmh)
        self.fleet = Fleet(vehicles, length)
        self.fleet.y = self.fleet.y * (height / AREA_Y)
        self.agents = []
        self.radio = Radio(self.sim, self.fleet, config.radio_config(), self._deliver, trace)
        cls = AGENTS[config.protocol]
        pcfg = config.protocol_config()
        self.agents = [cls(i, self, pcfg) for i in range(config.nodes)]
        self.tick_us = to_us(config.mobility_tick)

    def _deliver(self, node: int, pkt) -> None:
        self.agents[node].receive(pkt)

    def start_mobility(self) -> None:
        self.sim.schedule(self.tick_us, EventKind.MOBILITY_TICK, self._tick)

    def _tick(self) -> None:
        self.fleet.step(self.tick_us / 1e6)
        self.radio.refresh()
        self.sim.schedule(self.sim.now + self.tick_us, EventKind.MOBILITY_TICK, self._tick)

    def central_node(self) -> int:
        length, height = self.config.area
        d = np.hypot(self.fleet.x - length / 2, self.fleet.y - height / 2)
        return int(np.argmin(d))


@dataclass
class RunResult:
    config: ScenarioConfig
    trace: TraceWriter
    plan: SessionPlan
    source: int | None
    report: MetricsReport
    network: Network

    @property
    def scenario_id(self) -> str:
        return self.config.scenario_id

    def csv_row(self) -> list[str]:
        c = self.config
        return [c.scenario_id, c.protocol, str(c.listeners), str(c.sessions)] + self.report.csv_fields()


def build_network(config: ScenarioConfig, check_monotonic=False):
    """Set up a run without executing it; returns (network, plan, source)."""
    config.validate()
    net = Network(config, TraceWriter(), check_monotonic)
    sim = net.sim
    t = config.traffic
    source = None
    if t.sources:
        source = t.source_node if t.source_node is not None else net.central_node()
    candidates = [i for i in range(config.nodes) if i != source]
    plan = build_session_plan(config.listeners, config.sessions, config.duration,
                              sim.rng["sessions"], candidates)
    proto = config.protocol
    for when, node, kind, index in plan.events():
        ev = EventKind.SESSION_JOIN if kind == "join" else EventKind.SESSION_LEAVE
        sim.schedule(when, ev, apply_session_event, net.agents[node], kind, when, net.trace, proto, index)
    net.start_mobility()
    if source is not None:
        active = None if t.active is None else (to_us(t.active[0]), to_us(t.active[1]))
        vbr = VbrSource(source, 1, t.frame_rate, t.mean_packet_size, tuple(t.packet_size_bounds),
                        t.mean_bitrate, t.jitter, active)
        agent = net.agents[source]
        sim.schedule(0, EventKind.TIMER, agent.start_source)
        first = vbr.first_emission()
        if first is not None:
            sim.schedule(first, EventKind.TRAFFIC_EMIT, _emit, net, vbr, agent)
    return net, plan, source


def _emit(net: Network, vbr: VbrSource, agent) -> None:
    sim = net.sim
    pkt, nxt = vbr.emit(sim.now, sim.rng["traffic"])
    agent.originate(pkt)
    if nxt <= sim.duration and vbr.is_active(nxt):
        sim.schedule(nxt, EventKind.TRAFFIC_EMIT, _emit, net, vbr, agent)


def run_scenario(config: ScenarioConfig, trace_path=None, eed_per: str = "sent",
                 check_monotonic=False) -> RunResult:
    net, plan, source = build_network(config, check_monotonic)
    net.sim.run()
    if trace_path is not None:
        net.trace.write(trace_path)
    report = analyze(parse_lines(net.trace.lines), eed_per=eed_per)
    return RunResult(config, net.trace, plan, source, report, net)


class Positions:
    """Hand-placed node coordinates; edit ``x``/``y`` then call ``radio.refresh()``."""

    def __init__(self, coords):
        self.x = np.array([float(c[0]) for c in coords])
        self.y = np.array([float(c[1]) for c in coords])


class StaticNetwork:
    """Agents on fixed (or script-moved) positions, for protocol experiments.

    No mobility ticks, sessions or traffic are scheduled; callers drive the
    agents directly and advance time with :meth:`run_until`.
    """

    def __init__(self, coords, protocol: str, protocol_config=None, seed: int = 0,
                 duration: float = 3600.0, radio_config=None, trace: bool = True):
        self.sim = Simulator(to_us(duration), seed, check_monotonic=True)
        self.trace = TraceWriter() if trace else None
        self.positions = Positions(coords)
        self.radio = Radio(self.sim, self.positions, radio_config or RadioConfig(), self._deliver, self.trace)
        if protocol_config is None:
            protocol_config = MaodvConfig() if protocol == "maodv" else PumaConfig()
        self.agents = [AGENTS[protocol](i, self, protocol_config) for i in range(len(coords))]
        self.protocol = protocol
        self._data_seq = 0

    def _deliver(self, node: int, pkt) -> None:
        self.agents[node].receive(pkt)

    def at(self, t: float, fn, *args) -> None:
        self.sim.schedule(to_us(t), EventKind.TIMER, fn, *args)

    def run_until(self, t: float) -> None:
        self.sim.run(to_us(t))

    def move(self, node: int, x: float, y: float) -> None:
        self.positions.x[node] = x
        self.positions.y[node] = y
        self.radio.refresh()

    def join(self, node: int) -> None:
        agent = self.agents[node]
        apply_session_event(agent, "join", self.sim.now, self.trace, self.protocol, 0)

    def leave(self, node: int) -> None:
        agent = self.agents[node]
        apply_session_event(agent, "leave", self.sim.now, self.trace, self.protocol, 0)

    def send_data(self, node: int, size: int = 512):
        """Originate one data packet at ``node`` now."""
        pkt = Packet(DATA, DATA, node, self._data_seq, size, 1, self.sim.now, node, DataHeader())
        self._data_seq += 1
        self.agents[node].originate(pkt)
        return pkt

    def records(self):
        return parse_lines(self.trace.lines)
