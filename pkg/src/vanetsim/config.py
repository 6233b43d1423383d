"""Declarative scenario description, JSON (de)serialisation and validation."""

import json
from dataclasses import asdict, dataclass, field, fields

from .maodv import MaodvConfig
from .puma import PumaConfig
from .radio import RadioConfig
from .traffic import InvalidScenario

PROTOCOLS = ("maodv", "puma")


@dataclass
class TrafficConfig:
    sources: int = 1  # 0 gives a maintenance-only run
    source_node: int | None = None  # default: the vehicle nearest the strip centre at t=0
    frame_rate: float = 25.0
    mean_packet_size: int = 512
    packet_size_bounds: tuple[int, int] = (256, 768)
    mean_bitrate: float = 64_000.0
    jitter: float = 0.2
    active: tuple[float, float] | None = None  # seconds; None = whole run


@dataclass
class ScenarioConfig:
    protocol: str = "puma"
    nodes: int = 100
    duration: float = 600.0
    area: tuple[float, float] = (10_000.0, 1_000.0)
    tx_range: float = 1000.0
    listeners: int = 10
    sessions: int = 5
    seed: int = 0
    mobility_tick: float = 0.5
    speed_kmh: tuple[float, float] = (80.0, 110.0)
    wall_budget: float | None = 600.0
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    maodv: MaodvConfig = field(default_factory=MaodvConfig)
    puma: PumaConfig = field(default_factory=PumaConfig)

    @property
    def scenario_id(self) -> str:
        return f"{self.protocol}-L{self.listeners}-S{self.sessions}-seed{self.seed}"

    def protocol_config(self):
        return self.maodv if self.protocol == "maodv" else self.puma

    def radio_config(self) -> RadioConfig:
        # tx_range is the user-facing knob; the radio block carries the rest
        r = self.radio
        return RadioConfig(self.tx_range, r.bandwidth, r.loss_probability, r.collisions)

    # -- validation ---------------------------------------------------------
    def errors(self) -> list[str]:
        errs = []
        if self.protocol not in PROTOCOLS:
            errs.append(f"protocol must be one of {', '.join(PROTOCOLS)}")
        if self.nodes < 1:
            errs.append("nodes must be >= 1")
        if not self.duration > 0:
            errs.append("duration must be positive")
        if self.listeners < 1:
            errs.append("listeners must be >= 1")
        if self.listeners > self.nodes - self.traffic.sources:
            errs.append("listeners exceed nodes")
        if self.sessions < 1:
            errs.append("sessions must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            errs.append("seed must be a 64-bit unsigned integer")
        if len(self.area) != 2 or min(self.area) <= 0:
            errs.append("area must be two positive lengths")
        if not self.tx_range > 0:
            errs.append("tx_range must be positive")
        if not self.mobility_tick > 0:
            errs.append("mobility_tick must be positive")
        lo, hi = self.speed_kmh
        if not 0 <= lo <= hi:
            errs.append("speed_kmh must be an ordered non-negative pair")
        if self.wall_budget is not None and not self.wall_budget > 0:
            errs.append("wall_budget must be positive")
        t = self.traffic
        if t.sources not in (0, 1):
            errs.append("traffic.sources must be 0 or 1")
        if t.source_node is not None and not 0 <= t.source_node < self.nodes:
            errs.append("traffic.source_node out of range")
        blo, bhi = t.packet_size_bounds
        if not 0 < blo <= bhi:
            errs.append("traffic.packet_size_bounds must be positive and ordered")
        if not t.mean_bitrate > 0:
            errs.append("traffic.mean_bitrate must be positive")
        if not 0 <= t.jitter < 1:
            errs.append("traffic.jitter must lie in [0, 1)")
        if t.active is not None and not 0 <= t.active[0] <= t.active[1]:
            errs.append("traffic.active must be an ordered non-negative window")
        errs.extend(self.radio_config().errors())
        for name, value in asdict(self.protocol_config()).items():
            if isinstance(value, (int, float)) and not isinstance(value, bool) and value < 0:
                errs.append(f"{self.protocol}.{name} must be non-negative")
        return errs

    def validate(self) -> "ScenarioConfig":
        errs = self.errors()
        if errs:
            raise InvalidScenario("; ".join(errs))
        return self

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return _build(cls, data)

    @classmethod
    def loads(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


_NESTED = {"traffic": TrafficConfig, "radio": RadioConfig, "maodv": MaodvConfig, "puma": PumaConfig}
_TUPLES = {"area", "speed_kmh", "packet_size_bounds", "active"}


def _build(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise InvalidScenario(f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}")
    kw = {}
    for key, value in data.items():
        if cls is ScenarioConfig and key in _NESTED:
            value = value if isinstance(value, _NESTED[key]) else _build(_NESTED[key], value or {})
        elif key in _TUPLES and value is not None:
            value = tuple(value)
        kw[key] = value
    return cls(**kw)


def apply_overrides(config: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    """Return a copy with dotted-key overrides applied (``traffic.mean_bitrate``)."""
    data = config.to_dict()
    for key, value in overrides.items():
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise InvalidScenario(f"unknown config key {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise InvalidScenario(f"unknown config key {key!r}")
        node[parts[-1]] = value
    return ScenarioConfig.from_dict(data)
