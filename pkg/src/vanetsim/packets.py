"""Packets as they travel over the simulated channel."""

from dataclasses import dataclass, field

DATA = "data"

# data forwarding modes
MESH = "mesh"
UPSTREAM = "up"
TREE = "tree"


@dataclass(slots=True)
class DataHeader:
    mode: str = TREE
    via: int | None = None  # intended next hop when mode == UPSTREAM


@dataclass(slots=True)
class Packet:
    """One transmission's worth of packet.

    ``origin``/``seq`` name the packet end to end for data; for control
    traffic they are the transmitting node and its private counter, so every
    control transmission has a unique id in the trace.
    """

    proto: str
    kind: str
    origin: int
    seq: int
    size: int
    group: int
    created: int  # microseconds
    sender: int = -1
    header: object = field(default=None)

    @property
    def uid(self) -> tuple[int, int]:
        return (self.origin, self.seq)

    @property
    def is_data(self) -> bool:
        return self.proto == DATA
