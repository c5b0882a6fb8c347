"""Packet types shared by the radio, the routing agents and the traffic layer."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

# Destination address of broadcast control packets (as in ns-2 traces).
BROADCAST = -1

# Fixed network header added to every control packet for byte accounting.
HEADER_BYTES = 20


class PacketType(str, Enum):
    CBR = "cbr"
    RREQ = "rreq"
    RREP = "rrep"
    RERR = "rerr"
    DSDV = "dsdv"

    @property
    def is_control(self) -> bool:
        return self is not PacketType.CBR


@dataclass(slots=True)
class Packet:
    """A network-layer packet.

    ``src``/``dst`` are the end points written to the trace; ``payload`` holds
    the protocol message for control packets.
    """

    uid: int
    ptype: PacketType
    src: int
    dst: int
    size: int
    created_at: float
    payload: Any = None

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError(f"packet size must be positive, got {self.size}")


@dataclass(slots=True)
class DataPacket(Packet):
    """An application datagram of one CBR flow."""

    flow_id: int = 0
    seq: int = 0
    ttl: int = 32
    path: list[int] = field(default_factory=list)
