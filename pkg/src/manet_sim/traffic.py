"""
Constant-bit-rate UDP workload.

A ``CbrSource`` emits fixed-size datagrams at ``start + k / rate`` (never by
accumulating intervals, so there is no drift) while that time is below
``stop_at``.  ``CbrSink`` records receipts and ignores duplicates.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

from manet_sim.engine import RngStream, Simulator
from manet_sim.metrics import MetricsCollector
from manet_sim.packets import DataPacket, PacketType

logger = logging.getLogger("manet_sim.traffic")


@dataclass(frozen=True, slots=True)
class Flow:
    flow_id: int
    source: int
    sink: int
    rate: float = 4.0
    packet_size: int = 512
    start_at: float = 10.0
    stop_at: float = 200.0

    def __post_init__(self) -> None:
        if self.source == self.sink:
            raise ValueError(f"flow {self.flow_id}: source and sink are both {self.source}")
        if self.rate <= 0:
            raise ValueError(f"flow {self.flow_id}: rate must be positive")
        if self.packet_size <= 0:
            raise ValueError(f"flow {self.flow_id}: packet size must be positive")
        if not 0 <= self.start_at < self.stop_at:
            raise ValueError(f"flow {self.flow_id}: need 0 <= start_at < stop_at")

    @property
    def packet_count(self) -> int:
        # (0.7 - 0.1) * 10 evaluates to 5.999...; the epsilon keeps it at 6
        return math.floor((self.stop_at - self.start_at) * self.rate + 1e-9)

    def emission_time(self, k: int) -> float:
        return self.start_at + k / self.rate


@dataclass(frozen=True, slots=True)
class Receipt:
    created_at: float
    received_at: float
    hops: tuple[int, ...]


class CbrSink:
    """Receiving end of every flow terminating at one node."""

    def __init__(self, node: int) -> None:
        self.node = node
        self.receipts: dict[tuple[int, int], Receipt] = {}
        self.duplicates = 0

    def deliver(self, packet: DataPacket, t: float) -> bool:
        key = (packet.flow_id, packet.seq)
        if key in self.receipts:
            self.duplicates += 1
            return False
        self.receipts[key] = Receipt(packet.created_at, t, tuple(packet.path))
        return True


class CbrSource:
    def __init__(self, flow: Flow, generator: TrafficGenerator) -> None:
        self.flow = flow
        self._gen = generator
        self.emitted = 0

    def schedule_next(self) -> None:
        if self.emitted < self.flow.packet_count:
            self._gen.sim.schedule(self.flow.emission_time(self.emitted), self.emit)

    def emit(self) -> DataPacket:
        flow = self.flow
        packet = DataPacket(
            uid=self._gen.new_uid(),
            ptype=PacketType.CBR,
            src=flow.source,
            dst=flow.sink,
            size=flow.packet_size,
            created_at=self._gen.sim.now,
            flow_id=flow.flow_id,
            seq=self.emitted,
            ttl=self._gen.ttl,
        )
        self.emitted += 1
        self._gen.metrics.app_send(flow.source, packet)
        self._gen.send(flow.source, packet)
        self.schedule_next()
        return packet


class TrafficGenerator:
    """Owns all CBR sources and sinks of a run."""

    def __init__(
        self,
        sim: Simulator,
        metrics: MetricsCollector,
        new_uid: Callable[[], int],
        send: Callable[[int, DataPacket], None],
        ttl: int = 32,
    ) -> None:
        self.sim = sim
        self.metrics = metrics
        self.new_uid = new_uid
        self.send = send
        self.ttl = ttl
        self.sources: list[CbrSource] = []
        self.sinks: dict[int, CbrSink] = {}

    def add_flow(self, flow: Flow) -> CbrSource:
        source = CbrSource(flow, self)
        self.sources.append(source)
        self.sinks.setdefault(flow.sink, CbrSink(flow.sink))
        source.schedule_next()
        return source

    def deliver(self, sink: int, packet: DataPacket) -> bool:
        """Hand a packet that reached ``sink`` to the application."""
        self.metrics.app_receive(sink, packet)
        return self.sinks.setdefault(sink, CbrSink(sink)).deliver(packet, self.sim.now)


def generate_flows(
    count: int,
    nodes: int,
    rng: RngStream,
    *,
    rate: float,
    packet_size: int,
    start_at: float,
    stop_at: float,
) -> list[Flow]:
    """Draw ``count`` flows between distinct, non-repeating (source, sink) pairs."""
    if count > nodes * (nodes - 1):
        raise ValueError(f"{count} flows need more than {nodes} nodes")
    pairs: set[tuple[int, int]] = set()
    flows = []
    while len(flows) < count:
        source = rng.integer(0, nodes)
        sink = rng.integer(0, nodes - 1)
        if sink >= source:
            sink += 1
        if (source, sink) in pairs:
            continue
        pairs.add((source, sink))
        flows.append(Flow(len(flows), source, sink, rate, packet_size, start_at, stop_at))
    return flows
