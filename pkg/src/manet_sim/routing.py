"""
Common base of the routing agents.

A ``RoutingAgent`` sits between a node's CBR application and the radio.  It
owns the data path shared by both protocols (TTL handling, local delivery,
forwarding traces) and leaves route lookup, control handling and link-break
reaction to the protocol subclasses.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, ClassVar

from manet_sim.channel import Channel, Frame, FrameMode
from manet_sim.engine import RngStream, Simulator
from manet_sim.metrics import DropReason, Layer, MetricsCollector
from manet_sim.packets import BROADCAST, DataPacket, Packet, PacketType

if TYPE_CHECKING:
    from manet_sim.config import ScenarioConfig

logger = logging.getLogger("manet_sim.routing")


@dataclass(frozen=True)
class NodeServices:
    """Run-wide services a routing agent needs."""

    sim: Simulator
    channel: Channel
    metrics: MetricsCollector
    config: ScenarioConfig
    new_uid: Callable[[], int]
    deliver: Callable[[int, DataPacket], None]


class RoutingAgent(ABC):
    """Routing layer of one node."""

    protocol: ClassVar[str]

    def __init__(self, node: int, services: NodeServices, rng: RngStream) -> None:
        self.node = node
        self.services = services
        self.config = services.config
        self.rng = rng
        services.channel.attach(node, self.receive, self.on_link_failure)

    @property
    def now(self) -> float:
        return self.services.sim.now

    def start(self) -> None:
        """Arm protocol timers at the beginning of the run."""

    # -- data path ---------------------------------------------------------

    def send_data(self, packet: DataPacket) -> None:
        """Entry point for packets emitted by the local application."""
        packet.path.append(self.node)
        self.route_data(packet)

    def receive(self, packet: Packet, sender: int) -> None:
        """Frame delivered by the channel."""
        if packet.ptype is PacketType.CBR:
            self._receive_data(packet, sender)
        else:
            self.handle_control(packet, sender)

    def _receive_data(self, packet: DataPacket, sender: int) -> None:
        packet.path.append(self.node)
        if packet.dst == self.node:
            self.services.deliver(self.node, packet)
            return
        packet.ttl -= 1
        if packet.ttl <= 0:
            self.drop(packet, DropReason.TTL)
            return
        self.route_data(packet)

    def transmit_data(self, packet: DataPacket, next_hop: int) -> bool:
        """Unicast ``packet``; the ``f`` record is written only once the frame is on the air."""
        accepted = self.services.channel.transmit(
            Frame(packet, self.node, FrameMode.UNICAST, next_hop)
        )
        if accepted is None:
            return False
        self.services.metrics.forward(self.node, packet)
        return True

    def drop(self, packet: Packet, reason: DropReason) -> None:
        self.services.metrics.drop(self.node, Layer.RTR, packet, reason)

    # -- control path ------------------------------------------------------

    def make_control(
        self, ptype: PacketType, payload: Any, src: int, dst: int = BROADCAST
    ) -> Packet:
        return Packet(
            uid=self.services.new_uid(),
            ptype=ptype,
            src=src,
            dst=dst,
            size=payload.size,
            created_at=self.now,
            payload=payload,
        )

    def broadcast_control(self, packet: Packet) -> bool:
        return self._send_control(Frame(packet, self.node))

    def unicast_control(self, packet: Packet, next_hop: int) -> bool:
        return self._send_control(Frame(packet, self.node, FrameMode.UNICAST, next_hop))

    def _send_control(self, frame: Frame) -> bool:
        # only frames that went on the air count as overhead
        if self.services.channel.transmit(frame) is None:
            return False
        self.services.metrics.control_send(self.node, frame.payload)
        return True

    # -- protocol hooks ----------------------------------------------------

    @abstractmethod
    def route_data(self, packet: DataPacket) -> None:
        """Forward, buffer or drop a data packet held by this node."""

    @abstractmethod
    def handle_control(self, packet: Packet, sender: int) -> None:
        """Process a received control packet."""

    @abstractmethod
    def on_link_failure(self, packet: Packet, next_hop: int) -> None:
        """Channel reports that ``next_hop`` is unreachable for ``packet``."""

    @abstractmethod
    def next_hop(self, destination: int) -> int | None:
        """Next hop toward ``destination``, or ``None`` when there is no usable route."""
