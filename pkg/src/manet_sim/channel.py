"""
Unit-disc radio channel.

Two nodes hear each other when their distance is at most the transmission
range.  A frame occupies its sender's transmitter for ``size * 8 / bandwidth``
seconds behind a bounded FIFO interface queue, reaches receivers after a fixed
propagation delay, and broadcasts add a small random jitter.  A unicast to a
next hop that is out of range is reported synchronously to the sender's
routing layer; that failure is the link-break signal both protocols use.

Optionally, receptions that overlap in time at the same receiver are both lost
(``COL``).
"""

from __future__ import annotations

import logging
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from manet_sim.engine import Event, RngStream, Simulator, StreamLabel
from manet_sim.metrics import DropReason, Layer, MetricsCollector
from manet_sim.mobility import MobilityModel
from manet_sim.packets import Packet

logger = logging.getLogger("manet_sim.channel")

Receiver = Callable[[Packet, int], None]
LinkFailure = Callable[[Packet, int], None]


@dataclass(frozen=True, slots=True)
class RadioConfig:
    range: float = 250.0
    bandwidth: float = 2_000_000.0
    broadcast_jitter_max: float = 0.01
    collisions_enabled: bool = False
    propagation_delay: float = 1e-6
    queue_capacity: int = 50

    def __post_init__(self) -> None:
        if self.range <= 0:
            raise ValueError(f"range must be positive, got {self.range}")
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.broadcast_jitter_max < 0:
            raise ValueError(f"jitter must be non-negative, got {self.broadcast_jitter_max}")
        if self.queue_capacity < 1:
            raise ValueError(f"queue capacity must be at least 1, got {self.queue_capacity}")

    def serialization_delay(self, size: int) -> float:
        return size * 8 / self.bandwidth


class FrameMode(str, Enum):
    BROADCAST = "broadcast"
    UNICAST = "unicast"


@dataclass(frozen=True, slots=True)
class Frame:
    payload: Packet
    sender: int
    mode: FrameMode = FrameMode.BROADCAST
    next_hop: int | None = None

    def __post_init__(self) -> None:
        if self.mode is FrameMode.UNICAST and self.next_hop is None:
            raise ValueError("unicast frame needs a next hop")

    @property
    def size(self) -> int:
        return self.payload.size


@dataclass(eq=False, slots=True)
class _Reception:
    frame: Frame
    receiver: int
    start: float
    end: float
    collided: bool = False


@dataclass(slots=True)
class _Interface:
    """Per-node transmit state: FIFO of pending completion times."""

    busy_until: float = 0.0
    queue: deque[float] = field(default_factory=deque)


class Channel:
    """Shared wireless medium of one run."""

    def __init__(
        self,
        sim: Simulator,
        radio: RadioConfig,
        mobility: MobilityModel,
        metrics: MetricsCollector,
    ) -> None:
        self.sim = sim
        self.radio = radio
        self.mobility = mobility
        self.metrics = metrics
        n = len(mobility)
        self._receivers: list[Receiver | None] = [None] * n
        self._failures: list[LinkFailure | None] = [None] * n
        self._ifaces = [_Interface() for _ in range(n)]
        self._jitter = [sim.stream(StreamLabel.CHANNEL_JITTER, node) for node in range(n)]
        self._receptions: list[list[_Reception]] = [[] for _ in range(n)]

    def __len__(self) -> int:
        return len(self._ifaces)

    def attach(self, node: int, receiver: Receiver, on_link_failure: LinkFailure) -> None:
        """Register the routing layer of ``node``."""
        self._receivers[node] = receiver
        self._failures[node] = on_link_failure

    def neighbors(self, node: int, t: float | None = None) -> set[int]:
        """Nodes within range of ``node`` at time ``t`` (default: now)."""
        t = self.sim.now if t is None else t
        pos = self.mobility.positions(t)
        dist = np.hypot(pos[:, 0] - pos[node, 0], pos[:, 1] - pos[node, 1])
        in_range = np.flatnonzero(dist <= self.radio.range)
        return {int(i) for i in in_range if i != node}

    def transmit(self, frame: Frame) -> list[Event] | None:
        """Hand ``frame`` to the radio at the current time.

        Returns:
            The scheduled delivery events (one per receiver), or ``None`` when
            the frame never went on the air: dropped at the queue, or a
            unicast whose next hop is out of range.  In the latter case the
            sender's link-failure callback has already run.
        """
        t = self.sim.now
        sender = frame.sender
        if frame.mode is FrameMode.UNICAST:
            if not 0 <= frame.next_hop < len(self):
                raise ValueError(f"unknown next hop {frame.next_hop}")
            if frame.next_hop not in self.neighbors(sender, t):
                logger.debug(
                    "t=%.6f link %d->%d down (%s %d)",
                    t, sender, frame.next_hop, frame.payload.ptype.value, frame.payload.uid,
                )
                callback = self._failures[sender]
                if callback is not None:
                    callback(frame.payload, frame.next_hop)
                return None
            receivers = [frame.next_hop]
        else:
            receivers = sorted(self.neighbors(sender, t))

        iface = self._ifaces[sender]
        while iface.queue and iface.queue[0] <= t:
            iface.queue.popleft()
        if len(iface.queue) >= self.radio.queue_capacity:
            self.metrics.drop(sender, Layer.MAC, frame.payload, DropReason.IFQ)
            return None

        jitter = 0.0
        if frame.mode is FrameMode.BROADCAST and self.radio.broadcast_jitter_max > 0:
            jitter = self._jitter[sender].uniform(0.0, self.radio.broadcast_jitter_max)
        start = max(t + jitter, iface.busy_until)
        end = start + self.radio.serialization_delay(frame.size)
        iface.busy_until = end
        iface.queue.append(end)

        prop = self.radio.propagation_delay
        events = []
        for receiver in receivers:
            reception = _Reception(frame, receiver, start + prop, end + prop)
            if self.radio.collisions_enabled:
                self._register(reception)
            events.append(self.sim.schedule(reception.end, lambda r=reception: self._deliver(r)))
        return events

    def _register(self, reception: _Reception) -> None:
        active = self._receptions[reception.receiver]
        active[:] = [r for r in active if r.end > self.sim.now]
        for other in active:
            if other.end > reception.start and reception.end > other.start:
                other.collided = True
                reception.collided = True
        active.append(reception)

    def _deliver(self, reception: _Reception) -> None:
        packet = reception.frame.payload
        if reception.collided:
            self.metrics.drop(reception.receiver, Layer.MAC, packet, DropReason.COL)
            return
        receiver = self._receivers[reception.receiver]
        if receiver is not None:
            receiver(packet, reception.frame.sender)
