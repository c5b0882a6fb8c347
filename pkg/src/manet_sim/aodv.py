"""
Ad hoc On-Demand Distance Vector routing.

Routes are discovered only when a source has data for a destination: the
source floods a RREQ, every node remembers a reverse route toward the origin,
and the destination (or a node holding a fresh enough route) unicasts a RREP
back along that reverse path, installing forward routes as it goes.  Any RREQ
or RREP also proves a one-hop route to the neighbour that sent it.  Routes
expire ``active_route_timeout`` seconds after their last use.  Link breaks,
detected through failed unicasts, invalidate the affected routes and are
reported upstream with RERRs.

There are no HELLO beacons, no expanding-ring search and no local repair;
a run without traffic sends no control packets at all.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from manet_sim.engine import Event, RngStream
from manet_sim.metrics import DropReason
from manet_sim.packets import BROADCAST, HEADER_BYTES, DataPacket, Packet, PacketType
from manet_sim.routing import NodeServices, RoutingAgent

logger = logging.getLogger("manet_sim.aodv")

RREQ_BYTES = 24
RREP_BYTES = 20
RERR_BASE_BYTES = 8
RERR_ENTRY_BYTES = 8


@dataclass(slots=True)
class AodvEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_sequence: int
    expires_at: float
    valid: bool = True
    # False for routes learned only by hearing the neighbour itself
    sequence_known: bool = True

    def usable(self, now: float) -> bool:
        return self.valid and self.expires_at > now
@dataclass(frozen=True, slots=True)
class Rreq:
    origin: int
    origin_sequence: int
    rreq_id: int
    destination: int
    dest_sequence_known: int
    hop_count: int = 0

    @property
    def size(self) -> int:
        return HEADER_BYTES + RREQ_BYTES


@dataclass(frozen=True, slots=True)
class Rrep:
    destination: int
    dest_sequence: int
    hop_count: int
    origin: int
    lifetime: float

    @property
    def size(self) -> int:
        return HEADER_BYTES + RREP_BYTES


@dataclass(frozen=True, slots=True)
class Rerr:
    unreachable: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if not self.unreachable:
            raise ValueError("RERR must list at least one destination")

    @property
    def size(self) -> int:
        return HEADER_BYTES + RERR_BASE_BYTES + RERR_ENTRY_BYTES * len(self.unreachable)


@dataclass(slots=True)
class PendingBuffer:
    """Data waiting for a route to ``destination``; drops the oldest when full."""

    destination: int
    capacity: int = 64
    retries_remaining: int = 2
    queue: deque[DataPacket] = field(default_factory=deque)
    timer: Event | None = None

    def push(self, packet: DataPacket) -> DataPacket | None:
        """Append ``packet``; returns the evicted oldest packet on overflow."""
        evicted = self.queue.popleft() if len(self.queue) >= self.capacity else None
        self.queue.append(packet)
        return evicted

    def __len__(self) -> int:
        return len(self.queue)


class AodvAgent(RoutingAgent):
    protocol = "aodv"

    def __init__(self, node: int, services: NodeServices, rng: RngStream) -> None:
        super().__init__(node, services, rng)
        self.sequence = 0
        self.rreq_id = 0
        self.routes: dict[int, AodvEntry] = {}
        self.pending: dict[int, PendingBuffer] = {}
        self._seen: set[tuple[int, int]] = set()

    def route(self, destination: int) -> AodvEntry | None:
        """Usable route to ``destination``; expired routes are invalidated here."""
        entry = self.routes.get(destination)
        if entry is None or not entry.valid:
            return None
        if entry.expires_at <= self.now:
            entry.valid = False
            return None
        return entry

    def next_hop(self, destination: int) -> int | None:
        entry = self.route(destination)
        return entry.next_hop if entry is not None else None

    def _update_route(
        self, destination: int, next_hop: int, hop_count: int, sequence: int, lifetime: float
    ) -> bool:
        """Install or refresh a route if the offer is fresher or shorter."""
        entry = self.routes.get(destination)
        expires_at = self.now + lifetime
        if entry is None:
            self.routes[destination] = AodvEntry(
                destination, next_hop, hop_count, sequence, expires_at
            )
            return True
        usable = entry.usable(self.now)
        if (
            sequence > entry.dest_sequence
            or (not entry.sequence_known and sequence == entry.dest_sequence)
            or (sequence == entry.dest_sequence and (not usable or hop_count < entry.hop_count))
        ):
            entry.next_hop = next_hop
            entry.hop_count = hop_count
            entry.dest_sequence = sequence
            entry.expires_at = expires_at
            entry.valid = True
            entry.sequence_known = True
            return True
        if usable and sequence == entry.dest_sequence and next_hop == entry.next_hop:
            entry.expires_at = max(entry.expires_at, expires_at)
        return False

    def _learn_neighbor(self, neighbor: int) -> None:
        """Install or refresh the one-hop route to a neighbour just heard."""
        expires_at = self.now + self.config.active_route_timeout
        entry = self.routes.get(neighbor)
        if entry is None:
            self.routes[neighbor] = AodvEntry(
                neighbor, neighbor, 1, 0, expires_at, sequence_known=False
            )
        else:
            if entry.usable(self.now):
                expires_at = max(entry.expires_at, expires_at)
            entry.next_hop = neighbor
            entry.hop_count = 1
            entry.expires_at = expires_at
            entry.valid = True
        self._route_found(neighbor)

    def _route_found(self, destination: int) -> None:
        if destination in self.pending and self.route(destination) is not None:
            self._flush(destination)

    # -- route discovery ---------------------------------------------------

    def originate_rreq(self, destination: int) -> Rreq:
        """Flood a RREQ for ``destination`` and arm the retry timer."""
        self.sequence += 1
        self.rreq_id += 1
        known = self.routes[destination].dest_sequence if destination in self.routes else 0
        rreq = Rreq(self.node, self.sequence, self.rreq_id, destination, known, 0)
        self._seen.add((self.node, self.rreq_id))
        buf = self.pending.setdefault(
            destination,
            PendingBuffer(
                destination,
                capacity=self.config.pending_capacity,
                retries_remaining=self.config.rreq_retries,
            ),
        )
        attempt = self.config.rreq_retries - buf.retries_remaining
        wait = self.config.rreq_wait * 2**attempt
        buf.timer = self.services.sim.schedule_in(
            wait, lambda: self._discovery_timeout(destination)
        )
        logger.debug(
            "t=%.6f node %d RREQ %d for %d (attempt %d)",
            self.now, self.node, self.rreq_id, destination, attempt + 1,
        )
        self.broadcast_control(self.make_control(PacketType.RREQ, rreq, self.node, destination))
        return rreq

    def _discovery_timeout(self, destination: int) -> None:
        buf = self.pending.get(destination)
        if buf is None:
            return
        buf.timer = None
        if self.route(destination) is not None:
            self._flush(destination)
            return
        if buf.retries_remaining > 0:
            buf.retries_remaining -= 1
            self.originate_rreq(destination)
            return
        logger.warning(
            "t=%.6f node %d gave up on %d, dropping %d packets",
            self.now, self.node, destination, len(buf),
        )
        del self.pending[destination]
        for packet in buf.queue:
            self.drop(packet, DropReason.NRTE)

    def _buffer(self, packet: DataPacket) -> None:
        discovering = packet.dst in self.pending
        if not discovering:
            self.pending[packet.dst] = PendingBuffer(
                packet.dst,
                capacity=self.config.pending_capacity,
                retries_remaining=self.config.rreq_retries,
            )
        evicted = self.pending[packet.dst].push(packet)
        if evicted is not None:
            self.drop(evicted, DropReason.NRTE)
        if not discovering:
            self.originate_rreq(packet.dst)

    def _flush(self, destination: int) -> None:
        buf = self.pending.pop(destination, None)
        if buf is None:
            return
        if buf.timer is not None:
            self.services.sim.cancel(buf.timer)
        while buf.queue:
            self.route_data(buf.queue.popleft())

    def handle_control(self, packet: Packet, sender: int) -> None:
        msg = packet.payload
        if packet.ptype is PacketType.RREQ:
            self._learn_neighbor(sender)
            self.handle_rreq(msg, sender)
        elif packet.ptype is PacketType.RREP:
            self._learn_neighbor(sender)
            self.handle_rrep(msg, sender, packet)
        elif packet.ptype is PacketType.RERR:
            self.handle_rerr(msg, sender)

    def handle_rreq(self, r: Rreq, sender: int) -> str:
        """Returns ``"discard"``, ``"reply"`` or ``"rebroadcast"``."""
        key = (r.origin, r.rreq_id)
        if key in self._seen:
            return "discard"
        self._seen.add(key)
        if self._update_route(
            r.origin, sender, r.hop_count + 1, r.origin_sequence,
            self.config.reverse_route_lifetime,
        ):
            self._route_found(r.origin)
        if r.destination == self.node:
            self.sequence = max(self.sequence, r.dest_sequence_known)
            reply = Rrep(
                self.node, self.sequence, 0, r.origin, 2 * self.config.active_route_timeout
            )
            self._send_rrep(reply, sender)
            return "reply"
        entry = self.route(r.destination)
        if (
            entry is not None
            and entry.sequence_known
            and entry.dest_sequence >= r.dest_sequence_known
        ):
            reply = Rrep(
                r.destination, entry.dest_sequence, entry.hop_count, r.origin,
                entry.expires_at - self.now,
            )
            self._send_rrep(reply, sender)
            return "reply"
        forward = Rreq(
            r.origin, r.origin_sequence, r.rreq_id, r.destination,
            r.dest_sequence_known, r.hop_count + 1,
        )
        self.broadcast_control(
            self.make_control(PacketType.RREQ, forward, r.origin, r.destination)
        )
        return "rebroadcast"

    def _send_rrep(self, rrep: Rrep, next_hop: int) -> None:
        packet = self.make_control(PacketType.RREP, rrep, rrep.destination, rrep.origin)
        self.unicast_control(packet, next_hop)

    def handle_rrep(self, r: Rrep, sender: int, packet: Packet | None = None) -> str:
        """Returns ``"consume"``, ``"forward"`` or ``"drop"``."""
        if self._update_route(
            r.destination, sender, r.hop_count + 1, r.dest_sequence, r.lifetime
        ):
            self._route_found(r.destination)
        if r.origin == self.node:
            if self.route(r.destination) is not None:
                self._flush(r.destination)
            return "consume"
        reverse = self.route(r.origin)
        if reverse is None:
            if packet is not None:
                self.drop(packet, DropReason.NRTE)
            return "drop"
        forward = Rrep(r.destination, r.dest_sequence, r.hop_count + 1, r.origin, r.lifetime)
        self._send_rrep(forward, reverse.next_hop)
        return "forward"

    # -- route maintenance -------------------------------------------------

    def _invalidate(self, entry: AodvEntry, sequence: int) -> None:
        entry.valid = False
        entry.dest_sequence = max(entry.dest_sequence, sequence)

    def handle_link_break(self, dead_neighbor: int) -> Rerr | None:
        """Invalidate routes through ``dead_neighbor`` and broadcast a RERR."""
        lost = []
        for dest in sorted(self.routes):
            entry = self.routes[dest]
            if entry.valid and entry.next_hop == dead_neighbor:
                self._invalidate(entry, entry.dest_sequence + 1)
                lost.append((dest, entry.dest_sequence))
        if not lost:
            return None
        logger.debug("t=%.6f node %d lost %d, RERR for %s", self.now, self.node, dead_neighbor, lost)
        return self._send_rerr(lost)

    def handle_rerr(self, r: Rerr, sender: int) -> Rerr | None:
        """Invalidate routes that used ``sender`` for a listed destination; propagate."""
        lost = []
        for dest, seq in r.unreachable:
            entry = self.routes.get(dest)
            if entry is not None and entry.valid and entry.next_hop == sender:
                self._invalidate(entry, seq)
                lost.append((dest, entry.dest_sequence))
        if not lost:
            return None
        return self._send_rerr(lost)

    def _send_rerr(self, lost: list[tuple[int, int]]) -> Rerr:
        rerr = Rerr(tuple(lost))
        self.broadcast_control(self.make_control(PacketType.RERR, rerr, self.node, BROADCAST))
        return rerr

    def on_link_failure(self, packet: Packet, next_hop: int) -> None:
        self.handle_link_break(next_hop)
        if isinstance(packet, DataPacket) and packet.src == self.node:
            self._buffer(packet)
        else:
            self.drop(packet, DropReason.NRTE)

    # -- forwarding --------------------------------------------------------

    def route_data(self, packet: DataPacket) -> None:
        entry = self.route(packet.dst)
        if entry is not None:
            if packet.dst in self.pending:
                # packets buffered earlier leave first
                self._buffer(packet)
                self._flush(packet.dst)
                return
            entry.expires_at = self.now + self.config.active_route_timeout
            self.transmit_data(packet, entry.next_hop)
            return
        if packet.src == self.node:
            self._buffer(packet)
            return
        self.drop(packet, DropReason.NRTE)
        stale = self.routes.get(packet.dst)
        self._send_rerr([(packet.dst, stale.dest_sequence if stale is not None else 0)])
