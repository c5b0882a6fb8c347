"""
Destination-Sequenced Distance Vector routing.

Every node keeps a route to every known destination and broadcasts its whole
table every ``update_interval`` seconds (plus per-cycle jitter), bumping its
own even sequence number by two each time.  Every adopted entry (new
destination, fresher sequence number, shorter path) is pushed sooner in
rate-limited, incremental triggered adverts.  A route is replaced by one
with a higher sequence number, or by one with the same sequence number and a
smaller hop count.  Broken routes get metric infinity and an odd sequence
number one above the last known even one, so any fresher advert from the
destination supersedes them.

Data packets without a usable route are dropped (``NRTE``); nothing is
buffered.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from manet_sim.engine import Event, RngStream
from manet_sim.metrics import DropReason
from manet_sim.packets import HEADER_BYTES, DataPacket, Packet, PacketType
from manet_sim.routing import NodeServices, RoutingAgent

logger = logging.getLogger("manet_sim.dsdv")

INFINITY = math.inf
ENTRY_BYTES = 12


@dataclass(slots=True)
class DsdvEntry:
    destination: int
    next_hop: int
    metric: float
    sequence: int
    installed_at: float
    changed: bool = False

    @property
    def reachable(self) -> bool:
        return self.metric != INFINITY

    def as_tuple(self) -> tuple[int, float, int]:
        return (self.destination, self.metric, self.sequence)


@dataclass(frozen=True, slots=True)
class DsdvAdvert:
    """Advertised ``(destination, metric, sequence)`` triples of ``origin``."""

    origin: int
    entries: tuple[tuple[int, float, int], ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("advert must list at least one destination")

    @property
    def size(self) -> int:
        return HEADER_BYTES + ENTRY_BYTES * len(self.entries)


class DsdvAgent(RoutingAgent):
    protocol = "dsdv"

    def __init__(self, node: int, services: NodeServices, rng: RngStream) -> None:
        super().__init__(node, services, rng)
        self.table: dict[int, DsdvEntry] = {node: DsdvEntry(node, node, 0, 0, 0.0)}
        self.periodic_sent = 0
        self.triggered_sent = 0
        self._cycle = 0
        self._periodic: Event | None = None
        self._triggered: Event | None = None
        self._last_triggered = -math.inf
        self._heard: dict[int, float] = {}

    @property
    def sequence(self) -> int:
        return self.table[self.node].sequence

    def metric(self, destination: int) -> float:
        entry = self.table.get(destination)
        return entry.metric if entry is not None else INFINITY

    def start(self) -> None:
        self._schedule_periodic()

    # -- timers ------------------------------------------------------------

    def _schedule_periodic(self) -> None:
        cfg = self.config
        fire_at = self._cycle * cfg.update_interval
        if cfg.dsdv_periodic_jitter > 0:
            fire_at += self.rng.uniform(0.0, cfg.dsdv_periodic_jitter)
        self._cycle += 1
        self._periodic = self.services.sim.schedule(
            max(fire_at, self.now), self.periodic_update
        )

    def _schedule_triggered(self) -> None:
        if self._triggered is not None and self._triggered.pending:
            return
        cfg = self.config
        delay = 0.0
        if cfg.dsdv_triggered_jitter > 0:
            delay = self.rng.uniform(0.0, cfg.dsdv_triggered_jitter)
        fire_at = max(self.now + delay, self._last_triggered + cfg.dsdv_triggered_interval)
        self._triggered = self.services.sim.schedule(fire_at, self.triggered_update)

    # -- adverts -----------------------------------------------------------

    def periodic_update(self) -> DsdvAdvert:
        """Broadcast the full table with a fresh own sequence number."""
        self._expire_stale()
        own = self.table[self.node]
        own.sequence += 2
        own.installed_at = self.now
        if self._triggered is not None:
            self.services.sim.cancel(self._triggered)
            self._triggered = None
        for entry in self.table.values():
            entry.changed = False
        advert = DsdvAdvert(
            self.node, tuple(self.table[d].as_tuple() for d in sorted(self.table))
        )
        self._send(advert)
        self.periodic_sent += 1
        self._schedule_periodic()
        return advert

    def triggered_update(self) -> DsdvAdvert | None:
        """Broadcast only the entries flagged since the last advert."""
        self._triggered = None
        changed = [self.table[d] for d in sorted(self.table) if self.table[d].changed]
        if not changed:
            return None
        for entry in changed:
            entry.changed = False
        self._last_triggered = self.now
        advert = DsdvAdvert(self.node, tuple(e.as_tuple() for e in changed))
        self._send(advert)
        self.triggered_sent += 1
        logger.debug("t=%.6f node %d triggered advert, %d entries", self.now, self.node, len(changed))
        return advert

    def _send(self, advert: DsdvAdvert) -> None:
        self.broadcast_control(self.make_control(PacketType.DSDV, advert, self.node))

    def handle_control(self, packet: Packet, sender: int) -> None:
        if packet.ptype is PacketType.DSDV:
            self.handle_advert(packet.payload, sender)

    def handle_advert(self, adv: DsdvAdvert, sender: int) -> list[int]:
        """Merge a neighbour's advert; returns destinations whose route changed."""
        self._heard[sender] = self.now
        changed: list[int] = []
        for dest, metric, seq in adv.entries:
            if dest == self.node:
                own = self.table[self.node]
                if seq > own.sequence:
                    # someone holds a newer (broken) sequence for us; jump past it
                    own.sequence = seq + 1 if seq % 2 else seq + 2
                    own.changed = True
                    changed.append(dest)
                continue
            candidate = metric + 1
            current = self.table.get(dest)
            if current is None:
                if candidate == INFINITY:
                    continue
                self.table[dest] = DsdvEntry(dest, sender, candidate, seq, self.now, changed=True)
                changed.append(dest)
                continue
            if seq > current.sequence or (
                seq == current.sequence and candidate < current.metric
            ):
                current.next_hop = sender
                current.metric = candidate
                current.sequence = seq
                current.installed_at = self.now
                current.changed = True
                changed.append(dest)
        if changed:
            self._schedule_triggered()
        return changed

    # -- link breaks -------------------------------------------------------

    def _break_routes_via(self, neighbor: int) -> list[int]:
        broken = []
        for entry in self.table.values():
            if entry.next_hop == neighbor and entry.destination != self.node and entry.reachable:
                entry.metric = INFINITY
                entry.sequence += 1
                entry.installed_at = self.now
                entry.changed = True
                broken.append(entry.destination)
        return broken

    def handle_link_break(self, dead_neighbor: int) -> list[int]:
        """Invalidate every route through ``dead_neighbor`` and announce it."""
        broken = self._break_routes_via(dead_neighbor)
        if broken:
            logger.debug(
                "t=%.6f node %d lost %d, broke routes to %s",
                self.now, self.node, dead_neighbor, broken,
            )
            self._schedule_triggered()
        return broken

    def _expire_stale(self) -> None:
        periods = self.config.dsdv_stale_periods
        if periods <= 0:
            return
        limit = self.now - periods * self.config.update_interval
        silent = {
            e.next_hop
            for e in self.table.values()
            if e.reachable
            and e.next_hop != self.node
            and self._heard.get(e.next_hop, e.installed_at) < limit
        }
        for neighbor in sorted(silent):
            self._break_routes_via(neighbor)

    def on_link_failure(self, packet: Packet, next_hop: int) -> None:
        self.handle_link_break(next_hop)
        self.drop(packet, DropReason.NRTE)

    # -- forwarding --------------------------------------------------------

    def next_hop(self, destination: int) -> int | None:
        entry = self.table.get(destination)
        if entry is None or not entry.reachable:
            return None
        return entry.next_hop

    def route_data(self, packet: DataPacket) -> None:
        hop = self.next_hop(packet.dst)
        if hop is None:
            self.drop(packet, DropReason.NRTE)
            return
        self.transmit_data(packet, hop)
