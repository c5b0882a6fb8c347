"""
Trace recording and performance metrics.

Every send/receive/forward/drop passes through a ``MetricsCollector``, which
writes one trace line per event and feeds the same ``TraceRecord`` into a
``TraceAggregator``.  ``parse_trace`` runs the identical aggregator over a
trace file, so a report rebuilt from the trace equals the in-memory report
exactly.

Trace line format (space separated)::

    <op> <time> <node> <layer> <ptype> <pkt_id> <size> <src> <dst> <reason>

Times are integer microseconds internally and 6-decimal seconds in text.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from enum import Enum
from typing import TextIO

from manet_sim.engine import format_time, micros
from manet_sim.packets import DataPacket, Packet, PacketType

logger = logging.getLogger("manet_sim.metrics")


class TraceOp(str, Enum):
    SEND = "s"
    RECEIVE = "r"
    FORWARD = "f"
    DROP = "d"


class Layer(str, Enum):
    AGT = "AGT"
    RTR = "RTR"
    MAC = "MAC"


class DropReason(str, Enum):
    NRTE = "NRTE"  # no route
    IFQ = "IFQ"  # interface queue full
    TTL = "TTL"
    COL = "COL"  # collision
    END = "END"  # still in flight at the horizon


class TraceFormatError(ValueError):
    """Raised when a trace line cannot be parsed."""


@dataclass(frozen=True, slots=True)
class TraceRecord:
    op: TraceOp
    time_us: int
    node: int
    layer: Layer
    ptype: PacketType
    uid: int
    size: int
    src: int
    dst: int
    reason: DropReason | None = None

    def line(self) -> str:
        reason = self.reason.value if self.reason is not None else "-"
        return (
            f"{self.op.value} {format_time(self.time_us)} {self.node} "
            f"{self.layer.value} {self.ptype.value} {self.uid} {self.size} "
            f"{self.src} {self.dst} {reason}"
        )

    @classmethod
    def parse(cls, line: str) -> TraceRecord:
        fields = line.split()
        if len(fields) != 10:
            raise TraceFormatError(f"expected 10 fields, got {len(fields)}: {line!r}")
        op, time, node, layer, ptype, uid, size, src, dst, reason = fields
        try:
            return cls(
                op=TraceOp(op),
                time_us=micros(float(time)),
                node=int(node),
                layer=Layer(layer),
                ptype=PacketType(ptype),
                uid=int(uid),
                size=int(size),
                src=int(src),
                dst=int(dst),
                reason=None if reason == "-" else DropReason(reason),
            )
        except ValueError as e:
            raise TraceFormatError(f"malformed trace line {line!r}: {e}") from e


def write_trace(record: TraceRecord, sink: TextIO) -> str:
    """Write ``record`` as one line to ``sink`` and return the line."""
    line = record.line()
    sink.write(line + "\n")
    return line


# ---------------------------------------------------------------------------
# Metric formulas
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class PacketRecord:
    """Life of one application packet (times in integer microseconds)."""

    flow_id: int
    seq: int
    uid: int
    size: int
    sent_us: int
    holder: int
    source: int = -1
    sink: int = -1
    received_us: int | None = None
    dropped: DropReason | None = None

    @property
    def sent_at(self) -> float:
        return self.sent_us / 1_000_000

    @property
    def received_at(self) -> float | None:
        return None if self.received_us is None else self.received_us / 1_000_000

    @property
    def settled(self) -> bool:
        return self.received_us is not None or self.dropped is not None


def pdf(sent: int, received: int) -> float | None:
    """Packet delivery fraction in percent; ``None`` marks a run with no traffic."""
    if received < 0 or received > sent:
        raise ValueError(f"received={received} must lie in [0, sent={sent}]")
    if sent == 0:
        return None
    return 100.0 * received / sent


def _mean_delay(total_us: int, count: int) -> float | None:
    if count == 0:
        return None
    return total_us / count / 1_000_000


def avg_delay(records: Iterable[PacketRecord]) -> float | None:
    """Mean end-to-end delay in seconds over delivered packets; ``None`` if none."""
    total = count = 0
    for r in records:
        if r.received_us is not None:
            total += r.received_us - r.sent_us
            count += 1
    return _mean_delay(total, count)


def throughput(data_bytes_delivered: int, horizon: float) -> float:
    """Delivered application throughput in kb/s over the whole horizon."""
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    return data_bytes_delivered * 8 / horizon / 1000


def routing_overhead(records: Iterable[TraceRecord]) -> tuple[int, int]:
    """Count hop-wise control transmissions and their bytes."""
    packets = nbytes = 0
    for rec in records:
        if rec.op is TraceOp.SEND and rec.layer is Layer.RTR and rec.ptype.is_control:
            packets += 1
            nbytes += rec.size
    return packets, nbytes


@dataclass(frozen=True)
class MetricsReport:
    sent: int
    received: int
    pdf: float | None
    avg_delay: float | None
    throughput: float
    routing_packets: int
    routing_bytes: int
    data_bytes_delivered: int
    data_bytes_transmitted: int
    drops: dict[str, int] = field(default_factory=dict)

    @property
    def packet_loss(self) -> int:
        """Application packets sent but never received."""
        return self.sent - self.received

    @property
    def overhead_fraction(self) -> float | None:
        """Share of transmitted bytes spent on routing control."""
        total = self.routing_bytes + self.data_bytes_transmitted
        return self.routing_bytes / total if total else None

    def to_dict(self) -> dict[str, object]:
        return {
            "sent": self.sent,
            "received": self.received,
            "packet_loss": self.packet_loss,
            "pdf_percent": self.pdf,
            "avg_delay_s": self.avg_delay,
            "throughput_kbps": self.throughput,
            "routing_packets": self.routing_packets,
            "routing_bytes": self.routing_bytes,
            "data_bytes_delivered": self.data_bytes_delivered,
            "data_bytes_transmitted": self.data_bytes_transmitted,
            "overhead_fraction": self.overhead_fraction,
            "drops": dict(self.drops),
        }


class TraceAggregator:
    """Folds trace records into the run totals behind a ``MetricsReport``."""

    def __init__(self) -> None:
        self.sent = 0
        self.received = 0
        self.delay_total_us = 0
        self.data_bytes_delivered = 0
        self.data_bytes_transmitted = 0
        self.routing_packets = 0
        self.routing_bytes = 0
        self.drops: Counter[DropReason] = Counter()
        self._sent_us: dict[int, int] = {}
        self._received: set[int] = set()

    def add(self, rec: TraceRecord) -> None:
        if rec.ptype is not PacketType.CBR:
            if rec.op is TraceOp.SEND and rec.layer is Layer.RTR:
                self.routing_packets += 1
                self.routing_bytes += rec.size
            return
        if rec.op is TraceOp.SEND and rec.layer is Layer.AGT:
            self.sent += 1
            self._sent_us[rec.uid] = rec.time_us
        elif rec.op is TraceOp.RECEIVE and rec.layer is Layer.AGT:
            if rec.uid in self._received or rec.uid not in self._sent_us:
                return
            self._received.add(rec.uid)
            self.received += 1
            self.delay_total_us += rec.time_us - self._sent_us[rec.uid]
            self.data_bytes_delivered += rec.size
        elif rec.op is TraceOp.FORWARD:
            self.data_bytes_transmitted += rec.size
        elif rec.op is TraceOp.DROP and rec.reason is not None:
            self.drops[rec.reason] += 1

    def report(self, horizon: float) -> MetricsReport:
        return MetricsReport(
            sent=self.sent,
            received=self.received,
            pdf=pdf(self.sent, self.received),
            avg_delay=_mean_delay(self.delay_total_us, self.received),
            throughput=throughput(self.data_bytes_delivered, horizon),
            routing_packets=self.routing_packets,
            routing_bytes=self.routing_bytes,
            data_bytes_delivered=self.data_bytes_delivered,
            data_bytes_transmitted=self.data_bytes_transmitted,
            drops={reason.value: self.drops[reason] for reason in DropReason},
        )


def parse_trace(lines: Iterable[str], horizon: float) -> MetricsReport:
    """Rebuild the run report from trace text alone."""
    agg = TraceAggregator()
    for line in lines:
        if line.strip():
            agg.add(TraceRecord.parse(line))
    return agg.report(horizon)


# ---------------------------------------------------------------------------
# Collector
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class FlowBalance:
    sent: int
    delivered: int
    dropped: dict[str, int]
    in_flight: int

    @property
    def balanced(self) -> bool:
        return self.sent == self.delivered + sum(self.dropped.values()) + self.in_flight


class MetricsCollector:
    """Records every packet event of one run and writes the trace."""

    def __init__(
        self,
        horizon: float,
        clock: Callable[[], float],
        sink: TextIO | None = None,
    ) -> None:
        self.horizon = horizon
        self._clock = clock
        self._sink = sink
        self._agg = TraceAggregator()
        self._records: dict[int, PacketRecord] = {}
        self._finalized = False

    @property
    def records(self) -> list[PacketRecord]:
        """Per-packet life records in emission order."""
        return list(self._records.values())

    def _emit(
        self,
        op: TraceOp,
        node: int,
        layer: Layer,
        packet: Packet,
        reason: DropReason | None = None,
        time_us: int | None = None,
    ) -> TraceRecord:
        rec = TraceRecord(
            op=op,
            time_us=micros(self._clock()) if time_us is None else time_us,
            node=node,
            layer=layer,
            ptype=packet.ptype,
            uid=packet.uid,
            size=packet.size,
            src=packet.src,
            dst=packet.dst,
            reason=reason,
        )
        self._agg.add(rec)
        if self._sink is not None:
            write_trace(rec, self._sink)
        return rec

    def app_send(self, node: int, packet: DataPacket) -> None:
        rec = self._emit(TraceOp.SEND, node, Layer.AGT, packet)
        self._records[packet.uid] = PacketRecord(
            flow_id=packet.flow_id,
            seq=packet.seq,
            uid=packet.uid,
            size=packet.size,
            sent_us=rec.time_us,
            holder=node,
            source=packet.src,
            sink=packet.dst,
        )

    def app_receive(self, node: int, packet: DataPacket) -> bool:
        """Record a receipt at the sink; returns False for duplicates."""
        rec = self._emit(TraceOp.RECEIVE, node, Layer.AGT, packet)
        record = self._records.get(packet.uid)
        if record is None or record.received_us is not None:
            return False
        record.received_us = rec.time_us
        record.holder = node
        return True

    def forward(self, node: int, packet: DataPacket) -> None:
        self._emit(TraceOp.FORWARD, node, Layer.RTR, packet)
        if (record := self._records.get(packet.uid)) is not None:
            record.holder = node

    def control_send(self, node: int, packet: Packet) -> None:
        self._emit(TraceOp.SEND, node, Layer.RTR, packet)

    def drop(self, node: int, layer: Layer, packet: Packet, reason: DropReason) -> None:
        self._emit(TraceOp.DROP, node, layer, packet, reason)
        if packet.ptype is PacketType.CBR:
            record = self._records.get(packet.uid)
            if record is not None and not record.settled:
                record.dropped = reason
                record.holder = node

    def finalize(self) -> None:
        """Close out packets still in flight at the horizon as ``END`` drops."""
        if self._finalized:
            return
        self._finalized = True
        end_us = micros(self.horizon)
        for record in self._records.values():
            if record.settled:
                continue
            ghost = DataPacket(
                uid=record.uid,
                ptype=PacketType.CBR,
                src=record.source,
                dst=record.sink,
                size=record.size,
                created_at=record.sent_at,
            )
            self._emit(TraceOp.DROP, record.holder, Layer.RTR, ghost, DropReason.END, end_us)
            record.dropped = DropReason.END
        if self._sink is not None:
            self._sink.flush()

    def report(self) -> MetricsReport:
        return self._agg.report(self.horizon)

    def flow_balance(self) -> dict[int, FlowBalance]:
        """Per-flow conservation ledger: sent = delivered + dropped + in flight."""
        sent: Counter[int] = Counter()
        delivered: Counter[int] = Counter()
        in_flight: Counter[int] = Counter()
        dropped: dict[int, Counter[str]] = {}
        for r in self._records.values():
            sent[r.flow_id] += 1
            if r.received_us is not None:
                delivered[r.flow_id] += 1
            elif r.dropped is not None:
                dropped.setdefault(r.flow_id, Counter())[r.dropped.value] += 1
            else:
                in_flight[r.flow_id] += 1
        return {
            flow: FlowBalance(
                sent[flow], delivered[flow], dict(dropped.get(flow, {})), in_flight[flow]
            )
            for flow in sorted(sent)
        }
