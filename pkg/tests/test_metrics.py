"""Tests for metric formulas, trace records and the collector."""

from io import StringIO

import pytest

from manet_sim.metrics import (
    DropReason,
    Layer,
    MetricsCollector,
    PacketRecord,
    TraceFormatError,
    TraceOp,
    TraceRecord,
    avg_delay,
    parse_trace,
    pdf,
    routing_overhead,
    throughput,
)
from manet_sim.packets import BROADCAST, DataPacket, Packet, PacketType


def data(uid: int, src: int = 5, dst: int = 23, seq: int = 0) -> DataPacket:
    return DataPacket(uid, PacketType.CBR, src, dst, 512, 0.0, flow_id=0, seq=seq)


class Clock:
    def __init__(self) -> None:
        self.now = 0.0

    def __call__(self) -> float:
        return self.now


class TestFormulas:
    def test_pdf(self) -> None:
        assert pdf(100, 97) == 97.0
        assert pdf(4, 4) == 100.0

    def test_pdf_without_traffic(self) -> None:
        assert pdf(0, 0) is None

    def test_pdf_rejects_impossible_counts(self) -> None:
        with pytest.raises(ValueError):
            pdf(5, 6)
        with pytest.raises(ValueError):
            pdf(5, -1)

    def test_avg_delay(self) -> None:
        records = [
            PacketRecord(0, 0, 1, 512, sent_us=1_000_000, holder=0, received_us=1_010_000),
            PacketRecord(0, 1, 2, 512, sent_us=2_000_000, holder=0, received_us=2_030_000),
            PacketRecord(0, 2, 3, 512, sent_us=3_000_000, holder=0),
        ]
        assert avg_delay(records) == pytest.approx(0.02)
        assert avg_delay(records[2:]) is None

    def test_throughput(self) -> None:
        assert throughput(25_000, 200.0) == 1.0
        with pytest.raises(ValueError):
            throughput(1, 0.0)

    def test_routing_overhead(self) -> None:
        records = [
            TraceRecord(TraceOp.SEND, 0, 1, Layer.RTR, PacketType.RREQ, 1, 44, 1, 4),
            TraceRecord(TraceOp.SEND, 0, 2, Layer.RTR, PacketType.DSDV, 2, 32, 2, -1),
            TraceRecord(TraceOp.SEND, 0, 1, Layer.AGT, PacketType.CBR, 3, 512, 1, 4),
            TraceRecord(TraceOp.DROP, 0, 1, Layer.MAC, PacketType.RREP, 4, 40, 4, 1, DropReason.IFQ),
        ]
        assert routing_overhead(records) == (2, 76)


class TestTraceRecord:
    def test_line(self) -> None:
        rec = TraceRecord(TraceOp.SEND, 10_000_000, 5, Layer.AGT, PacketType.CBR, 17, 512, 5, 23)
        assert rec.line() == "s 10.000000 5 AGT cbr 17 512 5 23 -"

    def test_drop_line_parses_back(self) -> None:
        line = "d 12.345678 3 RTR cbr 99 512 5 23 NRTE"
        rec = TraceRecord.parse(line)
        assert rec.time_us == 12_345_678
        assert rec.reason is DropReason.NRTE
        assert rec.line() == line

    def test_malformed(self) -> None:
        with pytest.raises(TraceFormatError):
            TraceRecord.parse("s 1.0 2")
        with pytest.raises(TraceFormatError):
            TraceRecord.parse("x 1.000000 2 AGT cbr 1 512 2 3 -")


class TestCollector:
    def test_delivery(self) -> None:
        clock = Clock()
        collector = MetricsCollector(200.0, clock)
        pkt = data(1)
        clock.now = 10.0
        collector.app_send(5, pkt)
        collector.forward(5, pkt)
        clock.now = 10.004
        collector.app_receive(23, pkt)
        report = collector.report()
        assert report.sent == 1
        assert report.received == 1
        assert report.pdf == 100.0
        assert report.avg_delay == pytest.approx(0.004)
        assert report.data_bytes_delivered == 512
        assert report.data_bytes_transmitted == 512
        assert report.throughput == pytest.approx(512 * 8 / 200 / 1000)
        assert avg_delay(collector.records) == pytest.approx(report.avg_delay)
        assert report.to_dict()["packet_loss"] == 0

    def test_duplicate_receipt_counts_once(self) -> None:
        clock = Clock()
        collector = MetricsCollector(200.0, clock)
        pkt = data(1)
        collector.app_send(5, pkt)
        assert collector.app_receive(23, pkt) is True
        assert collector.app_receive(23, pkt) is False
        assert collector.report().received == 1

    def test_control_counts_as_overhead(self) -> None:
        clock = Clock()
        collector = MetricsCollector(200.0, clock)
        collector.control_send(1, Packet(7, PacketType.RREQ, 1, 4, 44, 0.0))
        collector.control_send(2, Packet(8, PacketType.RERR, 2, BROADCAST, 36, 0.0))
        report = collector.report()
        assert report.routing_packets == 2
        assert report.routing_bytes == 80
        assert report.pdf is None

    def test_drops_zero_filled(self) -> None:
        collector = MetricsCollector(200.0, Clock())
        pkt = data(1)
        collector.app_send(5, pkt)
        collector.drop(5, Layer.RTR, pkt, DropReason.NRTE)
        report = collector.report()
        assert report.drops == {"NRTE": 1, "IFQ": 0, "TTL": 0, "COL": 0, "END": 0}
        assert report.packet_loss == 1
        assert report.to_dict()["packet_loss"] == 1

    def test_finalize_closes_in_flight_packets(self) -> None:
        clock = Clock()
        trace = StringIO()
        collector = MetricsCollector(200.0, clock, trace)
        pkt = data(4)
        clock.now = 199.9
        collector.app_send(5, pkt)
        collector.forward(5, pkt)
        collector.finalize()
        collector.finalize()
        lines = trace.getvalue().splitlines()
        assert lines[-1] == "d 200.000000 5 RTR cbr 4 512 5 23 END"
        assert sum(line.endswith("END") for line in lines) == 1
        assert collector.report().drops["END"] == 1

    def test_flow_balance(self) -> None:
        collector = MetricsCollector(200.0, Clock())
        for seq in range(4):
            collector.app_send(5, data(seq, seq=seq))
        collector.app_receive(23, data(0, seq=0))
        collector.drop(5, Layer.RTR, data(1, seq=1), DropReason.NRTE)
        before = collector.flow_balance()[0]
        assert before.in_flight == 2
        assert before.balanced
        collector.finalize()
        after = collector.flow_balance()[0]
        assert after.sent == 4
        assert after.delivered == 1
        assert after.dropped == {"NRTE": 1, "END": 2}
        assert after.in_flight == 0
        assert after.balanced

    def test_report_rebuilt_from_trace(self) -> None:
        clock = Clock()
        trace = StringIO()
        collector = MetricsCollector(50.0, clock, trace)
        for uid in range(3):
            clock.now = 1.0 + uid * 0.25
            pkt = data(uid, seq=uid)
            collector.app_send(5, pkt)
            collector.forward(5, pkt)
            collector.control_send(5, Packet(100 + uid, PacketType.RREQ, 5, 23, 44, clock.now))
        clock.now = 1.3333337
        collector.app_receive(23, data(0))
        collector.drop(9, Layer.MAC, data(1, seq=1), DropReason.IFQ)
        collector.finalize()
        rebuilt = parse_trace(trace.getvalue().splitlines(), 50.0)
        assert rebuilt == collector.report()
