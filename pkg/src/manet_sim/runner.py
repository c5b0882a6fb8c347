"""
Scenario execution, pause-time sweeps and CSV reporting.

``Network`` wires one run together (clock, mobility, channel, one routing agent
per node, CBR traffic, metrics).  ``sweep`` repeats runs over protocols, pause
times and seeds, optionally in worker processes, and writes one CSV row per
run plus ``seed=mean`` summary rows.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import itertools
import json
import logging
import sys
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import TextIO

from manet_sim.aodv import AodvAgent
from manet_sim.channel import Channel
from manet_sim.config import ConfigError, ScenarioConfig, parse_config
from manet_sim.dsdv import DsdvAgent
from manet_sim.engine import SimulationError, Simulator, StreamLabel
from manet_sim.metrics import DropReason, MetricsCollector, MetricsReport
from manet_sim.mobility import MobilityModel, Point
from manet_sim.packets import DataPacket
from manet_sim.routing import NodeServices, RoutingAgent
from manet_sim.traffic import Flow, TrafficGenerator, generate_flows

logger = logging.getLogger("manet_sim.runner")

AGENTS: dict[str, type[RoutingAgent]] = {"aodv": AodvAgent, "dsdv": DsdvAgent}

DEFAULT_PAUSES = (0.0, 20.0, 40.0, 60.0, 80.0, 100.0)
DEFAULT_SEEDS = (1, 2, 3, 4, 5)
DEFAULT_PROTOCOLS = ("aodv", "dsdv")

CSV_HEADER = (
    "protocol",
    "pause_time",
    "seed",
    "sent",
    "received",
    "pdf_percent",
    "avg_delay_s",
    "throughput_kbps",
    "routing_pkts",
    "routing_bytes",
    "drop_nrte",
    "drop_ifq",
    "drop_ttl",
    "drop_col",
    "drop_end",
)

_DROP_COLUMNS = (
    DropReason.NRTE,
    DropReason.IFQ,
    DropReason.TTL,
    DropReason.COL,
    DropReason.END,
)


class SweepError(RuntimeError):
    """A run inside a sweep failed; rows written so far are kept."""


# ---------------------------------------------------------------------------
# Single run
# ---------------------------------------------------------------------------


class Network:
    """All state of one simulation run."""

    def __init__(
        self,
        config: ScenarioConfig,
        trace: TextIO | None = None,
        placement: Sequence[Point] | None = None,
    ) -> None:
        self.config = config
        self.sim = Simulator(config.seed)
        self.mobility = MobilityModel(
            config.nodes,
            config.arena(),
            config.speed,
            config.pause_time,
            config.seed,
            placement,
        )
        self.metrics = MetricsCollector(config.horizon, lambda: self.sim.now, trace)
        self.channel = Channel(self.sim, config.radio(), self.mobility, self.metrics)
        self._uids = itertools.count()
        self.traffic = TrafficGenerator(
            self.sim, self.metrics, self.new_uid, self._send, ttl=config.ttl
        )
        services = NodeServices(
            sim=self.sim,
            channel=self.channel,
            metrics=self.metrics,
            config=config,
            new_uid=self.new_uid,
            deliver=self._deliver,
        )
        agent_cls = AGENTS[config.protocol]
        self.agents: list[RoutingAgent] = [
            agent_cls(node, services, self.sim.stream(StreamLabel.PROTOCOL, node))
            for node in range(config.nodes)
        ]
        self.flows: list[Flow] = generate_flows(
            config.flows,
            config.nodes,
            self.sim.stream(StreamLabel.TRAFFIC),
            rate=config.rate,
            packet_size=config.packet_size,
            start_at=config.traffic_start,
            stop_at=config.horizon,
        )
        self._started = False

    def new_uid(self) -> int:
        return next(self._uids)

    def _send(self, node: int, packet: DataPacket) -> None:
        self.agents[node].send_data(packet)

    def _deliver(self, node: int, packet: DataPacket) -> None:
        self.traffic.deliver(node, packet)

    def start(self) -> None:
        """Arm protocol timers and traffic sources; idempotent."""
        if self._started:
            return
        self._started = True
        for agent in self.agents:
            agent.start()
        for flow in self.flows:
            self.traffic.add_flow(flow)

    def run(self) -> MetricsReport:
        """Run to the horizon and return the report."""
        self.start()
        self.sim.run_until(self.config.horizon)
        self.metrics.finalize()
        return self.metrics.report()


def trace_name(config: ScenarioConfig) -> str:
    return f"{config.protocol}_n{config.nodes}_p{config.pause_time:g}_s{config.seed}.tr"


def run_scenario(
    config: ScenarioConfig,
    trace_path: str | Path | None = None,
    placement: Sequence[Point] | None = None,
) -> MetricsReport:
    """Execute one run; writes the trace to ``trace_path`` when given."""
    logger.info(
        "run %s nodes=%d pause=%g seed=%d", config.protocol, config.nodes,
        config.pause_time, config.seed,
    )
    with ExitStack() as stack:
        trace = None
        if trace_path is not None:
            path = Path(trace_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            trace = stack.enter_context(path.open("w", encoding="ascii", newline="\n"))
        report = Network(config, trace, placement).run()
    logger.info(
        "done %s pause=%g seed=%d: sent=%d received=%d routing_pkts=%d",
        config.protocol, config.pause_time, config.seed,
        report.sent, report.received, report.routing_packets,
    )
    return report


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(value: float | None, digits: int) -> str:
    return "NA" if value is None else f"{value:.{digits}f}"


def format_row(protocol: str, pause_time: float, seed: int, report: MetricsReport) -> list[str]:
    return [
        protocol,
        f"{pause_time:g}",
        str(seed),
        str(report.sent),
        str(report.received),
        _fmt(report.pdf, 4),
        _fmt(report.avg_delay, 4),
        _fmt(report.throughput, 2),
        str(report.routing_packets),
        str(report.routing_bytes),
        *(str(report.drops.get(reason.value, 0)) for reason in _DROP_COLUMNS),
    ]


def _mean(values: Iterable[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return fmean(defined) if defined else None


@dataclass(frozen=True, slots=True)
class SweepRow:
    protocol: str
    pause_time: float
    seed: int
    report: MetricsReport

    def csv_row(self) -> list[str]:
        return format_row(self.protocol, self.pause_time, self.seed, self.report)


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def groups(self) -> dict[tuple[str, float], list[SweepRow]]:
        """Rows keyed by (protocol, pause_time), in row order."""
        out: dict[tuple[str, float], list[SweepRow]] = {}
        for row in self.rows:
            out.setdefault((row.protocol, row.pause_time), []).append(row)
        return out

    def mean(self, protocol: str, pause_time: float, attr: str) -> float | None:
        """Seed-mean of a ``MetricsReport`` attribute for one group."""
        rows = self.groups().get((protocol, pause_time), [])
        return _mean(getattr(r.report, attr) for r in rows)

    def summary_rows(self) -> list[list[str]]:
        summary = []
        for (protocol, pause_time), rows in self.groups().items():
            reports = [r.report for r in rows]

            def count(attr: str) -> str:
                return _fmt(fmean(getattr(r, attr) for r in reports), 2)

            summary.append([
                protocol,
                f"{pause_time:g}",
                "mean",
                count("sent"),
                count("received"),
                _fmt(_mean(r.pdf for r in reports), 4),
                _fmt(_mean(r.avg_delay for r in reports), 4),
                _fmt(fmean(r.throughput for r in reports), 2),
                count("routing_packets"),
                count("routing_bytes"),
                *(
                    _fmt(fmean(r.drops.get(reason.value, 0) for r in reports), 2)
                    for reason in _DROP_COLUMNS
                ),
            ])
        return summary

    def csv_text(self) -> str:
        lines = [",".join(CSV_HEADER)]
        lines += [",".join(row.csv_row()) for row in self.rows]
        lines += [",".join(row) for row in self.summary_rows()]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


def _run_job(config: ScenarioConfig, trace_path: str | None) -> MetricsReport:
    # module level so worker processes can unpickle it
    return run_scenario(config, trace_path)


def sweep_jobs(
    base: ScenarioConfig,
    pause_times: Sequence[float],
    seeds: Sequence[int],
    protocols: Sequence[str],
) -> list[ScenarioConfig]:
    """Configs of the cross product in (protocol, pause_time, seed) order."""
    if not pause_times:
        raise ConfigError("at least one pause time is required", "pauses")
    if not seeds:
        raise ConfigError("at least one seed is required", "seeds")
    if not protocols:
        raise ConfigError("at least one protocol is required", "protocols")
    return [
        base.replace(protocol=protocol, pause_time=pause, seed=seed)
        for protocol in sorted(set(protocols))
        for pause in sorted(set(pause_times))
        for seed in sorted(set(seeds))
    ]


async def sweep_async(
    base: ScenarioConfig,
    pause_times: Sequence[float] = DEFAULT_PAUSES,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    protocols: Sequence[str] = DEFAULT_PROTOCOLS,
    *,
    out: str | Path | None = None,
    trace_dir: str | Path | None = None,
    workers: int = 1,
) -> SweepResult:
    """Run the sweep, writing CSV rows to ``out`` as results arrive in order.

    Raises:
        SweepError: a run failed.  Rows completed before it remain in ``out``;
            summary rows are only written after every run succeeded.
    """
    jobs = sweep_jobs(base, pause_times, seeds, protocols)
    trace_paths = [
        None if trace_dir is None else str(Path(trace_dir) / trace_name(cfg)) for cfg in jobs
    ]
    logger.info("sweep: %d runs on %d worker(s)", len(jobs), workers)
    result = SweepResult()

    with ExitStack() as stack:
        writer = None
        if out is not None:
            path = Path(out)
            path.parent.mkdir(parents=True, exist_ok=True)
            handle = stack.enter_context(path.open("w", newline=""))
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER)

        if workers > 1:
            loop = asyncio.get_running_loop()
            pool = stack.enter_context(ProcessPoolExecutor(max_workers=workers))
            futures = [
                loop.run_in_executor(pool, _run_job, cfg, trace)
                for cfg, trace in zip(jobs, trace_paths)
            ]
        else:
            futures = None

        for i, cfg in enumerate(jobs):
            try:
                if futures is not None:
                    report = await futures[i]
                else:
                    report = _run_job(cfg, trace_paths[i])
                    await asyncio.sleep(0)
            except Exception as e:
                logger.error(
                    "run %s pause=%g seed=%d failed: %s",
                    cfg.protocol, cfg.pause_time, cfg.seed, e,
                )
                if futures is not None:
                    for pending in futures[i + 1:]:
                        pending.cancel()
                raise SweepError(
                    f"run {cfg.protocol} pause={cfg.pause_time:g} seed={cfg.seed} failed: {e}"
                ) from e
            row = SweepRow(cfg.protocol, cfg.pause_time, cfg.seed, report)
            result.rows.append(row)
            if writer is not None:
                writer.writerow(row.csv_row())
                handle.flush()
            logger.info("sweep: %d/%d runs complete", i + 1, len(jobs))

        if writer is not None:
            writer.writerows(result.summary_rows())
    return result


def sweep(
    base: ScenarioConfig,
    pause_times: Sequence[float] = DEFAULT_PAUSES,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    protocols: Sequence[str] = DEFAULT_PROTOCOLS,
    *,
    out: str | Path | None = None,
    trace_dir: str | Path | None = None,
    workers: int = 1,
) -> SweepResult:
    """Synchronous wrapper around ``sweep_async``."""
    return asyncio.run(
        sweep_async(
            base, pause_times, seeds, protocols,
            out=out, trace_dir=trace_dir, workers=workers,
        )
    )


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------


def parse_seeds(text: str) -> list[int]:
    """``"1..5"`` (inclusive range) or ``"1,2,7"``."""
    try:
        if ".." in text:
            lo, _, hi = text.partition("..")
            first, last = int(lo), int(hi)
            if last < first:
                raise ValueError(f"empty range {text!r}")
            return list(range(first, last + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"seeds: cannot parse {text!r}: {e}", "seeds") from e


def parse_pauses(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"pauses: cannot parse {text!r}: {e}", "pauses") from e


def parse_overrides(extra: Sequence[str]) -> dict[str, str]:
    """Turn leftover ``--key value`` / ``--key=value`` arguments into overrides."""
    overrides: dict[str, str] = {}
    args = list(extra)
    while args:
        arg = args.pop(0)
        if not arg.startswith("--") or len(arg) == 2:
            raise ConfigError(f"unexpected argument {arg!r}")
        key, sep, value = arg[2:].partition("=")
        if not sep:
            if not args:
                raise ConfigError(f"missing value for --{key}", key.replace("-", "_"))
            value = args.pop(0)
        overrides[key.replace("-", "_")] = value
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manet-sim",
        description="MANET routing simulator (AODV / DSDV)",
        allow_abbrev=False,
    )
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", type=str, default=None, help="key = value config file")
    common.add_argument(
        "--log-level",
        type=str,
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Set the logging level (default: INFO)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser(
        "run", parents=[common], allow_abbrev=False, help="run one scenario"
    )
    run.add_argument("--trace-dir", type=str, default=".", help="directory for the trace file")

    sw = sub.add_parser(
        "sweep",
        parents=[common],
        allow_abbrev=False,
        help="sweep pause times, seeds and protocols",
    )
    sw.add_argument("--pauses", type=str, default=",".join(f"{p:g}" for p in DEFAULT_PAUSES))
    sw.add_argument("--seeds", type=str, default="1..5", help="'1..5' or '1,2,3'")
    sw.add_argument("--protocols", type=str, default=",".join(DEFAULT_PROTOCOLS))
    sw.add_argument("--out", type=str, default="results.csv")
    sw.add_argument("--trace-dir", type=str, default=None, help="write one trace per run here")
    sw.add_argument("--workers", type=int, default=1, help="worker processes (default: 1)")
    return parser


def _configure_logging(log_level: str) -> None:
    numeric_level = getattr(logging, log_level.upper(), None)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO
    # stdout carries the JSON report; logs go to stderr
    logging.basicConfig(level=numeric_level, stream=sys.stderr, force=True)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line; returns the process exit code."""
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    _configure_logging(args.log_level)
    try:
        config = parse_config(args.config, parse_overrides(extra))
        if args.command == "run":
            trace_path = Path(args.trace_dir) / trace_name(config)
            report = run_scenario(config, trace_path)
            print(
                json.dumps(
                    {
                        "config": config.model_dump(by_alias=True),
                        "trace": str(trace_path),
                        "report": report.to_dict(),
                    },
                    indent=2,
                )
            )
        else:
            result = sweep(
                config,
                parse_pauses(args.pauses),
                parse_seeds(args.seeds),
                [p.strip() for p in args.protocols.split(",") if p.strip()],
                out=args.out,
                trace_dir=args.trace_dir,
                workers=max(1, args.workers),
            )
            logger.info("wrote %d rows to %s", len(result.rows), args.out)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return 1
    except (SimulationError, SweepError, OSError) as e:
        logger.error("run failed: %s", e)
        return 2
    return 0


def cli() -> None:
    """CLI entry point."""
    sys.exit(main())


if __name__ == "__main__":
    cli()
