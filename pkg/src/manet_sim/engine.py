"""
Discrete-event engine for a single simulation run.

Events are kept in a binary heap keyed by ``(fire_at, sequence)`` so that
events scheduled for the same instant fire in insertion order.  Random numbers
come from independent, seedable PCG64 streams derived from ``(seed, label,
index)`` with numpy's ``SeedSequence`` spawn keys, which makes every run
reproducible across machines.

Nothing in this module is process-global: each ``Simulator`` owns its clock,
queue and counters, so independent runs can execute side by side.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

logger = logging.getLogger("manet_sim.engine")

_SEED_MASK = (1 << 64) - 1


class SimulationError(RuntimeError):
    """Raised on programming faults inside a run; the run must be aborted."""


def micros(t: float) -> int:
    """Quantise a simulation time to integer microseconds.

    Goes through the 6-decimal text form used in traces so that a time read
    back from a trace line maps to exactly the same integer.
    """
    whole, _, frac = f"{t:.6f}".partition(".")
    sign = -1 if whole.startswith("-") else 1
    return sign * (abs(int(whole)) * 1_000_000 + int(frac))


def format_time(us: int) -> str:
    """Render integer microseconds as seconds with 6 decimal places."""
    sign = "-" if us < 0 else ""
    us = abs(us)
    return f"{sign}{us // 1_000_000}.{us % 1_000_000:06d}"


# ---------------------------------------------------------------------------
# Random number streams
# ---------------------------------------------------------------------------


class StreamLabel(str, Enum):
    """Consumers of randomness; each gets its own independent stream."""

    MOBILITY = "mobility"
    TRAFFIC = "traffic"
    CHANNEL_JITTER = "channel-jitter"
    PROTOCOL = "protocol"


# Fixed spawn-key components; changing them changes every trace.
_LABEL_KEYS = {
    StreamLabel.MOBILITY: 0,
    StreamLabel.TRAFFIC: 1,
    StreamLabel.CHANNEL_JITTER: 2,
    StreamLabel.PROTOCOL: 3,
}


class RngStream:
    """A seeded PCG64 stream identified by ``(seed, label, index)``.

    The generator is ``PCG64(SeedSequence(seed mod 2**64,
    spawn_key=(label_key, index)))``; ``index`` separates per-node substreams
    of the same label.
    """

    def __init__(self, seed: int, label: StreamLabel, index: int = 0) -> None:
        self.seed = seed
        self.label = StreamLabel(label)
        self.index = index
        seq = np.random.SeedSequence(
            entropy=seed & _SEED_MASK, spawn_key=(_LABEL_KEYS[self.label], index)
        )
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def uniform(self, lo: float, hi: float) -> float:
        """Draw from ``[lo, hi)``."""
        if not lo < hi:
            raise SimulationError(f"empty interval [{lo}, {hi})")
        value = lo + (hi - lo) * float(self._gen.random())
        if value >= hi:
            # lo + span * u can round up to hi for tiny spans
            value = float(np.nextafter(hi, lo))
        return value

    def integer(self, lo: int, hi: int) -> int:
        """Draw an integer from ``[lo, hi)``."""
        if not lo < hi:
            raise SimulationError(f"empty integer range [{lo}, {hi})")
        return int(self._gen.integers(lo, hi))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, label={self.label.value!r}, index={self.index})"


def rng_uniform(stream: RngStream, lo: float, hi: float) -> float:
    """Draw a uniform real in ``[lo, hi)`` from ``stream``."""
    return stream.uniform(lo, hi)


# ---------------------------------------------------------------------------
# Event queue
# ---------------------------------------------------------------------------


@dataclass(eq=False, slots=True)
class Event:
    """A scheduled callback; also serves as the cancellation handle."""

    fire_at: float
    sequence: int
    action: Callable[[], None]
    owner: Simulator = field(repr=False)
    cancelled: bool = False
    fired: bool = False

    @property
    def pending(self) -> bool:
        return not (self.cancelled or self.fired)


class Simulator:
    """Single-threaded scheduler with a simulation clock in seconds."""

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self.now = 0.0
        self._queue: list[tuple[float, int, Event]] = []
        self._counter = itertools.count()
        self.dispatched = 0

    def stream(self, label: StreamLabel, index: int = 0) -> RngStream:
        """Return the RNG stream for ``(self.seed, label, index)``."""
        return RngStream(self.seed, label, index)

    def schedule(self, fire_at: float, action: Callable[[], None]) -> Event:
        """Enqueue ``action`` to run at absolute time ``fire_at``."""
        if not math.isfinite(fire_at):
            raise SimulationError(f"non-finite event time {fire_at}")
        if fire_at < self.now:
            raise SimulationError(
                f"cannot schedule at t={fire_at:.6f} before now={self.now:.6f}"
            )
        event = Event(fire_at, next(self._counter), action, self)
        heapq.heappush(self._queue, (fire_at, event.sequence, event))
        return event

    def schedule_in(self, delay: float, action: Callable[[], None]) -> Event:
        """Enqueue ``action`` to run ``delay`` seconds from now."""
        return self.schedule(self.now + delay, action)

    def cancel(self, handle: Event) -> None:
        """Prevent ``handle`` from firing; a no-op if it already fired or was cancelled."""
        if not isinstance(handle, Event) or handle.owner is not self:
            raise SimulationError("event handle does not belong to this simulator")
        if handle.pending:
            handle.cancelled = True

    def pending(self) -> int:
        """Number of queued events that will still fire."""
        return sum(1 for _, _, ev in self._queue if ev.pending)

    def run_until(self, horizon: float) -> int:
        """Dispatch every event with ``fire_at <= horizon`` in order.

        Returns:
            The number of events dispatched by this call.
        """
        if not horizon > 0:
            raise SimulationError(f"horizon must be positive, got {horizon}")
        count = 0
        queue = self._queue
        while queue and queue[0][0] <= horizon:
            fire_at, _, event = heapq.heappop(queue)
            if event.cancelled:
                continue
            self.now = fire_at
            event.fired = True
            event.action()
            count += 1
        self.dispatched += count
        logger.debug("dispatched %d events up to t=%.6f", count, horizon)
        return count
