"""
Random Waypoint mobility.

Each node pauses at its current point for ``pause`` seconds, then travels in a
straight line to a fresh uniformly drawn waypoint at a fixed speed.  Nodes
start paused at their initial position, so the first departure happens at
``t = pause``; a pause at least as long as the horizon gives a static network.

Positions are evaluated lazily in closed form; no tick events are scheduled.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from manet_sim.engine import RngStream, StreamLabel

logger = logging.getLogger("manet_sim.mobility")

Point = tuple[float, float]


@dataclass(frozen=True, slots=True)
class Arena:
    """Rectangular simulation area in meters."""

    width: float = 500.0
    height: float = 500.0

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"arena must be positive, got {self.width}x{self.height}")

    def contains(self, point: Point) -> bool:
        x, y = point
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    def random_point(self, rng: RngStream) -> Point:
        return (rng.uniform(0.0, self.width), rng.uniform(0.0, self.height))


class MotionState(str, Enum):
    PAUSED = "paused"
    MOVING = "moving"


@dataclass(frozen=True, slots=True)
class NodeMotion:
    """One leg: wait at ``origin`` until ``depart_at``, then move to ``waypoint``."""

    node: int
    origin: Point
    waypoint: Point
    depart_at: float
    speed: float

    @property
    def length(self) -> float:
        return math.dist(self.origin, self.waypoint)

    @property
    def arrive_at(self) -> float:
        return self.depart_at + self.length / self.speed

    def state_at(self, t: float) -> MotionState:
        if self.depart_at <= t < self.arrive_at:
            return MotionState.MOVING
        return MotionState.PAUSED


def initial_placement(n: int, arena: Arena, rng: RngStream) -> list[Point]:
    """Draw ``n`` independent uniform positions inside ``arena``."""
    if n < 1:
        raise ValueError(f"node count must be at least 1, got {n}")
    return [arena.random_point(rng) for _ in range(n)]


def first_leg(
    node: int, position: Point, pause: float, speed: float, arena: Arena, rng: RngStream
) -> NodeMotion:
    """The leg a node starts the run with: paused at ``position`` until ``t = pause``."""
    return NodeMotion(node, position, arena.random_point(rng), pause, speed)


def next_leg(m: NodeMotion, pause: float, rng: RngStream, arena: Arena) -> NodeMotion:
    """Leg following arrival at ``m.waypoint``: pause, then head to a fresh waypoint."""
    return NodeMotion(
        node=m.node,
        origin=m.waypoint,
        waypoint=arena.random_point(rng),
        depart_at=m.arrive_at + pause,
        speed=m.speed,
    )


def position_at(m: NodeMotion, t: float) -> Point:
    """Closed-form position on leg ``m`` at time ``t``, clamped at the waypoint."""
    if t <= m.depart_at:
        return m.origin
    length = m.length
    travelled = (t - m.depart_at) * m.speed
    if length == 0.0 or travelled >= length:
        return m.waypoint
    frac = travelled / length
    (x0, y0), (x1, y1) = m.origin, m.waypoint
    return (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)


class MobilityModel:
    """Tracks the current leg of every node and answers position queries.

    Each node draws its waypoints from its own mobility substream, so a node's
    trajectory does not depend on when (or how often) it is queried, and two
    protocols run with the same seed see identical motion.
    """

    def __init__(
        self,
        n: int,
        arena: Arena,
        speed: float,
        pause: float,
        seed: int,
        placement: Sequence[Point] | None = None,
    ) -> None:
        if speed <= 0:
            raise ValueError(f"speed must be positive, got {speed}")
        self.arena = arena
        self.speed = speed
        self.pause = pause
        if placement is None:
            placement = initial_placement(n, arena, RngStream(seed, StreamLabel.MOBILITY))
        elif len(placement) != n:
            raise ValueError(f"expected {n} positions, got {len(placement)}")
        for point in placement:
            if not arena.contains(point):
                raise ValueError(f"position {point} outside the arena")
        self._rngs = [RngStream(seed, StreamLabel.MOBILITY, node + 1) for node in range(n)]
        self._legs = [
            first_leg(node, tuple(point), pause, speed, arena, self._rngs[node])
            for node, point in enumerate(placement)
        ]
        self._cache_t: float | None = None
        self._cache: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._legs)

    def leg(self, node: int, t: float) -> NodeMotion:
        """Advance ``node`` to the leg covering time ``t`` and return it."""
        leg = self._legs[node]
        while leg.arrive_at < t:
            leg = next_leg(leg, self.pause, self._rngs[node], self.arena)
        self._legs[node] = leg
        return leg

    def position(self, node: int, t: float) -> Point:
        return position_at(self.leg(node, t), t)

    def positions(self, t: float) -> np.ndarray:
        """All node positions at ``t`` as an ``(n, 2)`` array."""
        if t != self._cache_t:
            self._cache = np.array([self.position(node, t) for node in range(len(self))])
            self._cache_t = t
        return self._cache
