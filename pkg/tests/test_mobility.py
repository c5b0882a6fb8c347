"""Tests for random waypoint mobility."""

import pytest

from manet_sim.engine import RngStream, StreamLabel
from manet_sim.mobility import (
    Arena,
    MobilityModel,
    MotionState,
    NodeMotion,
    initial_placement,
    next_leg,
    position_at,
)


class TestArena:
    def test_rejects_empty_area(self) -> None:
        with pytest.raises(ValueError):
            Arena(0.0, 100.0)

    def test_contains_boundary(self) -> None:
        arena = Arena(500.0, 500.0)
        assert arena.contains((0.0, 500.0))
        assert not arena.contains((500.1, 10.0))


class TestPlacement:
    def test_fifty_nodes_inside(self) -> None:
        arena = Arena()
        points = initial_placement(50, arena, RngStream(1, StreamLabel.MOBILITY))
        assert len(points) == 50
        assert all(0.0 <= x <= 500.0 and 0.0 <= y <= 500.0 for x, y in points)

    def test_zero_nodes(self) -> None:
        with pytest.raises(ValueError):
            initial_placement(0, Arena(), RngStream(1, StreamLabel.MOBILITY))


class TestLegs:
    def test_position_along_leg(self) -> None:
        leg = NodeMotion(0, (0.0, 0.0), (100.0, 0.0), depart_at=10.0, speed=25.0)
        assert leg.arrive_at == 14.0
        assert position_at(leg, 5.0) == (0.0, 0.0)
        assert position_at(leg, 12.0) == pytest.approx((50.0, 0.0))
        assert position_at(leg, 20.0) == (100.0, 0.0)

    def test_state(self) -> None:
        leg = NodeMotion(0, (0.0, 0.0), (100.0, 0.0), depart_at=10.0, speed=25.0)
        assert leg.state_at(9.0) is MotionState.PAUSED
        assert leg.state_at(11.0) is MotionState.MOVING
        assert leg.state_at(14.0) is MotionState.PAUSED

    def test_next_leg_pauses_at_waypoint(self) -> None:
        arena = Arena()
        leg = NodeMotion(3, (0.0, 0.0), (100.0, 0.0), depart_at=0.0, speed=25.0)
        nxt = next_leg(leg, 20.0, RngStream(1, StreamLabel.MOBILITY, 4), arena)
        assert nxt.node == 3
        assert nxt.origin == (100.0, 0.0)
        assert nxt.depart_at == 24.0
        assert arena.contains(nxt.waypoint)


class TestMobilityModel:
    def test_nodes_start_paused(self) -> None:
        model = MobilityModel(10, Arena(), speed=25.0, pause=30.0, seed=3)
        for node in range(10):
            assert model.position(node, 0.0) == model.position(node, 30.0)

    def test_pause_beyond_horizon_is_static(self) -> None:
        model = MobilityModel(20, Arena(), speed=25.0, pause=200.0, seed=1)
        start = model.positions(0.0).copy()
        assert (model.positions(199.9) == start).all()

    def test_positions_stay_inside(self) -> None:
        model = MobilityModel(20, Arena(), speed=25.0, pause=0.0, seed=5)
        for t in range(0, 200, 7):
            pos = model.positions(float(t))
            assert ((pos >= 0.0) & (pos <= 500.0)).all()

    def test_trajectory_is_query_independent(self) -> None:
        a = MobilityModel(5, Arena(), speed=25.0, pause=0.0, seed=11)
        b = MobilityModel(5, Arena(), speed=25.0, pause=0.0, seed=11)
        for t in range(0, 150):
            a.position(2, float(t))
        assert a.position(2, 150.0) == b.position(2, 150.0)

    def test_other_nodes_do_not_perturb(self) -> None:
        a = MobilityModel(5, Arena(), speed=25.0, pause=0.0, seed=11)
        b = MobilityModel(5, Arena(), speed=25.0, pause=0.0, seed=11)
        a.positions(100.0)
        assert a.position(4, 120.0) == b.position(4, 120.0)

    def test_speed_is_constant(self) -> None:
        model = MobilityModel(1, Arena(), speed=25.0, pause=0.0, seed=2)
        leg = model.leg(0, 0.0)
        assert leg.speed == 25.0
        mid = leg.depart_at + (leg.arrive_at - leg.depart_at) / 2
        x0, y0 = leg.origin
        x, y = model.position(0, mid)
        assert ((x - x0) ** 2 + (y - y0) ** 2) ** 0.5 == pytest.approx(leg.length / 2)

    def test_explicit_placement(self) -> None:
        placement = [(10.0, 10.0), (20.0, 30.0)]
        model = MobilityModel(2, Arena(), speed=25.0, pause=50.0, seed=1, placement=placement)
        assert model.position(1, 10.0) == (20.0, 30.0)

    def test_placement_outside_arena(self) -> None:
        with pytest.raises(ValueError):
            MobilityModel(1, Arena(), speed=25.0, pause=0.0, seed=1, placement=[(600.0, 1.0)])

    def test_placement_count_mismatch(self) -> None:
        with pytest.raises(ValueError):
            MobilityModel(3, Arena(), speed=25.0, pause=0.0, seed=1, placement=[(1.0, 1.0)])
