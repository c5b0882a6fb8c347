"""Discrete-event MANET simulator comparing AODV and DSDV routing."""

from manet_sim.config import ConfigError, ScenarioConfig, parse_config
from manet_sim.engine import SimulationError, Simulator
from manet_sim.metrics import MetricsReport, parse_trace
from manet_sim.runner import Network, SweepError, SweepResult, run_scenario, sweep, sweep_async

__all__ = [
    "ConfigError",
    "MetricsReport",
    "Network",
    "ScenarioConfig",
    "SimulationError",
    "Simulator",
    "SweepError",
    "SweepResult",
    "parse_config",
    "parse_trace",
    "run_scenario",
    "sweep",
    "sweep_async",
]
