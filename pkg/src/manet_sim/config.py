"""
Scenario configuration.

Defaults reproduce the evaluation setup: 50 nodes in a 500 m x 500 m area,
250 m range, 2 Mb/s, 200 s, random waypoint at a fixed 25 m/s, ten 4 pkt/s
CBR flows of 512-byte datagrams.  Every protocol timer and radio constant is
an overridable key.

Config files are flat ``key = value`` text with ``#`` comments; command-line
``--key value`` pairs override file values.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator

from manet_sim.channel import RadioConfig
from manet_sim.mobility import Arena

logger = logging.getLogger("manet_sim.config")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending setting."""

    def __init__(self, message: str, key: str | None = None) -> None:
        super().__init__(message)
        self.key = key


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    protocol: Literal["aodv", "dsdv"] = "aodv"
    nodes: int = Field(50, ge=1)
    area_width: float = Field(500.0, gt=0)
    area_height: float = Field(500.0, gt=0)
    tx_range: float = Field(250.0, gt=0, alias="range")
    bandwidth: float = Field(2_000_000.0, gt=0)
    horizon: float = Field(200.0, gt=0)
    pause_time: float = Field(0.0, ge=0)
    speed: float = Field(25.0, gt=0)
    seed: int = 1

    # traffic
    flows: int = Field(10, ge=0)
    rate: float = Field(4.0, gt=0)
    packet_size: int = Field(512, ge=1)
    traffic_start: float = Field(10.0, ge=0)
    ttl: int = Field(32, ge=1)

    # radio
    queue_capacity: int = Field(50, ge=1)
    broadcast_jitter: float = Field(0.01, ge=0)
    propagation_delay: float = Field(1e-6, ge=0)
    collisions: bool = False

    # DSDV
    update_interval: float = Field(15.0, gt=0)
    dsdv_periodic_jitter: float = Field(1.0, ge=0)
    dsdv_triggered_interval: float = Field(1.0, ge=0)
    dsdv_triggered_jitter: float = Field(0.01, ge=0)
    dsdv_stale_periods: int = Field(3, ge=0)

    # AODV
    active_route_timeout: float = Field(3.0, gt=0)
    reverse_route_lifetime: float = Field(3.0, gt=0)
    rreq_retries: int = Field(2, ge=0)
    rreq_wait: float = Field(1.0, gt=0)
    pending_capacity: int = Field(64, ge=1)

    @field_validator("flows")
    @classmethod
    def _flows_fit(cls, v: int, info: ValidationInfo) -> int:
        nodes = info.data.get("nodes")
        if nodes is not None and v > nodes * (nodes - 1):
            raise ValueError(f"{v} distinct flows do not fit in {nodes} nodes")
        return v

    @field_validator("traffic_start")
    @classmethod
    def _start_before_horizon(cls, v: float, info: ValidationInfo) -> float:
        horizon = info.data.get("horizon")
        if horizon is not None and v >= horizon:
            raise ValueError(f"traffic must start before the horizon ({horizon})")
        return v

    def arena(self) -> Arena:
        return Arena(self.area_width, self.area_height)

    def radio(self) -> RadioConfig:
        return RadioConfig(
            range=self.tx_range,
            bandwidth=self.bandwidth,
            broadcast_jitter_max=self.broadcast_jitter,
            collisions_enabled=self.collisions,
            propagation_delay=self.propagation_delay,
            queue_capacity=self.queue_capacity,
        )

    def replace(self, **changes: Any) -> ScenarioConfig:
        """Validated copy with ``changes`` applied."""
        return validate_config({**self.model_dump(), **changes})


def config_keys() -> set[str]:
    """Every accepted key (field names and their aliases)."""
    keys = set(ScenarioConfig.model_fields)
    keys.update(f.alias for f in ScenarioConfig.model_fields.values() if f.alias)
    return keys


def validate_config(values: Mapping[str, Any]) -> ScenarioConfig:
    """Build a ``ScenarioConfig``, translating pydantic errors to ``ConfigError``."""
    try:
        return ScenarioConfig.model_validate(dict(values))
    except ValidationError as e:
        err = e.errors()[0]
        key = str(err["loc"][0]) if err["loc"] else None
        raise ConfigError(f"{key or 'config'}: {err['msg']}", key) from e


def load_config_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        values[key.strip()] = value.strip()
    return values


def parse_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> ScenarioConfig:
    """Merge file values and overrides (overrides win) into a validated config."""
    values: dict[str, Any] = {}
    if path is not None:
        values.update(load_config_file(path))
    values.update(overrides or {})
    values = {k.strip().replace("-", "_"): v for k, v in values.items()}
    known = config_keys()
    for key in values:
        if key not in known:
            raise ConfigError(f"unknown configuration key '{key}'", key)
    config = validate_config(values)
    logger.debug("configuration: %s", config.model_dump())
    return config
