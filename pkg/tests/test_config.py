"""Tests for configuration parsing."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from manet_sim.config import ConfigError, ScenarioConfig, load_config_file, parse_config


class TestDefaults:
    def test_evaluation_setup(self) -> None:
        cfg = parse_config()
        assert cfg.protocol == "aodv"
        assert cfg.nodes == 50
        assert (cfg.area_width, cfg.area_height) == (500.0, 500.0)
        assert cfg.tx_range == 250.0
        assert cfg.bandwidth == 2_000_000.0
        assert cfg.horizon == 200.0
        assert cfg.speed == 25.0
        assert cfg.flows == 10
        assert cfg.rate == 4.0
        assert cfg.packet_size == 512

    def test_radio(self) -> None:
        radio = parse_config(overrides={"collisions": "true"}).radio()
        assert radio.range == 250.0
        assert radio.collisions_enabled is True
        assert radio.queue_capacity == 50


class TestOverrides:
    def test_overrides_applied(self) -> None:
        cfg = parse_config(overrides={"pause_time": "40", "protocol": "dsdv"})
        assert cfg.pause_time == 40.0
        assert cfg.protocol == "dsdv"
        assert cfg.nodes == 50

    def test_range_alias(self) -> None:
        assert parse_config(overrides={"range": "100"}).tx_range == 100.0

    def test_dashes_map_to_underscores(self) -> None:
        assert parse_config(overrides={"pause-time": "20"}).pause_time == 20.0

    def test_file_then_overrides(self, tmp_path: Path) -> None:
        path = tmp_path / "scenario.conf"
        path.write_text(
            "# evaluation scenario\n"
            "protocol = dsdv\n"
            "\n"
            "nodes = 30   # smaller network\n"
            "pause_time = 20\n"
        )
        assert load_config_file(path) == {"protocol": "dsdv", "nodes": "30", "pause_time": "20"}
        cfg = parse_config(path, {"pause_time": "60"})
        assert (cfg.protocol, cfg.nodes, cfg.pause_time) == ("dsdv", 30, 60.0)

    def test_replace_validates(self) -> None:
        cfg = parse_config()
        assert cfg.replace(seed=7, pause_time=20.0).seed == 7
        with pytest.raises(ConfigError):
            cfg.replace(nodes=0)


class TestErrors:
    def test_zero_nodes_names_key(self) -> None:
        with pytest.raises(ConfigError) as err:
            parse_config(overrides={"nodes": "0"})
        assert err.value.key == "nodes"

    def test_unknown_key(self) -> None:
        with pytest.raises(ConfigError) as err:
            parse_config(overrides={"antenna_gain": "3"})
        assert err.value.key == "antenna_gain"

    def test_unparsable_value(self) -> None:
        with pytest.raises(ConfigError) as err:
            parse_config(overrides={"horizon": "soon"})
        assert err.value.key == "horizon"

    def test_unknown_protocol(self) -> None:
        with pytest.raises(ConfigError) as err:
            parse_config(overrides={"protocol": "olsr"})
        assert err.value.key == "protocol"

    def test_too_many_flows(self) -> None:
        with pytest.raises(ConfigError) as err:
            parse_config(overrides={"nodes": "2", "flows": "3"})
        assert err.value.key == "flows"

    def test_traffic_after_horizon(self) -> None:
        with pytest.raises(ConfigError) as err:
            parse_config(overrides={"horizon": "10", "traffic_start": "10"})
        assert err.value.key == "traffic_start"

    def test_bad_file_line(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.conf"
        path.write_text("nodes 30\n")
        with pytest.raises(ConfigError):
            load_config_file(path)

    def test_config_is_frozen(self) -> None:
        cfg = ScenarioConfig()
        with pytest.raises(ValidationError):
            cfg.nodes = 3
