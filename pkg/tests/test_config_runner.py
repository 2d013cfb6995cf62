"""Configuration schema, scripted events, headless runs, CLI exit codes."""

import json
import os

import pytest

from urbanflow.cli import main as cli_main
from urbanflow.config import EventCfg, load_config, dump_config
from urbanflow.errors import ConfigError, UnknownEdge
from urbanflow.runner import apply_event, make_world, run_headless, run_world
from urbanflow.sim.vehicle import Mode


def base_config(**overrides):
    cfg = {
        "network": {"synthetic": {"kind": "grid", "rows": 4, "cols": 4, "edge_length": 150.0}},
        "sim": {"duration_s": 120.0, "seed": 3, "debug_checks": True},
        "spawn": {"rate": 0.5},
    }
    cfg.update(overrides)
    return load_config(json.dumps(cfg))


class TestConfig:
    def test_round_trip_is_identity(self):
        cfg = base_config(events=[{"at_tick": 10, "kind": "bar_edge", "edge": 1}])
        assert load_config(dump_config(cfg)) == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            load_config(json.dumps({
                "network": {"synthetic": {"kind": "grid", "rows": 3, "cols": 3}},
                "typo_section": {},
            }))
        with pytest.raises(ConfigError):
            load_config(json.dumps({
                "network": {"synthetic": {"kind": "grid", "rows": 3, "cols": 3}},
                "sim": {"dtt": 1.0},
            }))

    def test_every_constant_has_a_default(self):
        cfg = load_config(json.dumps(
            {"network": {"synthetic": {"kind": "grid", "rows": 3, "cols": 3}}}))
        assert cfg.sim.dt == 0.5
        assert cfg.routing.slot_length == 7.5
        assert cfg.transporters.base_threshold == 0.7
        assert cfg.behavior.jam_resume_distance == 500.0
        assert cfg.metrics.window_s == 300.0

    def test_network_needs_exactly_one_source(self):
        with pytest.raises(ConfigError):
            load_config(json.dumps({"network": {}}))

    def test_event_outside_duration_rejected(self):
        with pytest.raises(ConfigError):
            base_config(events=[{"at_tick": 100000, "kind": "bar_edge", "edge": 1}])

    def test_malformed_event_kind_fields(self):
        with pytest.raises(ConfigError):
            base_config(events=[{"at_tick": 1, "kind": "explosion", "x": 1.0}])
        with pytest.raises(ConfigError):
            base_config(events=[{"at_tick": 1, "kind": "bar_edge"}])


class TestApplyEvent:
    def test_bar_unknown_edge_leaves_world_untouched(self):
        world = make_world(base_config())
        before = world.world_hash()
        with pytest.raises(UnknownEdge):
            apply_event(world, EventCfg(at_tick=0, kind="bar_edge", edge=10_000))
        assert world.world_hash() == before
        assert not world.field.barred

    def test_spawn_rate_zero_stops_spawning(self):
        cfg = base_config()
        world = make_world(cfg)
        for _ in range(60):
            world.tick()
        apply_event(world, EventCfg(at_tick=60, kind="spawn_rate", rate=0.0))
        generated_at_cut = world.generated
        for _ in range(120):
            world.tick()
        assert world.generated == generated_at_cut

    def test_explosion_covering_map_flips_everyone(self):
        cfg = base_config()
        world = make_world(cfg)
        for _ in range(120):
            world.tick()
        assert any(v.mode == Mode.NORMAL for v in world.vehicles.values())
        apply_event(world, EventCfg(at_tick=0, kind="explosion", x=225.0, y=225.0,
                                    radius=10_000.0, intensity=1.0,
                                    inside={"chicken": 1.0}, outside={"normal": 1.0}))
        assert all(v.mode == Mode.CHICKEN for v in world.vehicles.values())


class TestRunHeadless:
    def test_zero_duration_exports_empty_metrics(self, tmp_path):
        cfg = base_config(sim={"duration_s": 0.0, "seed": 1})
        world, summary = run_headless(cfg, str(tmp_path))
        assert world.tick_index == 0
        fd = (tmp_path / "fd_samples.csv").read_text()
        assert fd.count("\n") == 1  # header only

    def test_same_seed_same_hash(self, tmp_path):
        cfg = base_config()
        _, s1 = run_headless(cfg, str(tmp_path / "a"))
        _, s2 = run_headless(cfg, str(tmp_path / "b"))
        assert s1["world_hash"] == s2["world_hash"]

    def test_smoke_run_with_arrivals(self, tmp_path):
        cfg = base_config(sim={"duration_s": 600.0, "seed": 4, "debug_checks": True})
        world, summary = run_headless(cfg, str(tmp_path))
        assert summary["arrived"] > 0
        assert (tmp_path / "summary.csv").exists()


class TestCli:
    def write_config(self, tmp_path, **overrides):
        cfg = {
            "network": {"synthetic": {"kind": "grid", "rows": 3, "cols": 3, "edge_length": 120.0}},
            "sim": {"duration_s": 60.0, "seed": 2},
            "spawn": {"rate": 0.3},
        }
        cfg.update(overrides)
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(cfg))
        return str(path)

    def test_run_ok(self, tmp_path, capsys):
        path = self.write_config(tmp_path)
        code = cli_main(["run", "--config", path, "--out", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "world_hash=" in out
        assert (tmp_path / "out" / "fd_samples.csv").exists()

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert cli_main(["run", "--config", str(path)]) == 2

    def test_build_error_exit_code(self, tmp_path):
        path = self.write_config(tmp_path, network={"files": {
            "shp": str(tmp_path / "missing.shp"), "dbf": str(tmp_path / "missing.dbf")}})
        assert cli_main(["run", "--config", path]) == 3

    def test_seed_override_changes_hash(self, tmp_path, capsys):
        path = self.write_config(tmp_path)
        cli_main(["run", "--config", path, "--out", str(tmp_path / "o1")])
        first = capsys.readouterr().out
        cli_main(["run", "--config", path, "--seed", "99", "--out", str(tmp_path / "o2")])
        second = capsys.readouterr().out
        assert first != second

    def test_build_network_cache_round_trip(self, tmp_path, capsys):
        path = self.write_config(tmp_path)
        cache = str(tmp_path / "tables.bin")
        assert cli_main(["build-network", "--config", path, "--out", cache]) == 0
        capsys.readouterr()
        assert os.path.exists(cache)
        code = cli_main(["run", "--config", path, "--tables", cache,
                         "--out", str(tmp_path / "o3")])
        assert code == 0
        with_cache = capsys.readouterr().out
        cli_main(["run", "--config", path, "--out", str(tmp_path / "o4")])
        without_cache = capsys.readouterr().out
        assert with_cache == without_cache
