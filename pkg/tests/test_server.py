"""Live service protocol: network handshake, snapshots, commands, pacing."""

import json
import tempfile

import pytest
from fastapi.testclient import TestClient

from urbanflow.config import load_config
from urbanflow.runner import run_headless
from urbanflow.server import create_app


def service_config(**overrides):
    cfg = {
        "network": {"synthetic": {"kind": "grid", "rows": 4, "cols": 4, "edge_length": 150.0}},
        "sim": {"duration_s": 60.0, "seed": 5},
        "spawn": {"rate": 0.5},
        "server": {"speed": 1e6, "start_paused": True, "snapshot_every": 8},
        "output": {"dir": tempfile.mkdtemp()},
    }
    cfg.update(overrides)
    return load_config(json.dumps(cfg))


def recv_type(ws, want, limit=50_000):
    for _ in range(limit):
        msg = ws.receive_json()
        if msg["type"] == want:
            return msg
    raise AssertionError(f"never received a {want!r} message")


class TestProtocol:
    def test_network_message_on_connect(self):
        app = create_app(service_config())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                msg = ws.receive_json()
                assert msg["type"] == "network"
                assert len(msg["vertices"]) == 16
                assert len(msg["edges"]) == 48
                assert all({"id", "from", "to", "points"} <= set(e) for e in msg["edges"])

    def test_snapshot_stream_and_done(self):
        app = create_app(service_config())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                recv_type(ws, "network")
                ws.send_json({"type": "resume"})
                snap = recv_type(ws, "snapshot")
                assert {"tick", "time_s", "vehicles", "edges", "counters"} <= set(snap)
                done = recv_type(ws, "done")
                assert len(done["world_hash"]) == 16

    def test_pause_freezes_tick_counter(self):
        app = create_app(service_config())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                recv_type(ws, "network")
                # paused from the start: snapshots keep coming with the same tick
                first = recv_type(ws, "snapshot")
                second = recv_type(ws, "snapshot")
                assert first["tick"] == second["tick"] == 0

    def test_malformed_commands_get_errors_not_crashes(self):
        app = create_app(service_config())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                recv_type(ws, "network")
                ws.send_json({"cmd_id": 1})
                assert recv_type(ws, "error")
                ws.send_json({"type": "warp", "cmd_id": 2})
                err = recv_type(ws, "error")
                assert err["cmd_id"] == 2
                ws.send_json({"type": "bar_edge", "edge": 9999, "cmd_id": 3})
                err = recv_type(ws, "error")
                assert "unknown edge" in err["msg"]
                ws.send_json({"type": "speed", "mult": -2, "cmd_id": 4})
                assert recv_type(ws, "error")["cmd_id"] == 4
                # still alive and acking
                ws.send_json({"type": "speed", "mult": 10.0, "cmd_id": 5})
                assert recv_type(ws, "ack")["cmd_id"] == 5

    def test_ack_carries_cmd_id(self):
        app = create_app(service_config())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                recv_type(ws, "network")
                ws.send_json({"type": "bar_edge", "edge": 1, "cmd_id": 41})
                assert recv_type(ws, "ack")["cmd_id"] == 41

    def test_two_clients_identical_streams(self):
        app = create_app(service_config())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as a, client.websocket_connect("/ws") as b:
                recv_type(a, "network")
                recv_type(b, "network")
                a.send_json({"type": "resume"})
                recv_type(a, "ack")
                snaps_a = [recv_type(a, "snapshot") for _ in range(3)]
                snaps_b = [recv_type(b, "snapshot") for _ in range(3)]
                assert snaps_a == snaps_b


class TestScriptedVsLive:
    def test_identical_world_hashes(self):
        events = [
            {"at_tick": 30, "kind": "bar_edge", "edge": 2},
            {"at_tick": 60, "kind": "explosion", "x": 225.0, "y": 225.0,
             "radius": 300.0, "intensity": 1.0,
             "inside": {"chicken": 1.0}, "outside": {"normal": 1.0}},
            {"at_tick": 90, "kind": "spawn_rate", "rate": 0.1},
        ]
        scripted_cfg = service_config(events=events,
                                      output={"dir": tempfile.mkdtemp()})
        _, summary = run_headless(scripted_cfg)
        scripted_hash = summary["world_hash"]

        app = create_app(service_config())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                recv_type(ws, "network")
                for i, ev in enumerate(events):
                    cmd = dict(ev)
                    cmd["type"] = cmd.pop("kind")
                    cmd["at_tick"] = ev["at_tick"]
                    cmd["cmd_id"] = i
                    ws.send_json(cmd)
                    assert recv_type(ws, "ack")["cmd_id"] == i
                ws.send_json({"type": "resume"})
                done = recv_type(ws, "done")
                assert done["world_hash"] == scripted_hash

    def test_live_snapshot_reflects_commands(self):
        app = create_app(service_config())
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                recv_type(ws, "network")
                ws.send_json({"type": "explosion", "x": 225.0, "y": 225.0,
                              "radius": 10000.0, "intensity": 1.0, "cmd_id": 7,
                              "at_tick": 40})
                recv_type(ws, "ack")
                ws.send_json({"type": "bar_edge", "edge": 3, "cmd_id": 8, "at_tick": 40})
                recv_type(ws, "ack")
                ws.send_json({"type": "resume"})
                saw_event = False
                saw_bar = False
                while True:
                    msg = ws.receive_json()
                    if msg["type"] == "snapshot" and msg["tick"] > 40:
                        saw_event = saw_event or bool(msg["events"])
                        saw_bar = saw_bar or any(
                            e["id"] == 3 and e["barred"] for e in msg["edges"])
                    if msg["type"] == "done":
                        break
                assert saw_event and saw_bar
