"""WebSocket sandbox: snapshot stream, command handling, error replies."""

import json
import math
import time

import pytest
from fastapi.testclient import TestClient

from voxarm.robot import shipped_robot_path
from voxarm.scenario import GridSpec, Scenario
from voxarm.server import create_app, parse_command, CommandError, SimSession

GUARD_Q = [0, 0, 0.2, 0, 0.5, 0, 0.3, 0]
SMALL_GRID = GridSpec(dims=(48, 48, 48), voxel_size=0.04,
                      origin=(-0.96, -0.96, -0.24))


def sandbox_scenario():
    return Scenario(
        name="ws-test", robot_path=shipped_robot_path(), grid=SMALL_GRID,
        duration=1.0, q0=GUARD_Q,
        obstacles=[{"id": 0, "type": "static", "position": [0.7, 0.35, 0.5]},
                   {"id": 1, "type": "oscillating", "center": [0.9, -0.3, 0.5],
                    "axis": [0, 1, 0], "amplitude": 0.15, "period": 2.0}])


@pytest.fixture()
def client():
    app = create_app(sandbox_scenario(), pace="fast", broadcast_hz=120.0)
    with TestClient(app) as c:
        c.app = app
        yield c


def validate_snapshot(snap, n_joints=8, n_spheres=21):
    assert snap["type"] == "snapshot"
    assert set(snap) == {"type", "t", "q", "spheres", "obstacles", "ee",
                         "timings"}
    assert isinstance(snap["t"], float) and snap["t"] >= 0.0
    assert len(snap["q"]) == n_joints
    assert all(math.isfinite(v) for v in snap["q"])
    assert len(snap["spheres"]) == n_spheres
    for s in snap["spheres"]:
        assert set(s) == {"c", "r", "xc", "xs", "a"}
        assert len(s["c"]) == 3 and all(math.isfinite(v) for v in s["c"])
        assert s["r"] > 0.0
        for key in ("xc", "xs"):
            assert s[key] == -1.0 or s[key] >= 0.0
        assert 0.0 <= s["a"] <= 1.0
    for ob in snap["obstacles"]:
        assert set(ob) == {"id", "position"}
        assert isinstance(ob["id"], int) and len(ob["position"]) == 3
    assert set(snap["ee"]) == {"pose", "target"}
    assert len(snap["ee"]["pose"]) == 7 and len(snap["ee"]["target"]) == 7
    assert set(snap["timings"]) == {"clear", "insert", "edt", "solve"}
    for v in snap["timings"].values():
        assert v >= 0.0


def recv_until(ws, pred, tries=400):
    """Read messages until pred(msg) is truthy; fail after `tries` reads."""
    for _ in range(tries):
        msg = json.loads(ws.receive_text())
        if pred(msg):
            return msg
    pytest.fail("condition not met within message budget")


def recv_snapshot(ws, tries=400):
    return recv_until(ws, lambda m: m["type"] == "snapshot", tries)


def test_snapshot_stream_is_valid_and_time_moves(client):
    with client.websocket_connect("/ws") as ws:
        ts = []
        for _ in range(20):
            snap = recv_snapshot(ws)
            validate_snapshot(snap)
            ts.append(snap["t"])
        assert all(b >= a for a, b in zip(ts, ts[1:]))
        assert ts[-1] > ts[0]


def test_set_obstacle_round_trip(client):
    with client.websocket_connect("/ws") as ws:
        recv_snapshot(ws)
        ws.send_text(json.dumps({"type": "set_obstacle", "id": 0,
                                 "position": [0.55, 0.1, 0.45]}))
        snap = recv_until(ws, lambda m: m["type"] == "snapshot" and any(
            ob["id"] == 0 and ob["position"] == [0.55, 0.1, 0.45]
            for ob in m["obstacles"]))
        validate_snapshot(snap)


def test_unknown_obstacle_id_is_an_error_and_sim_survives(client):
    with client.websocket_connect("/ws") as ws:
        recv_snapshot(ws)
        ws.send_text(json.dumps({"type": "set_obstacle", "id": 99,
                                 "position": [0.5, 0.0, 0.5]}))
        err = recv_until(ws, lambda m: m["type"] == "error")
        assert "99" in err["detail"]
        snap = recv_snapshot(ws)
        validate_snapshot(snap)
        assert {ob["id"] for ob in snap["obstacles"]} == {0, 1}


def test_set_target_round_trip_with_renormalization(client):
    with client.websocket_connect("/ws") as ws:
        recv_snapshot(ws)
        # norm 1.0005: inside tolerance, must be accepted and renormalized
        ws.send_text(json.dumps({"type": "set_target",
                                 "position": [0.5, 0.1, 0.6],
                                 "quaternion": [0, 0, 0, 1.0005]}))
        snap = recv_until(ws, lambda m: m["type"] == "snapshot" and
                          abs(m["ee"]["target"][0] - 0.5) < 1e-9 and
                          abs(m["ee"]["target"][1] - 0.1) < 1e-9)
        quat = snap["ee"]["target"][3:]
        assert abs(math.sqrt(sum(c * c for c in quat)) - 1.0) < 1e-9


def test_far_from_unit_quaternion_is_rejected(client):
    with client.websocket_connect("/ws") as ws:
        recv_snapshot(ws)
        ws.send_text(json.dumps({"type": "set_target",
                                 "position": [0.5, 0.1, 0.6],
                                 "quaternion": [0, 0, 0, 1.1]}))
        err = recv_until(ws, lambda m: m["type"] == "error")
        assert "quaternion" in err["detail"]


def test_pause_freezes_time_resume_restarts_it(client):
    with client.websocket_connect("/ws") as ws:
        recv_snapshot(ws)
        ws.send_text(json.dumps({"type": "pause"}))
        seen = []

        def three_equal(m):
            if m["type"] != "snapshot":
                return False
            seen.append(m["t"])
            tail = seen[-3:]
            return len(tail) == 3 and tail[0] == tail[1] == tail[2]

        recv_until(ws, three_equal)
        frozen = seen[-1]
        ws.send_text(json.dumps({"type": "resume"}))
        snap = recv_until(ws, lambda m: m["type"] == "snapshot"
                          and m["t"] > frozen)
        assert snap["t"] > frozen


def test_malformed_messages_answer_errors_and_keep_connection(client):
    with client.websocket_connect("/ws") as ws:
        recv_snapshot(ws)
        for bad in ["{not json", json.dumps({"type": 7}),
                    json.dumps({"type": "set_obstacle"}),
                    json.dumps({"type": "warp_drive"}),
                    json.dumps({"type": "set_target", "position": [0, 0],
                                "quaternion": [0, 0, 0, 1]})]:
            ws.send_text(bad)
            recv_until(ws, lambda m: m["type"] == "error")
        validate_snapshot(recv_snapshot(ws))


def test_toggle_regularization_reaches_the_solver(client):
    session = client.app.state.session
    assert session.engine.reg_enabled
    with client.websocket_connect("/ws") as ws:
        recv_snapshot(ws)
        ws.send_text(json.dumps({"type": "toggle_regularization",
                                 "enabled": False}))
        deadline = time.time() + 5.0
        while session.engine.reg_enabled and time.time() < deadline:
            recv_snapshot(ws)
        assert not session.engine.reg_enabled


def test_parse_command_validation_is_strict():
    session = SimSession(sandbox_scenario(), pace="fast")
    for raw in ['null', '[1,2]', '{"type": "set_obstacle", "id": true, '
                '"position": [0, 0, 0]}',
                '{"type": "set_obstacle", "id": 0, "position": [0, 0, "x"]}',
                '{"type": "toggle_regularization", "enabled": "yes"}',
                '{"type": "set_target", "position": [0, 0, 0], '
                '"quaternion": [0, 0, 0, 0]}']:
        with pytest.raises(CommandError):
            parse_command(raw, session)
    fn = parse_command('{"type": "pause"}', session)
    fn(session)
    assert session.paused


def test_info_route_reports_scenario(client):
    r = client.get("/")
    assert r.status_code == 200
    body = r.json()
    assert body["scenario"] == "ws-test"
    assert body["obstacles"] == [0, 1]
    assert body["fault"] is None
