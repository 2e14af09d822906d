"""Wire-protocol fixtures shared with the browser client.

The JSON files under tests/fixtures/ pin the message shapes on both sides:
this suite checks the server against them, the frontend test suite loads
the same files and checks its parsers. Change a fixture and both suites
must agree again.
"""

import json
import math
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from mclq.refine import SamplerConfig
from mclq.service import SessionConfig, create_app, make_session, tick

FIXTURES = Path(__file__).parent / "fixtures"


def load(name):
    return json.loads((FIXTURES / name).read_text())


def same_shape(template, actual, path="$"):
    """Structural equality: keys and JSON types, not values."""
    if isinstance(template, dict):
        assert isinstance(actual, dict), f"{path}: expected object"
        missing = set(template) - set(actual)
        assert not missing, f"{path}: missing keys {sorted(missing)}"
        for k, v in template.items():
            same_shape(v, actual[k], f"{path}.{k}")
    elif isinstance(template, list):
        assert isinstance(actual, list), f"{path}: expected array"
        if template and actual:
            same_shape(template[0], actual[0], f"{path}[0]")
    elif isinstance(template, bool):
        assert isinstance(actual, bool), f"{path}: expected bool"
    elif isinstance(template, (int, float)):
        assert isinstance(actual, (int, float)) and not isinstance(actual, bool), (
            f"{path}: expected number, got {type(actual).__name__}"
        )
    else:
        assert isinstance(actual, type(template)), f"{path}: type mismatch"


def test_state_broadcast_matches_fixture_shape():
    s = make_session(
        "fx", SessionConfig(
            env={"env": "point_mass", "T": 6},
            sampler=SamplerConfig(outer_iters=8, inner_iters=3, seed=0),
        )
    )
    msg = tick(s)
    same_shape(load("state_message.json"), msg)


def test_config_endpoint_matches_fixture():
    app = create_app(
        SessionConfig(
            env={"env": "point_mass", "T": 6},
            sampler=SamplerConfig(outer_iters=8, inner_iters=3, seed=0),
        )
    )
    with TestClient(app) as client:
        actual = client.get("/config").json()
    expected = load("config_response.json")
    same_shape(expected, actual)
    # defaults are part of the contract, not just the shape
    assert actual == expected


def test_server_accepts_all_fixture_client_messages():
    app = create_app(
        SessionConfig(
            env={"env": "point_mass", "T": 6},
            sampler=SamplerConfig(outer_iters=8, inner_iters=3, seed=0),
        )
    )
    msgs = load("client_messages.json")
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            json.loads(ws.receive_text())  # first state frame
            for name, msg in msgs.items():
                ws.send_text(json.dumps(msg))
                for _ in range(8):
                    reply = json.loads(ws.receive_text())
                    if reply.get("type") in ("ack", "error"):
                        break
                else:
                    pytest.fail(f"no reply to {name}")
                assert reply["type"] == "ack", f"{name} rejected: {reply}"


def test_lambda_inf_fixture_maps_to_unbounded():
    msgs = load("client_messages.json")
    assert msgs["set_lambda_inf"]["value"] == "inf"
    app = create_app(
        SessionConfig(
            env={"env": "point_mass", "T": 6},
            sampler=SamplerConfig(outer_iters=8, inner_iters=3, seed=0),
        )
    )
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            json.loads(ws.receive_text())
            ws.send_text(json.dumps(msgs["set_lambda_inf"]))
            for _ in range(8):
                reply = json.loads(ws.receive_text())
                if reply.get("type") == "ack" and "lambda" in reply:
                    # infinity must cross the wire as a string: browsers
                    # refuse the bare Infinity literal
                    assert reply["lambda"] == "inf"
                    return
            pytest.fail("no lambda ack")
