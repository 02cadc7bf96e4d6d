import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from aeronav.geometry import Pose, Rect, WorldPoint
from aeronav.reasoner import (
    EndpointConfig,
    ExternalReasoner,
    ReasonerRequest,
    ReasonerResponse,
    ScriptedReasoner,
)
from aeronav.scm import CoverageGrid


def _request(stage="Navigate", anchor=WorldPoint(100, 0), coverage=None):
    return ReasonerRequest(
        episode_id="ep-test", stage=stage, subgoal_text="go", rationale_text="",
        pose=Pose(0, 0, 50, 0), anchor_centroid=anchor, coverage=coverage,
    )


def test_scripted_navigate_points_at_anchor():
    resp = ScriptedReasoner()(_request())
    assert resp.advice_type == "direction"
    assert resp.value == "East"


def test_scripted_navigate_diagonal_sector():
    resp = ScriptedReasoner()(_request(anchor=WorldPoint(100, 100)))
    assert resp.value == "Northeast"


def test_scripted_search_sweeps_then_stops():
    grid = CoverageGrid(Rect(0, 0, 40, 40), cell=10)
    resp = ScriptedReasoner()(_request(stage="Search", coverage=grid))
    assert resp.advice_type == "waypoint"
    assert resp.value == grid.nearest_uncovered(WorldPoint(0, 0))
    grid.update(Rect(-5, -5, 45, 45))
    done = ScriptedReasoner()(_request(stage="Search", coverage=grid))
    assert done.advice_type == "stop_search"


def test_response_validation():
    with pytest.raises(ValueError):
        ReasonerResponse("", "teleport")


class _Handler(BaseHTTPRequestHandler):
    behavior = "echo_east"
    requests_seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).requests_seen.append(body)
        if type(self).behavior == "malformed":
            payload = b'{"not": "advice"}'
        elif type(self).behavior == "slow":
            time.sleep(1.0)
            payload = b'{"reasoning": "", "advice": {"type": "direction", "value": "East"}}'
        elif type(self).behavior == "waypoint":
            payload = json.dumps({
                "reasoning": "head there",
                "advice": {"type": "waypoint", "value": [12.0, 34.0]},
            }).encode()
        else:
            payload = json.dumps({
                "reasoning": "go east",
                "advice": {"type": "direction", "value": "East"},
            }).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    httpd = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    _Handler.requests_seen = []
    _Handler.behavior = "echo_east"
    yield f"http://127.0.0.1:{httpd.server_port}/"
    httpd.shutdown()


def test_external_loopback(server):
    reasoner = ExternalReasoner(EndpointConfig(server))
    resp = reasoner(_request())
    assert resp.advice_type == "direction" and resp.value == "East"
    assert not resp.fallback
    wire = _Handler.requests_seen[0]
    assert set(wire) == {"episode_id", "stage", "subgoal_text", "rationale_text",
                         "pose", "map_png_base64", "action_budget"}
    assert wire["pose"] == {"x": 0.0, "y": 0.0, "z": 50.0, "theta": 0.0}


def test_external_waypoint_parsed(server):
    _Handler.behavior = "waypoint"
    resp = ExternalReasoner(EndpointConfig(server))(_request())
    assert resp.advice_type == "waypoint"
    assert resp.value == WorldPoint(12.0, 34.0)


def test_external_malformed_falls_back_with_flag(server):
    _Handler.behavior = "malformed"
    resp = ExternalReasoner(EndpointConfig(server, retries=1))(_request())
    assert resp.fallback
    assert resp.advice_type == "direction" and resp.value == "East"  # scripted


def test_external_timeout_falls_back(server):
    _Handler.behavior = "slow"
    started = time.monotonic()
    resp = ExternalReasoner(EndpointConfig(server, timeout=0.2, retries=0))(_request())
    assert resp.fallback
    assert time.monotonic() - started < 1.5


def test_unreachable_endpoint_falls_back():
    reasoner = ExternalReasoner(EndpointConfig("http://127.0.0.1:9/", timeout=0.2, retries=0))
    resp = reasoner(_request())
    assert resp.fallback


def test_endpoint_config_validation():
    with pytest.raises(ValueError):
        EndpointConfig("")
    with pytest.raises(ValueError):
        EndpointConfig("http://x/", timeout=0)
