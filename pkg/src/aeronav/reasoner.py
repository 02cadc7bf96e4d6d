"""Pluggable reasoner: deterministic scripted oracle and an external HTTP client."""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

from .geometry import Pose, WorldPoint, bearing_and_distance, compass_sector
from .scm import CoverageGrid


@dataclass(frozen=True)
class ReasonerRequest:
    episode_id: str
    stage: str  # Navigate | Search | Localize
    subgoal_text: str
    rationale_text: str
    pose: Pose
    action_budget: int = 10
    map_render: bytes | None = None
    # structured context for deterministic reasoners; not part of the wire format
    anchor_centroid: WorldPoint | None = field(default=None, compare=False)
    coverage: CoverageGrid | None = field(default=None, compare=False)

    def to_wire(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "stage": self.stage,
            "subgoal_text": self.subgoal_text,
            "rationale_text": self.rationale_text,
            "pose": {"x": self.pose.x, "y": self.pose.y,
                     "z": self.pose.z, "theta": self.pose.theta},
            "map_png_base64": base64.b64encode(self.map_render or b"").decode(),
            "action_budget": self.action_budget,
        }

    def digest(self) -> str:
        import hashlib

        doc = self.to_wire()
        doc.pop("map_png_base64", None)
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ReasonerResponse:
    reasoning: str
    advice_type: str  # direction | waypoint | stop_search
    value: object = None
    fallback: bool = False

    def __post_init__(self):
        if self.advice_type not in ("direction", "waypoint", "stop_search"):
            raise ValueError(f"bad advice type {self.advice_type!r}")

    def to_dict(self) -> dict:
        value = self.value
        if isinstance(value, WorldPoint):
            value = [value.x, value.y]
        return {
            "reasoning": self.reasoning,
            "advice": {"type": self.advice_type, "value": value},
            "fallback": self.fallback,
        }


class ScriptedReasoner:
    """Deterministic oracle: head for the anchor, then sweep uncovered cells."""

    def __call__(self, req: ReasonerRequest) -> ReasonerResponse:
        if req.stage == "Navigate":
            if req.anchor_centroid is None:
                return ReasonerResponse("no anchor known; holding north", "direction", "North")
            dist, bearing = bearing_and_distance(req.pose.position, req.anchor_centroid)
            sector = compass_sector(bearing)
            return ReasonerResponse(
                f"anchor {dist:.1f} m away to the {sector}", "direction", sector,
            )
        if req.stage == "Search":
            if req.coverage is None:
                return ReasonerResponse("no coverage grid; stopping search",
                                        "stop_search")
            target = req.coverage.nearest_uncovered(req.pose.position)
            if target is None:
                return ReasonerResponse("region fully covered", "stop_search")
            return ReasonerResponse(
                f"sweeping toward uncovered cell at ({target.x:.1f}, {target.y:.1f})",
                "waypoint", target,
            )
        return ReasonerResponse("localize stage is handled by the controller",
                                "stop_search")


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    timeout: float = 5.0
    retries: int = 2

    def __post_init__(self):
        if not self.url:
            raise ValueError("endpoint url must be set")
        if self.timeout <= 0 or self.retries < 0:
            raise ValueError("invalid endpoint timeout/retries")


class ExternalReasoner:
    """HTTP client for a real reasoning model; falls back to the scripted oracle."""

    def __init__(self, config: EndpointConfig):
        self.config = config
        self._fallback = ScriptedReasoner()

    def __call__(self, req: ReasonerRequest) -> ReasonerResponse:
        import requests

        payload = req.to_wire()
        for _ in range(self.config.retries + 1):
            try:
                resp = requests.post(self.config.url, json=payload,
                                     timeout=self.config.timeout)
                resp.raise_for_status()
                return self._parse(resp.json())
            except (requests.RequestException, ValueError, KeyError, TypeError):
                continue
        scripted = self._fallback(req)
        return ReasonerResponse(scripted.reasoning, scripted.advice_type,
                                scripted.value, fallback=True)

    @staticmethod
    def _parse(doc: dict) -> ReasonerResponse:
        advice = doc["advice"]
        advice_type = advice["type"]
        value = advice.get("value")
        if advice_type == "waypoint":
            value = WorldPoint(float(value[0]), float(value[1]))
        elif advice_type == "direction":
            if value not in ("North", "Northeast", "East", "Southeast",
                             "South", "Southwest", "West", "Northwest"):
                raise ValueError(f"bad direction {value!r}")
        return ReasonerResponse(str(doc.get("reasoning", "")), advice_type, value)
