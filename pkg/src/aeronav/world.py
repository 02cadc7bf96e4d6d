"""Scenario model, discrete action kinematics, and scenario file IO."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import relations
from .geometry import MapBounds, Polygon, Pose, WorldPoint

STEP_LENGTH_M = 5.0
TURN_DEG = 30.0
ALTITUDE_FLOOR_M = 5.0
ALTITUDE_CEILING_M = 120.0
MAX_STEPS = 200

OBJECT_CLASSES = ("vehicle", "road", "building", "parking_lot", "green_space")
OBJECT_COLORS = ("white", "black", "red", "gray", "blue", "green", "brown", "silver")

_DIAG = STEP_LENGTH_M / math.sqrt(2)


class WorldError(ValueError):
    pass


class SchemaError(WorldError):
    """Scenario document violates the documented schema."""


class Action(Enum):
    NORTH = "N"
    NORTHEAST = "NE"
    EAST = "E"
    SOUTHEAST = "SE"
    SOUTH = "S"
    SOUTHWEST = "SW"
    WEST = "W"
    NORTHWEST = "NW"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"
    ASCEND = "ascend"
    DESCEND = "descend"
    STOP = "stop"


PLANAR_OFFSETS = {
    Action.NORTH: (0.0, STEP_LENGTH_M),
    Action.NORTHEAST: (_DIAG, _DIAG),
    Action.EAST: (STEP_LENGTH_M, 0.0),
    Action.SOUTHEAST: (_DIAG, -_DIAG),
    Action.SOUTH: (0.0, -STEP_LENGTH_M),
    Action.SOUTHWEST: (-_DIAG, -_DIAG),
    Action.WEST: (-STEP_LENGTH_M, 0.0),
    Action.NORTHWEST: (-_DIAG, _DIAG),
}

COMPASS_ACTIONS = {
    "North": Action.NORTH,
    "Northeast": Action.NORTHEAST,
    "East": Action.EAST,
    "Southeast": Action.SOUTHEAST,
    "South": Action.SOUTH,
    "Southwest": Action.SOUTHWEST,
    "West": Action.WEST,
    "Northwest": Action.NORTHWEST,
}


def apply_action(pose: Pose, a: Action) -> Pose:
    if a is Action.STOP:
        raise WorldError("stop is handled by the episode loop, not apply_action")
    if a in PLANAR_OFFSETS:
        dx, dy = PLANAR_OFFSETS[a]
        return Pose(pose.x + dx, pose.y + dy, pose.z, pose.theta)
    if a is Action.TURN_LEFT:
        return Pose(pose.x, pose.y, pose.z, pose.theta - TURN_DEG)
    if a is Action.TURN_RIGHT:
        return Pose(pose.x, pose.y, pose.z, pose.theta + TURN_DEG)
    if a is Action.ASCEND:
        return Pose(pose.x, pose.y, min(pose.z + STEP_LENGTH_M, ALTITUDE_CEILING_M), pose.theta)
    if a is Action.DESCEND:
        return Pose(pose.x, pose.y, max(pose.z - STEP_LENGTH_M, ALTITUDE_FLOOR_M), pose.theta)
    raise WorldError(f"unknown action {a!r}")


@dataclass
class EpisodeState:
    pose: Pose
    step_count: int = 0
    trajectory: list = field(default_factory=list)
    done: bool = False
    stop_issued: bool = False

    def __post_init__(self):
        if not self.trajectory:
            self.trajectory = [self.pose]


def step(state: EpisodeState, a: Action) -> EpisodeState:
    """Advance the episode by one action, mutating and returning the state."""
    if state.done:
        raise WorldError("cannot step a finished episode")
    if a is Action.STOP:
        state.done = True
        state.stop_issued = True
        return state
    state.pose = apply_action(state.pose, a)
    state.step_count += 1
    state.trajectory.append(state.pose)
    if state.step_count >= MAX_STEPS:
        state.done = True
    return state


@dataclass(frozen=True)
class LandmarkPrior:
    name: str
    contour: Polygon

    def centroid(self) -> WorldPoint:
        return self.contour.centroid()


@dataclass(frozen=True)
class SceneObject:
    id: str
    object_type: str
    position: WorldPoint
    extent: tuple = (2.0, 2.0)
    color: str | None = None

    def __post_init__(self):
        if self.object_type not in OBJECT_CLASSES:
            raise SchemaError(
                f"object_type {self.object_type!r} not in allowed set {OBJECT_CLASSES}"
            )
        if self.color is not None and self.color not in OBJECT_COLORS:
            raise SchemaError(
                f"color {self.color!r} not in allowed set {OBJECT_COLORS}"
            )


@dataclass(frozen=True)
class GoalSpec:
    target_class: str
    target_attributes: dict
    anchor_landmark: str | None
    relation_chain: tuple  # ((relation, qualifier-or-None), ...)
    target_object_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "relation_chain", tuple(
            (rel, qual) for rel, qual in self.relation_chain
        ))
        for rel, _ in self.relation_chain:
            if rel not in relations.RELATION_LABELS:
                raise SchemaError(f"relation {rel!r} not in allowed set")


@dataclass(frozen=True)
class Scenario:
    bounds: MapBounds
    landmarks: tuple
    objects: tuple
    goal: GoalSpec
    start: Pose
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "landmarks", tuple(self.landmarks))
        object.__setattr__(self, "objects", tuple(self.objects))
        names = [lm.name for lm in self.landmarks]
        if len(names) != len(set(names)):
            raise SchemaError("landmark names must be unique")
        if self.goal.anchor_landmark is not None and self.goal.anchor_landmark not in names:
            raise SchemaError(
                f"goal anchor_landmark {self.goal.anchor_landmark!r} names no landmark"
            )
        if not self.bounds.contains(self.start.position):
            raise SchemaError("start pose outside scenario bounds")

    def landmark(self, name: str) -> LandmarkPrior:
        for lm in self.landmarks:
            if lm.name == name:
                return lm
        raise WorldError(f"no landmark named {name!r}")

    def target_object(self) -> SceneObject:
        for obj in self.objects:
            if obj.id == self.goal.target_object_id:
                return obj
        raise WorldError("goal has no resolvable target_object_id")


def goal_matches(goal: GoalSpec, obj: SceneObject, scenario: Scenario) -> bool:
    """Exact geometric evaluation of a goal against one ground-truth object."""
    if obj.object_type != goal.target_class:
        return False
    for attr, value in goal.target_attributes.items():
        if getattr(obj, attr, None) != value:
            return False
    for rel, qualifier in goal.relation_chain:
        name = qualifier if qualifier is not None else goal.anchor_landmark
        if name is None:
            continue
        contour = scenario.landmark(name).contour
        if relations.landmark_relation(obj.position, contour) != rel:
            return False
    return True


def find_goal_matches(scenario: Scenario) -> list:
    return [o for o in scenario.objects if goal_matches(scenario.goal, o, scenario)]


# --- scenario file format ------------------------------------------------

def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise SchemaError(f"missing field {context}.{key}")
    return doc[key]


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "bounds": {
            "x_min": sc.bounds.x_min, "y_min": sc.bounds.y_min,
            "x_max": sc.bounds.x_max, "y_max": sc.bounds.y_max,
            "scale": sc.bounds.scale,
        },
        "landmarks": [
            {"name": lm.name, "contour": [[v.x, v.y] for v in lm.contour.vertices]}
            for lm in sc.landmarks
        ],
        "objects": [
            {
                "id": o.id,
                "object_type": o.object_type,
                **({"color": o.color} if o.color is not None else {}),
                "position": [o.position.x, o.position.y],
                "extent": [o.extent[0], o.extent[1]],
            }
            for o in sc.objects
        ],
        "goal": {
            "target_class": sc.goal.target_class,
            "attributes": dict(sc.goal.target_attributes),
            "anchor_landmark": sc.goal.anchor_landmark,
            "relation_chain": [
                {"relation": rel, **({"qualifier": q} if q is not None else {})}
                for rel, q in sc.goal.relation_chain
            ],
            "target_object_id": sc.goal.target_object_id,
        },
        "start": {"x": sc.start.x, "y": sc.start.y, "z": sc.start.z, "theta": sc.start.theta},
        "seed": sc.seed,
    }


def scenario_from_dict(doc: dict) -> Scenario:
    b = _require(doc, "bounds", "scenario")
    bounds = MapBounds(
        _require(b, "x_min", "bounds"), _require(b, "y_min", "bounds"),
        _require(b, "x_max", "bounds"), _require(b, "y_max", "bounds"),
        _require(b, "scale", "bounds"),
    )
    landmarks = []
    for i, lm in enumerate(_require(doc, "landmarks", "scenario")):
        contour = _require(lm, "contour", f"landmarks[{i}]")
        landmarks.append(LandmarkPrior(
            _require(lm, "name", f"landmarks[{i}]"),
            Polygon(tuple(WorldPoint(x, y) for x, y in contour)),
        ))
    objects = []
    for i, o in enumerate(_require(doc, "objects", "scenario")):
        pos = _require(o, "position", f"objects[{i}]")
        objects.append(SceneObject(
            id=_require(o, "id", f"objects[{i}]"),
            object_type=_require(o, "object_type", f"objects[{i}]"),
            position=WorldPoint(pos[0], pos[1]),
            extent=tuple(o.get("extent", (2.0, 2.0))),
            color=o.get("color"),
        ))
    g = _require(doc, "goal", "scenario")
    goal = GoalSpec(
        target_class=_require(g, "target_class", "goal"),
        target_attributes=dict(g.get("attributes", {})),
        anchor_landmark=g.get("anchor_landmark"),
        relation_chain=tuple(
            (_require(rc, "relation", "goal.relation_chain"), rc.get("qualifier"))
            for rc in g.get("relation_chain", [])
        ),
        target_object_id=g.get("target_object_id"),
    )
    s = _require(doc, "start", "scenario")
    start = Pose(
        _require(s, "x", "start"), _require(s, "y", "start"),
        _require(s, "z", "start"), _require(s, "theta", "start"),
    )
    return Scenario(bounds, tuple(landmarks), tuple(objects), goal, start,
                    _require(doc, "seed", "scenario"))


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True))


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
