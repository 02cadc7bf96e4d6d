"""Seeded procedural scenario generation with a uniquely satisfiable goal."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .geometry import MapBounds, Polygon, Pose, WorldPoint
from .world import (
    OBJECT_COLORS,
    GoalSpec,
    LandmarkPrior,
    Scenario,
    SceneObject,
    WorldError,
    find_goal_matches,
)

DIFFICULTY_BANDS = {
    "easy": (60.0, 140.0),
    "medium": (160.0, 290.0),
    "hard": (310.0, 470.0),
}

_NAME_STEMS = (
    "Davey", "Bragg", "Celine", "Harlow", "Merton", "Quarry", "Aldous", "Birch",
    "Cromwell", "Delta", "Eastfield", "Foxglove", "Granite", "Hollis", "Iris",
    "Juniper", "Keswick", "Linden", "Maple", "Norfolk", "Orchard", "Pemberton",
    "Rowan", "Sycamore", "Thistle", "Walnut",
)
_NAME_SUFFIXES = ("Road", "Street", "Park", "Plaza", "Square", "Grove")


class GenerationError(WorldError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    size: float = 800.0
    scale: float = 1.0
    n_landmarks: int = 5
    n_objects: int = 36
    difficulty: str = "medium"
    landmark_radius: tuple = (12.0, 22.0)

    def __post_init__(self):
        if self.difficulty not in DIFFICULTY_BANDS:
            raise GenerationError(
                f"unknown difficulty {self.difficulty!r}; expected one of {sorted(DIFFICULTY_BANDS)}"
            )
        if self.n_landmarks < 1 or self.n_objects < 1:
            raise GenerationError("need at least one landmark and one object")


def _landmark_polygon(rng: random.Random, cx: float, cy: float, radius: float) -> Polygon:
    n = rng.choice((4, 5, 6))
    verts = []
    for i in range(n):
        ang = 2 * math.pi * i / n + rng.uniform(-0.15, 0.15)
        r = radius * rng.uniform(0.85, 1.0)
        verts.append(WorldPoint(cx + r * math.sin(ang), cy + r * math.cos(ang)))
    return Polygon(tuple(verts))


def _place_landmarks(rng: random.Random, config: GeneratorConfig) -> list:
    margin = 140.0
    names = [
        f"{stem} {suffix}"
        for stem, suffix in zip(
            rng.sample(_NAME_STEMS, config.n_landmarks),
            [rng.choice(_NAME_SUFFIXES) for _ in range(config.n_landmarks)],
        )
    ]
    centers = []
    landmarks = []
    for name in names:
        radius = rng.uniform(*config.landmark_radius)
        for _ in range(300):
            cx = rng.uniform(margin, config.size - margin)
            cy = rng.uniform(margin, config.size - margin)
            if all(math.hypot(cx - ox, cy - oy) > 2 * (radius + orad) + 30
                   for ox, oy, orad in centers):
                centers.append((cx, cy, radius))
                landmarks.append(LandmarkPrior(name, _landmark_polygon(rng, cx, cy, radius)))
                break
        else:
            raise GenerationError(
                f"could not place {config.n_landmarks} landmarks in a {config.size:.0f} m area"
            )
    return landmarks


def _random_point_in(rng: random.Random, poly: Polygon) -> WorldPoint:
    env = poly.envelope()
    from .geometry import point_in_polygon

    for _ in range(200):
        p = WorldPoint(rng.uniform(env.x_min, env.x_max), rng.uniform(env.y_min, env.y_max))
        if point_in_polygon(p, poly):
            return p
    return poly.centroid()


def _scatter_objects(rng: random.Random, config: GeneratorConfig, landmarks: list) -> list:
    objects = []
    idx = 0

    def add(object_type: str, pos: WorldPoint, color=None, extent=(2.0, 2.0)):
        nonlocal idx
        objects.append(SceneObject(f"o{idx:03d}", object_type, pos, extent, color))
        idx += 1

    # a few objects inside each landmark contour
    for lm in landmarks:
        for _ in range(rng.randint(2, 4)):
            add(
                rng.choice(("vehicle", "vehicle", "building")),
                _random_point_in(rng, lm.contour),
                rng.choice(OBJECT_COLORS),
            )

    # near-duplicate clusters to stress merging
    for _ in range(2):
        lm = rng.choice(landmarks)
        c = lm.centroid()
        base = WorldPoint(c.x + rng.uniform(-30, 30), c.y + rng.uniform(-30, 30))
        for _ in range(3):
            add(
                "vehicle",
                WorldPoint(base.x + rng.uniform(-4, 4), base.y + rng.uniform(-4, 4)),
                rng.choice(OBJECT_COLORS),
            )

    # the rest scattered uniformly
    while len(objects) < config.n_objects:
        add(
            rng.choice(("vehicle", "building", "green_space", "parking_lot")),
            WorldPoint(rng.uniform(20, config.size - 20), rng.uniform(20, config.size - 20)),
            rng.choice(OBJECT_COLORS),
        )
    return objects


def _pick_start(rng: random.Random, target: WorldPoint, band: tuple,
                size: float, altitude: float) -> Pose:
    lo, hi = band
    for _ in range(500):
        dist = rng.uniform(lo, hi)
        ang = rng.uniform(0, 2 * math.pi)
        x = target.x + dist * math.sin(ang)
        y = target.y + dist * math.cos(ang)
        if 10 <= x <= size - 10 and 10 <= y <= size - 10:
            return Pose(x, y, altitude, 0.0)
    raise GenerationError("could not place a start pose in the difficulty band")


def generate_scenario(config: GeneratorConfig, seed: int, altitude: float = 50.0) -> Scenario:
    """Deterministically generate a scenario whose goal matches exactly one object."""
    rng = random.Random(seed)
    bounds = MapBounds(0.0, 0.0, config.size, config.size, config.scale)
    landmarks = _place_landmarks(rng, config)
    objects = _scatter_objects(rng, config, landmarks)

    anchor = rng.choice(landmarks)
    centroid = anchor.centroid()
    target_color = rng.choice(OBJECT_COLORS)
    from .geometry import point_in_polygon

    target_pos = centroid
    for _ in range(100):
        cand = WorldPoint(centroid.x + rng.uniform(-6, 6), centroid.y + rng.uniform(-6, 6))
        if point_in_polygon(cand, anchor.contour):
            target_pos = cand
            break
    target = SceneObject(f"o{len(objects):03d}", "vehicle", target_pos, (2.0, 2.0), target_color)
    objects.append(target)

    goal = GoalSpec(
        target_class="vehicle",
        target_attributes={"color": target_color},
        anchor_landmark=anchor.name,
        relation_chain=(("contains", None),),
        target_object_id=target.id,
    )
    scenario = Scenario(bounds, tuple(landmarks), tuple(objects), goal,
                        _pick_start(rng, target_pos, DIFFICULTY_BANDS[config.difficulty],
                                    config.size, altitude),
                        seed)

    # enforce goal uniqueness by recoloring competing matches; also keep the
    # target attribute-distinct within its merge neighborhood so look-alike
    # neighbors cannot absorb it
    matches = find_goal_matches(scenario)
    competitors = {m.id for m in matches} - {target.id}
    for obj in objects:
        if (obj.id != target.id and obj.object_type == target.object_type
                and obj.color == target_color
                and obj.position.distance_to(target_pos) <= 40.0):
            competitors.add(obj.id)
    if competitors:
        recolored = []
        for obj in objects:
            if obj.id in competitors:
                alt = next(c for c in OBJECT_COLORS if c != target_color and c != obj.color)
                obj = SceneObject(obj.id, obj.object_type, obj.position, obj.extent, alt)
            recolored.append(obj)
        scenario = Scenario(bounds, tuple(landmarks), tuple(recolored), goal,
                            scenario.start, seed)

    matches = find_goal_matches(scenario)
    if len(matches) != 1 or matches[0].id != target.id:
        raise GenerationError("generated goal is not uniquely satisfiable")
    return scenario
