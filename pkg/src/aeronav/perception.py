"""Simulated top-down detector: ground truth plus a configurable noise model."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .geometry import Pose, Rect, WorldPoint, camera_to_world, footprint, world_to_camera
from .world import OBJECT_CLASSES, OBJECT_COLORS, Scenario

CONFIDENCE_THRESHOLD = 0.20
# 4:3 12-megapixel sensor; ~416 m x 312 m ground footprint at the 50 m altitude
DEFAULT_IMAGE_DIMS = (4000, 3000)


@dataclass(frozen=True)
class NoiseModel:
    p_detect: float = 0.9
    sigma_pos: float = 2.0
    fp_rate: float = 0.5
    attr_confusion: float = 0.05
    confidence_floor: float = 0.20

    def __post_init__(self):
        for name in ("p_detect", "attr_confusion", "confidence_floor"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.sigma_pos < 0 or self.fp_rate < 0:
            raise ValueError("sigma_pos and fp_rate must be non-negative")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(p_detect=1.0, sigma_pos=0.0, fp_rate=0.0,
                   attr_confusion=0.0, confidence_floor=1.0)

    def scaled(self, factor: float) -> "NoiseModel":
        """Scale every error source by ``factor`` (used for noise sweeps)."""
        return NoiseModel(
            p_detect=max(0.0, 1.0 - (1.0 - self.p_detect) * factor),
            sigma_pos=self.sigma_pos * factor,
            fp_rate=self.fp_rate * factor,
            attr_confusion=min(1.0, self.attr_confusion * factor),
            confidence_floor=self.confidence_floor,
        )


@dataclass(frozen=True)
class Detection:
    camera_offset: WorldPoint
    object_type: str
    color: str | None
    confidence: float
    bbox: Rect
    source_id: str | None = None
    clamped: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class ObservationFrame:
    pose: Pose
    detections: tuple
    footprint: Rect


@dataclass(frozen=True)
class ProjectedDetection:
    position: WorldPoint
    object_type: str
    color: str | None
    confidence: float


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    limit = math.exp(-lam)
    k, p = 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


def _confidence(rng: random.Random, noise: NoiseModel) -> float:
    if noise.confidence_floor >= 1.0:
        return 1.0
    return noise.confidence_floor + (1.0 - noise.confidence_floor) * rng.betavariate(8, 2)


def observe(scenario: Scenario, pose: Pose, noise: NoiseModel, rng_seed: int,
            image_dims: tuple = DEFAULT_IMAGE_DIMS,
            negate_camera_offset: bool = True) -> ObservationFrame:
    """One simulated detector frame at ``pose``, deterministic for a fixed seed."""
    rng = random.Random(rng_seed)
    fp = footprint(pose, image_dims)
    detections = []

    for obj in scenario.objects:
        if not fp.contains(obj.position):
            continue
        if rng.random() >= noise.p_detect:
            continue
        world_pos = obj.position
        if noise.sigma_pos > 0:
            world_pos = WorldPoint(
                world_pos.x + rng.gauss(0.0, noise.sigma_pos),
                world_pos.y + rng.gauss(0.0, noise.sigma_pos),
            )
        clamped = not fp.contains(world_pos)
        if clamped:
            world_pos = fp.clamp(world_pos)
        object_type, color = obj.object_type, obj.color
        if noise.attr_confusion > 0 and rng.random() < noise.attr_confusion:
            if color is not None and rng.random() < 0.5:
                color = rng.choice([c for c in OBJECT_COLORS if c != color])
            else:
                object_type = rng.choice([c for c in OBJECT_CLASSES if c != object_type])
        conf = _confidence(rng, noise)
        if conf < CONFIDENCE_THRESHOLD:
            continue
        offset = world_to_camera(world_pos, pose, negate_camera_offset)
        half_w, half_h = obj.extent[0] / 2, obj.extent[1] / 2
        detections.append(Detection(
            camera_offset=offset,
            object_type=object_type,
            color=color,
            confidence=conf,
            bbox=Rect(offset.x - half_w, offset.y - half_h, offset.x + half_w, offset.y + half_h),
            source_id=obj.id,
            clamped=clamped,
        ))

    for _ in range(_poisson(rng, noise.fp_rate)):
        pos = WorldPoint(rng.uniform(fp.x_min, fp.x_max), rng.uniform(fp.y_min, fp.y_max))
        conf = _confidence(rng, noise)
        if conf < CONFIDENCE_THRESHOLD:
            continue
        offset = world_to_camera(pos, pose, negate_camera_offset)
        detections.append(Detection(
            camera_offset=offset,
            object_type=rng.choice(OBJECT_CLASSES),
            color=rng.choice(OBJECT_COLORS) if rng.random() < 0.5 else None,
            confidence=conf,
            bbox=Rect(offset.x - 1, offset.y - 1, offset.x + 1, offset.y + 1),
        ))

    return ObservationFrame(pose=pose, detections=tuple(detections), footprint=fp)


def project_detections(frame: ObservationFrame,
                       negate_camera_offset: bool = True) -> list:
    """Project camera-frame detections to world coordinates."""
    return [
        ProjectedDetection(
            position=camera_to_world(d.camera_offset, frame.pose, negate_camera_offset),
            object_type=d.object_type,
            color=d.color,
            confidence=d.confidence,
        )
        for d in frame.detections
    ]
