"""Schematic cognitive map: layered global memory and its rationale texts."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

from .geometry import (
    MapBounds,
    Pose,
    Rect,
    WorldPoint,
    bearing_and_distance,
    compass_sector,
    world_to_pixel,
)
from .world import LandmarkPrior

MAP_MERGE_RADIUS_M = 3.0
COVERAGE_CELL_M = 10.0
RENDER_CANVAS_PX = 1024

_CLASS_COLORS = {
    "vehicle": (220, 40, 40),
    "road": (90, 90, 90),
    "building": (160, 110, 60),
    "parking_lot": (70, 70, 180),
    "green_space": (40, 160, 60),
}


class MapError(ValueError):
    pass


@dataclass
class MapObject:
    position: WorldPoint
    object_type: str
    color: str | None
    confidence: float
    first_seen_step: int


class CognitiveMap:
    def __init__(self, priors, bounds: MapBounds):
        for lm in priors:
            env = lm.contour.envelope()
            if not (bounds.x_min <= env.x_min and env.x_max <= bounds.x_max
                    and bounds.y_min <= env.y_min and env.y_max <= bounds.y_max):
                raise MapError(f"landmark {lm.name!r} extends outside map bounds")
        self.bounds = bounds
        self.landmark_layer = tuple((lm.name, lm.contour) for lm in priors)
        self.object_layer: list = []
        self.trajectory_layer: list = []
        self.annotations: list = []

    def update(self, increment, pose: Pose, step: int) -> "CognitiveMap":
        """Append the pose and fold projected detections into the object layer."""
        self.trajectory_layer.append((pose, step))
        for det in increment:
            merged = False
            for existing in self.object_layer:
                if existing.object_type != det.object_type:
                    continue
                if existing.position.distance_to(det.position) <= MAP_MERGE_RADIUS_M:
                    w_old, w_new = existing.confidence, det.confidence
                    total = w_old + w_new
                    existing.position = WorldPoint(
                        (existing.position.x * w_old + det.position.x * w_new) / total,
                        (existing.position.y * w_old + det.position.y * w_new) / total,
                    )
                    existing.confidence = max(existing.confidence, det.confidence)
                    merged = True
                    break
            if not merged:
                self.object_layer.append(MapObject(
                    det.position, det.object_type, det.color, det.confidence, step,
                ))
        return self

    def to_dict(self) -> dict:
        return {
            "bounds": {
                "x_min": self.bounds.x_min, "y_min": self.bounds.y_min,
                "x_max": self.bounds.x_max, "y_max": self.bounds.y_max,
                "scale": self.bounds.scale,
            },
            "landmarks": [
                {"name": name, "contour": [[v.x, v.y] for v in poly.vertices]}
                for name, poly in self.landmark_layer
            ],
            "objects": [
                {
                    "position": [o.position.x, o.position.y],
                    "object_type": o.object_type,
                    "color": o.color,
                    "confidence": o.confidence,
                    "first_seen_step": o.first_seen_step,
                }
                for o in self.object_layer
            ],
            "trajectory": [
                {"x": p.x, "y": p.y, "z": p.z, "theta": p.theta, "step": s}
                for p, s in self.trajectory_layer
            ],
            "annotations": [
                {"position": [p.x, p.y], "text": t} for p, t in self.annotations
            ],
        }

    def render(self, pose: Pose | None = None) -> tuple:
        """Deterministic raster of the map plus a legend text sidecar."""
        from PIL import Image, ImageDraw

        b = self.bounds
        scale = RENDER_CANVAS_PX / max(b.x_max - b.x_min, b.y_max - b.y_min)
        render_bounds = MapBounds(b.x_min, b.y_min, b.x_max, b.y_max, scale)

        def px(p: WorldPoint):
            c = world_to_pixel(p, render_bounds)
            return (c.col, c.row)

        img = Image.new("RGB", (render_bounds.width_px, render_bounds.height_px),
                        (245, 245, 245))
        draw = ImageDraw.Draw(img)
        for gx in range(int(b.x_min), int(b.x_max) + 1, 100):
            draw.line([px(WorldPoint(gx, b.y_min)), px(WorldPoint(gx, b.y_max))],
                      fill=(225, 225, 225))
        for gy in range(int(b.y_min), int(b.y_max) + 1, 100):
            draw.line([px(WorldPoint(b.x_min, gy)), px(WorldPoint(b.x_max, gy))],
                      fill=(225, 225, 225))

        legend = []
        for name, poly in self.landmark_layer:
            pts = [px(v) for v in poly.vertices]
            draw.polygon(pts, outline=(30, 30, 30))
            label_at = px(poly.centroid())
            draw.text(label_at, name, fill=(30, 30, 30))
            legend.append(f"landmark {name} at {label_at}")
        for obj in self.object_layer:
            cx, cy = px(obj.position)
            fill = _CLASS_COLORS.get(obj.object_type, (0, 0, 0))
            draw.ellipse([cx - 3, cy - 3, cx + 3, cy + 3], fill=fill)
        if len(self.trajectory_layer) >= 2:
            draw.line([px(p.position) for p, _ in self.trajectory_layer],
                      fill=(40, 80, 220), width=2)
        if pose is not None:
            cx, cy = px(pose.position)
            t = math.radians(pose.theta)
            tip = (cx + 10 * math.sin(t), cy - 10 * math.cos(t))
            draw.line([(cx, cy), tip], fill=(200, 30, 30), width=3)
            draw.ellipse([cx - 4, cy - 4, cx + 4, cy + 4], outline=(200, 30, 30))
            legend.append(f"pose ({pose.x:.1f}, {pose.y:.1f}, {pose.z:.1f}) theta {pose.theta:.0f}")
        legend.append(f"objects: {len(self.object_layer)}")

        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue(), "\n".join(legend) + "\n"


def init_map(priors, bounds: MapBounds) -> CognitiveMap:
    return CognitiveMap(priors, bounds)


def update_map(m: CognitiveMap, increment, pose: Pose, step: int) -> CognitiveMap:
    return m.update(increment, pose, step)


class CoverageGrid:
    """Exploration coverage of a search region on a fixed-size cell grid."""

    def __init__(self, region: Rect, cell: float = COVERAGE_CELL_M):
        self.region = region
        self.cell = cell
        self.cols = max(1, math.ceil(region.width / cell))
        self.rows = max(1, math.ceil(region.height / cell))
        self._covered = set()

    def cell_center(self, row: int, col: int) -> WorldPoint:
        # rows run north to south
        return WorldPoint(
            self.region.x_min + (col + 0.5) * self.cell,
            self.region.y_max - (row + 0.5) * self.cell,
        )

    def update(self, footprint: Rect) -> None:
        for row in range(self.rows):
            for col in range(self.cols):
                if (row, col) not in self._covered:
                    if footprint.contains(self.cell_center(row, col)):
                        self._covered.add((row, col))

    def coverage(self) -> float:
        return len(self._covered) / (self.rows * self.cols)

    def uncovered_cells(self) -> list:
        return [(r, c) for r in range(self.rows) for c in range(self.cols)
                if (r, c) not in self._covered]

    def nearest_uncovered(self, point: WorldPoint):
        """Center of the closest uncovered cell; row-major tie-break."""
        best = None
        best_key = None
        for r, c in self.uncovered_cells():
            center = self.cell_center(r, c)
            key = (round(point.distance_to(center), 9), r, c)
            if best_key is None or key < best_key:
                best, best_key = center, key
        return best

    def uncovered_sector(self, point: WorldPoint):
        """Compass sector holding the most uncovered cells as seen from ``point``."""
        counts = {}
        for r, c in self.uncovered_cells():
            center = self.cell_center(r, c)
            if center.distance_to(point) < 1e-9:
                continue
            _, bearing = bearing_and_distance(point, center)
            sector = compass_sector(bearing)
            counts[sector] = counts.get(sector, 0) + 1
        if not counts:
            return None
        return max(sorted(counts), key=lambda s: counts[s])


def nav_rationale(pose: Pose, landmark: LandmarkPrior) -> str:
    centroid = landmark.contour.centroid()
    dist, bearing = bearing_and_distance(pose.position, centroid)
    if dist == 0:
        return f"Landmark {landmark.name}: 0.0 m, here"
    sector = compass_sector(bearing)
    return f"Landmark {landmark.name}: {dist:.1f} m, bearing {round(bearing)}°, {sector}"


def search_rationale(pose: Pose, m: CognitiveMap, coverage: CoverageGrid) -> str:
    from .geometry import footprint as camera_footprint
    from .perception import DEFAULT_IMAGE_DIMS

    fp = camera_footprint(pose, DEFAULT_IMAGE_DIMS)
    pct = coverage.coverage() * 100.0
    lines = [
        f"Position ({pose.x:.1f}, {pose.y:.1f}, {pose.z:.1f}), heading {pose.theta:.0f}°",
        f"Visual field [({fp.x_min:.1f}, {fp.y_min:.1f}), ({fp.x_max:.1f}, {fp.y_max:.1f})]",
        f"Search region {pct:.0f}% explored",
    ]
    if pct >= 100.0:
        lines.append("Region fully explored: stop search")
    else:
        sector = coverage.uncovered_sector(pose.position)
        if sector is not None:
            lines.append(f"Largest unexplored area: {sector}")
    return "\n".join(lines)
