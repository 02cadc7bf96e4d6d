"""Planar geometry: coordinate frames, transforms, polygon math, camera footprint."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Ground sample distance per meter of altitude (meters of ground per pixel).
GSD_PER_METER = 2.08e-3

COMPASS_NAMES = (
    "North", "Northeast", "East", "Southeast",
    "South", "Southwest", "West", "Northwest",
)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class WorldPoint:
    x: float
    y: float

    def distance_to(self, other: "WorldPoint") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class PixelCoord:
    col: int
    row: int
    clamped: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class MapBounds:
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    scale: float  # pixels per meter

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError("map bounds must have positive extent")
        if self.scale <= 0:
            raise GeometryError("map scale must be positive")

    @property
    def width_px(self) -> int:
        return round((self.x_max - self.x_min) * self.scale) + 1

    @property
    def height_px(self) -> int:
        return round((self.y_max - self.y_min) * self.scale) + 1

    def contains(self, p: WorldPoint) -> bool:
        return self.x_min <= p.x <= self.x_max and self.y_min <= p.y <= self.y_max


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float
    theta: float  # degrees clockwise from north, [0, 360)

    def __post_init__(self):
        if self.z <= 0:
            raise GeometryError("altitude must be positive")
        object.__setattr__(self, "theta", self.theta % 360.0)

    @property
    def position(self) -> WorldPoint:
        return WorldPoint(self.x, self.y)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned world rectangle."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def contains(self, p: WorldPoint) -> bool:
        return self.x_min <= p.x <= self.x_max and self.y_min <= p.y <= self.y_max

    def intersects(self, other: "Rect") -> bool:
        return not (
            other.x_min > self.x_max
            or other.x_max < self.x_min
            or other.y_min > self.y_max
            or other.y_max < self.y_min
        )

    @property
    def center(self) -> WorldPoint:
        return WorldPoint((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def dilated(self, margin: float) -> "Rect":
        return Rect(
            self.x_min - margin, self.y_min - margin,
            self.x_max + margin, self.y_max + margin,
        )

    def clamp(self, p: WorldPoint) -> WorldPoint:
        return WorldPoint(
            min(max(p.x, self.x_min), self.x_max),
            min(max(p.y, self.y_min), self.y_max),
        )


def _segments_intersect(a1, a2, b1, b2) -> bool:
    def cross(o, p, q):
        return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x)

    d1 = cross(b1, b2, a1)
    d2 = cross(b1, b2, a2)
    d3 = cross(a1, a2, b1)
    d4 = cross(a1, a2, b2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


@dataclass(frozen=True)
class Polygon:
    vertices: tuple

    def __post_init__(self):
        verts = tuple(self.vertices)
        if len(verts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        object.__setattr__(self, "vertices", verts)
        if abs(self.signed_area()) < 1e-12:
            raise GeometryError("polygon has zero area")
        n = len(verts)
        for i in range(n):
            a1, a2 = verts[i], verts[(i + 1) % n]
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue
                b1, b2 = verts[j], verts[(j + 1) % n]
                if _segments_intersect(a1, a2, b1, b2):
                    raise GeometryError("polygon is self-intersecting")

    def signed_area(self) -> float:
        s = 0.0
        n = len(self.vertices)
        for i in range(n):
            p, q = self.vertices[i], self.vertices[(i + 1) % n]
            s += p.x * q.y - q.x * p.y
        return s / 2.0

    @property
    def area(self) -> float:
        return abs(self.signed_area())

    def centroid(self) -> WorldPoint:
        a = self.signed_area()
        cx = cy = 0.0
        n = len(self.vertices)
        for i in range(n):
            p, q = self.vertices[i], self.vertices[(i + 1) % n]
            w = p.x * q.y - q.x * p.y
            cx += (p.x + q.x) * w
            cy += (p.y + q.y) * w
        return WorldPoint(cx / (6 * a), cy / (6 * a))

    def envelope(self) -> Rect:
        xs = [v.x for v in self.vertices]
        ys = [v.y for v in self.vertices]
        return Rect(min(xs), min(ys), max(xs), max(ys))

    def boundary_distance(self, p: WorldPoint) -> float:
        n = len(self.vertices)
        return min(
            _point_segment_distance(p, self.vertices[i], self.vertices[(i + 1) % n])
            for i in range(n)
        )

    def vertex_distance(self, p: WorldPoint) -> float:
        return min(p.distance_to(v) for v in self.vertices)


def _point_segment_distance(p: WorldPoint, a: WorldPoint, b: WorldPoint) -> float:
    ax, ay = b.x - a.x, b.y - a.y
    denom = ax * ax + ay * ay
    if denom == 0:
        return p.distance_to(a)
    t = ((p.x - a.x) * ax + (p.y - a.y) * ay) / denom
    t = min(max(t, 0.0), 1.0)
    return math.hypot(p.x - (a.x + t * ax), p.y - (a.y + t * ay))


def world_to_pixel(p: WorldPoint, b: MapBounds) -> PixelCoord:
    col = round((p.x - b.x_min) * b.scale)
    row = round((b.y_max - p.y) * b.scale)
    clamped = False
    if not (0 <= col < b.width_px):
        col = min(max(col, 0), b.width_px - 1)
        clamped = True
    if not (0 <= row < b.height_px):
        row = min(max(row, 0), b.height_px - 1)
        clamped = True
    return PixelCoord(col, row, clamped)


def pixel_to_world(px: PixelCoord, b: MapBounds) -> WorldPoint:
    if not (0 <= px.col < b.width_px and 0 <= px.row < b.height_px):
        raise GeometryError(f"pixel ({px.col}, {px.row}) outside raster")
    return WorldPoint(
        b.x_min + px.col / b.scale,
        b.y_max - px.row / b.scale,
    )


def camera_to_world(pc: WorldPoint, pose: Pose, negate_offset: bool = True) -> WorldPoint:
    """Rotate a camera-frame offset by the vehicle yaw and translate to world.

    With ``negate_offset`` (the default) the rotated offset is subtracted from
    the vehicle position; disabling it adds the offset instead.
    """
    t = math.radians(pose.theta)
    c, s = math.cos(t), math.sin(t)
    rx = c * pc.x - s * pc.y
    ry = s * pc.x + c * pc.y
    if negate_offset:
        return WorldPoint(pose.x - rx, pose.y - ry)
    return WorldPoint(pose.x + rx, pose.y + ry)


def world_to_camera(p: WorldPoint, pose: Pose, negate_offset: bool = True) -> WorldPoint:
    """Inverse of :func:`camera_to_world`."""
    if negate_offset:
        dx, dy = pose.x - p.x, pose.y - p.y
    else:
        dx, dy = p.x - pose.x, p.y - pose.y
    t = math.radians(pose.theta)
    c, s = math.cos(t), math.sin(t)
    return WorldPoint(c * dx + s * dy, -s * dx + c * dy)


def polygon_centroid(poly: Polygon) -> WorldPoint:
    return poly.centroid()


def point_in_polygon(p: WorldPoint, poly: Polygon, boundary_eps: float = 1e-9) -> bool:
    """Ray-casting containment test; boundary points count as inside."""
    if poly.boundary_distance(p) <= boundary_eps:
        return True
    inside = False
    n = len(poly.vertices)
    for i in range(n):
        a, b = poly.vertices[i], poly.vertices[(i + 1) % n]
        if (a.y > p.y) != (b.y > p.y):
            x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y)
            if p.x < x_cross:
                inside = not inside
    return inside


def bearing_and_distance(src: WorldPoint, dst: WorldPoint) -> tuple:
    """Euclidean distance and bearing in degrees clockwise from north."""
    dx, dy = dst.x - src.x, dst.y - src.y
    dist = math.hypot(dx, dy)
    if dist == 0:
        return 0.0, 0.0
    return dist, math.degrees(math.atan2(dx, dy)) % 360.0


def compass_sector(bearing: float) -> str:
    """Name of the 45-degree compass sector containing a bearing.

    Sector boundaries (odd multiples of 22.5) belong to the diagonal sector.
    """
    b = bearing % 360.0
    ratio = b / 22.5
    nearest_odd = 2 * math.floor(ratio / 2) + 1
    if abs(ratio - nearest_odd) < 1e-9:
        diagonal = (45.0 + 90.0 * math.floor(b / 90.0)) % 360.0
        return COMPASS_NAMES[int(diagonal // 45)]
    return COMPASS_NAMES[int(((b + 22.5) % 360.0) // 45)]


def gsd(altitude: float) -> float:
    """Ground sample distance in meters per pixel at a given altitude."""
    if altitude <= 0:
        raise GeometryError("altitude must be positive")
    return GSD_PER_METER * altitude


def footprint(pose: Pose, image_dims: tuple = (1000, 1000)) -> Rect:
    """Axis-aligned envelope of the rotated ground footprint of the camera."""
    res = gsd(pose.z)
    w = image_dims[0] * res
    h = image_dims[1] * res
    t = math.radians(pose.theta)
    c, s = abs(math.cos(t)), abs(math.sin(t))
    half_x = (w * c + h * s) / 2
    half_y = (w * s + h * c) / 2
    return Rect(pose.x - half_x, pose.y - half_y, pose.x + half_x, pose.y + half_y)
