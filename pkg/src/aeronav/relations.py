"""Rule-based spatial relation labeling shared by the scene graph and the goal evaluator."""

from __future__ import annotations

from .geometry import Polygon, WorldPoint, bearing_and_distance, compass_sector, point_in_polygon

TOPOLOGICAL_RELATIONS = ("contains", "adjacent_to", "near_corner")
DIRECTIONAL_RELATIONS = (
    "north_of", "northeast_of", "east_of", "southeast_of",
    "south_of", "southwest_of", "west_of", "northwest_of",
)
RELATION_LABELS = TOPOLOGICAL_RELATIONS + DIRECTIONAL_RELATIONS

# Cutoffs for the rule-based relation function.
LANDMARK_ADJACENCY_M = 10.0     # boundary distance for adjacent_to
CORNER_RADIUS_M = 10.0          # vertex distance for near_corner
LANDMARK_DIRECTIONAL_M = 100.0  # max centroid distance for directional landmark edges
OBJECT_ADJACENCY_M = 8.0        # center distance for object adjacent_to
OBJECT_DIRECTIONAL_M = 30.0     # max center distance for directional object edges

_SECTOR_TO_RELATION = {
    "North": "north_of",
    "Northeast": "northeast_of",
    "East": "east_of",
    "Southeast": "southeast_of",
    "South": "south_of",
    "Southwest": "southwest_of",
    "West": "west_of",
    "Northwest": "northwest_of",
}


def directional_label(src: WorldPoint, dst: WorldPoint) -> str:
    """Directional relation of dst as seen from src (dst is <label> src)."""
    _, bearing = bearing_and_distance(src, dst)
    return _SECTOR_TO_RELATION[compass_sector(bearing)]


def landmark_relation(position: WorldPoint, contour: Polygon):
    """Relation of an object at ``position`` to a landmark contour, or None.

    Precedence: contains > near_corner > adjacent_to > directional. Directional
    labels only apply within LANDMARK_DIRECTIONAL_M of the contour centroid.
    """
    if point_in_polygon(position, contour):
        return "contains"
    if contour.vertex_distance(position) < CORNER_RADIUS_M:
        return "near_corner"
    if contour.boundary_distance(position) < LANDMARK_ADJACENCY_M:
        return "adjacent_to"
    centroid = contour.centroid()
    if position.distance_to(centroid) <= LANDMARK_DIRECTIONAL_M:
        return directional_label(centroid, position)
    return None


def object_relation(a: WorldPoint, b: WorldPoint):
    """Relation of object b to object a, or None beyond the directional cutoff."""
    d = a.distance_to(b)
    if d < OBJECT_ADJACENCY_M:
        return "adjacent_to"
    if d < OBJECT_DIRECTIONAL_M:
        return directional_label(a, b)
    return None
