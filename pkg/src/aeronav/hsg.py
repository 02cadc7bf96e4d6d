"""Hierarchical scene graph: block/landmark/object nodes, rule-based edges,
R-tree indexing, and incremental similarity-fusion merging."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from . import relations
from .geometry import MapBounds, Polygon, Rect, WorldPoint
from .rtree import RTree
from .world import OBJECT_CLASSES, OBJECT_COLORS

DEFAULT_GAMMA = 0.95
DEFAULT_SIGMA = 10.0
DEFAULT_RHO = 0.8
EDGE_RECOMPUTE_RADIUS_M = 50.0
FEATURE_BIAS = 0.3
_COLOR_SLOTS = OBJECT_COLORS + ("none",)


class GraphError(ValueError):
    pass


def encode_feature(object_type: str, color) -> tuple:
    """One-hot class and color concatenated with a shared bias slot, L2-normalized.

    The bias keeps same-class/different-color pairs on a cosine plateau well
    below the merge floor while identical attribute pairs stay at cosine 1.
    """
    vec = [0.0] * (len(OBJECT_CLASSES) + len(_COLOR_SLOTS) + 1)
    vec[OBJECT_CLASSES.index(object_type)] = 1.0
    color_key = color if color is not None else "none"
    vec[len(OBJECT_CLASSES) + _COLOR_SLOTS.index(color_key)] = 1.0
    vec[-1] = FEATURE_BIAS
    norm = math.sqrt(sum(v * v for v in vec))
    return tuple(v / norm for v in vec)


def cosine(a, b) -> float:
    na = math.sqrt(sum(v * v for v in a))
    nb = math.sqrt(sum(v * v for v in b))
    if na == 0 or nb == 0:
        return 0.0
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


@dataclass
class SceneNode:
    id: str
    level: str  # block | landmark | object
    position: WorldPoint
    bbox: Rect
    name: str | None = None
    object_type: str | None = None
    color: str | None = None
    confidence: float = 1.0
    feature: tuple = ()
    observation_count: int = 1


@dataclass(frozen=True)
class SceneEdge:
    src: str
    dst: str
    relation: str

    def __post_init__(self):
        if self.relation not in relations.RELATION_LABELS:
            raise GraphError(f"relation {self.relation!r} not in allowed set")


def similarity(a: SceneNode, b: SceneNode,
               gamma: float = DEFAULT_GAMMA, sigma: float = DEFAULT_SIGMA) -> float:
    """Fused spatial/semantic similarity of two object nodes."""
    d2 = (a.position.x - b.position.x) ** 2 + (a.position.y - b.position.y) ** 2
    spatial = math.exp(-d2 / (sigma * sigma))
    semantic = cosine(a.feature, b.feature)
    return (1.0 - gamma) * spatial + gamma * semantic


class SceneGraph:
    def __init__(self, gamma: float = DEFAULT_GAMMA, sigma: float = DEFAULT_SIGMA,
                 rho: float = DEFAULT_RHO):
        self.gamma = gamma
        self.sigma = sigma
        self.rho = rho
        self.nodes: dict = {}
        self.edges: set = set()
        self.contours: dict = {}  # landmark name -> Polygon
        self._index = RTree()
        self._out: dict = {}  # src id -> set of SceneEdge
        self._next_object = 0

    # --- bookkeeping ------------------------------------------------------

    def _add_node(self, node: SceneNode) -> None:
        if node.id in self.nodes:
            raise GraphError(f"duplicate node id {node.id!r}")
        self.nodes[node.id] = node
        self._index.insert(node.id, node.bbox)

    def _add_edge(self, edge: SceneEdge) -> None:
        if edge in self.edges:
            return
        self.edges.add(edge)
        self._out.setdefault(edge.src, set()).add(edge)

    def _drop_edges_touching(self, node_id: str) -> None:
        stale = {e for e in self.edges if e.src == node_id or e.dst == node_id}
        self.edges -= stale
        for e in stale:
            self._out.get(e.src, set()).discard(e)

    def object_nodes(self) -> list:
        return [n for n in self.nodes.values() if n.level == "object"]

    def children(self, src_ids, relation=None) -> list:
        out = set()
        for src in src_ids:
            for e in self._out.get(src, ()):
                if relation is None or e.relation == relation:
                    out.add(e.dst)
        return sorted(out)

    def nodes_within(self, region: Rect) -> list:
        """Nodes whose bbox intersects ``region``, via the spatial index."""
        return [self.nodes[k] for k in sorted(self._index.search(region))]

    # --- edge rules -------------------------------------------------------

    def _landmark_edges_for(self, node: SceneNode) -> None:
        block = self.nodes["block"]
        self._add_edge(SceneEdge(block.id, node.id, "contains"))
        best_name, best_dist = None, float("inf")
        for name, contour in self.contours.items():
            rel = relations.landmark_relation(node.position, contour)
            if rel is not None:
                self._add_edge(SceneEdge(f"geo:{name}", node.id, rel))
            d = node.position.distance_to(contour.centroid())
            if d < best_dist:
                best_name, best_dist = name, d
        # guarantee a landmark edge even for isolated objects
        if best_name is not None:
            rel = relations.landmark_relation(node.position, self.contours[best_name])
            if rel is None:
                rel = relations.directional_label(
                    self.contours[best_name].centroid(), node.position)
            self._add_edge(SceneEdge(f"geo:{best_name}", node.id, rel))

    def _recompute_object_edges(self, node: SceneNode) -> None:
        region = Rect(
            node.position.x - relations.OBJECT_DIRECTIONAL_M,
            node.position.y - relations.OBJECT_DIRECTIONAL_M,
            node.position.x + relations.OBJECT_DIRECTIONAL_M,
            node.position.y + relations.OBJECT_DIRECTIONAL_M,
        )
        for other in self.nodes_within(region):
            if other.level != "object" or other.id == node.id:
                continue
            rel = relations.object_relation(node.position, other.position)
            if rel is not None:
                self._add_edge(SceneEdge(node.id, other.id, rel))
            rel_back = relations.object_relation(other.position, node.position)
            if rel_back is not None:
                self._add_edge(SceneEdge(other.id, node.id, rel_back))

    def _refresh_node_edges(self, node: SceneNode) -> None:
        self._drop_edges_touching(node.id)
        self._landmark_edges_for(node)
        self._recompute_object_edges(node)

    # --- updates ----------------------------------------------------------

    def integrate(self, increment) -> None:
        """Merge or insert projected detections; refresh edges near each change.

        Candidates are matched against existing object nodes within a 3-sigma
        neighborhood; beyond that the spatial term cannot lift the score over
        the merge threshold given the default weighting.
        """
        touched = []
        for det in increment:
            candidate = SceneNode(
                id="candidate",
                level="object",
                position=det.position,
                bbox=_point_bbox(det.position),
                object_type=det.object_type,
                color=det.color,
                confidence=det.confidence,
                feature=encode_feature(det.object_type, det.color),
            )
            reach = 3 * self.sigma
            region = Rect(det.position.x - reach, det.position.y - reach,
                          det.position.x + reach, det.position.y + reach)
            best, best_score = None, -1.0
            for node in self.nodes_within(region):
                if node.level != "object":
                    continue
                score = similarity(candidate, node, self.gamma, self.sigma)
                if score > best_score:
                    best, best_score = node, score
            if best is not None and best_score >= self.rho:
                self._merge_into(best, candidate)
                touched.append(best)
            else:
                node = SceneNode(
                    id=f"obj:{self._next_object:05d}",
                    level="object",
                    position=det.position,
                    bbox=_point_bbox(det.position),
                    object_type=det.object_type,
                    color=det.color,
                    confidence=det.confidence,
                    feature=candidate.feature,
                )
                self._next_object += 1
                self._add_node(node)
                touched.append(node)
        for node in touched:
            self._refresh_node_edges(node)

    def _merge_into(self, node: SceneNode, candidate: SceneNode) -> None:
        w_old, w_new = node.confidence, candidate.confidence
        total = w_old + w_new
        new_pos = WorldPoint(
            (node.position.x * w_old + candidate.position.x * w_new) / total,
            (node.position.y * w_old + candidate.position.y * w_new) / total,
        )
        self._index.delete(node.id, node.bbox)
        node.position = new_pos
        node.bbox = _point_bbox(new_pos)
        self._index.insert(node.id, node.bbox)
        node.confidence = max(node.confidence, candidate.confidence)
        n = node.observation_count
        node.feature = tuple(
            (f * n + g) / (n + 1) for f, g in zip(node.feature, candidate.feature)
        )
        node.observation_count = n + 1

    # --- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "hyperparams": {"gamma": self.gamma, "sigma": self.sigma, "rho": self.rho},
            "nodes": [
                {
                    "id": n.id, "level": n.level, "name": n.name,
                    "object_type": n.object_type, "color": n.color,
                    "position": [n.position.x, n.position.y],
                    "bbox": [n.bbox.x_min, n.bbox.y_min, n.bbox.x_max, n.bbox.y_max],
                    "confidence": n.confidence,
                    "feature": list(n.feature),
                    "observation_count": n.observation_count,
                }
                for n in sorted(self.nodes.values(), key=lambda n: n.id)
            ],
            "edges": sorted(
                [[e.src, e.dst, e.relation] for e in self.edges]
            ),
            "contours": {
                name: [[v.x, v.y] for v in poly.vertices]
                for name, poly in sorted(self.contours.items())
            },
        }

    def dump(self, path) -> None:
        from pathlib import Path

        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def from_dict(cls, doc: dict) -> "SceneGraph":
        hp = doc.get("hyperparams", {})
        g = cls(hp.get("gamma", DEFAULT_GAMMA), hp.get("sigma", DEFAULT_SIGMA),
                hp.get("rho", DEFAULT_RHO))
        for nd in doc["nodes"]:
            node = SceneNode(
                id=nd["id"], level=nd["level"],
                position=WorldPoint(*nd["position"]),
                bbox=Rect(*nd["bbox"]),
                name=nd.get("name"),
                object_type=nd.get("object_type"),
                color=nd.get("color"),
                confidence=nd.get("confidence", 1.0),
                feature=tuple(nd.get("feature", ())),
                observation_count=nd.get("observation_count", 1),
            )
            g._add_node(node)
            if node.level == "object":
                g._next_object = max(g._next_object, int(node.id.split(":")[1]) + 1)
        for src, dst, rel in doc["edges"]:
            g._add_edge(SceneEdge(src, dst, rel))
        for name, verts in doc.get("contours", {}).items():
            g.contours[name] = Polygon(tuple(WorldPoint(x, y) for x, y in verts))
        return g


def _point_bbox(p: WorldPoint, half: float = 1.0) -> Rect:
    return Rect(p.x - half, p.y - half, p.x + half, p.y + half)


def init_graph(priors, bounds: MapBounds,
               gamma: float = DEFAULT_GAMMA, sigma: float = DEFAULT_SIGMA,
               rho: float = DEFAULT_RHO) -> SceneGraph:
    """Block node, one landmark node per prior, and block->landmark edges."""
    names = [lm.name for lm in priors]
    if len(names) != len(set(names)):
        raise GraphError("duplicate landmark names")
    g = SceneGraph(gamma, sigma, rho)
    block_rect = Rect(bounds.x_min, bounds.y_min, bounds.x_max, bounds.y_max)
    g._add_node(SceneNode(
        id="block", level="block", name="block",
        position=block_rect.center, bbox=block_rect,
    ))
    for lm in priors:
        env = lm.contour.envelope()
        g._add_node(SceneNode(
            id=f"geo:{lm.name}", level="landmark", name=lm.name,
            position=lm.contour.centroid(), bbox=env,
        ))
        g.contours[lm.name] = lm.contour
        g._add_edge(SceneEdge("block", f"geo:{lm.name}", "contains"))
    return g
