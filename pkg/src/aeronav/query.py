"""Operation-chain query DSL: instruction grammar, chain compile/parse,
recursive execution, relaxation fallback, and target retrieval."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from . import relations
from .geometry import Pose, Rect, WorldPoint
from .hsg import SceneGraph, SceneNode
from .world import GoalSpec

MAX_TRIAL = 3

_RELAXABLE = set(relations.DIRECTIONAL_RELATIONS) | {"adjacent_to", "near_corner"}


class QueryError(ValueError):
    pass


class UnknownMethodError(QueryError):
    pass


class ArityError(QueryError):
    pass


class EmptyChainError(QueryError):
    pass


class InstructionParseError(QueryError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# method -> (min positional args, max positional args, allowed kwargs)
_METHODS = {
    "get_geonode_by_name": (1, 1, set()),
    "get_child_nodes": (0, 1, {"relation_type"}),
    "filter_by_class": (1, 1, set()),
    "filter_by_attribute": (2, 2, set()),
    "filter_by_relation": (2, 2, set()),
    "nearest_to": (0, 2, {"radius"}),
}

_SOURCE_METHODS = {"get_geonode_by_name", "filter_by_class"}


@dataclass(frozen=True)
class QueryOp:
    method: str
    args: tuple = ()
    kwargs: tuple = ()  # sorted (key, value) pairs

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        kw = self.kwargs
        if isinstance(kw, dict):
            kw = tuple(sorted(kw.items()))
        object.__setattr__(self, "kwargs", tuple(kw))
        if self.method not in _METHODS:
            raise UnknownMethodError(f"unknown query method {self.method!r}")
        lo, hi, allowed = _METHODS[self.method]
        if not lo <= len(self.args) <= hi:
            raise ArityError(
                f"{self.method} takes {lo}..{hi} positional args, got {len(self.args)}"
            )
        for key, _ in self.kwargs:
            if key not in allowed:
                raise ArityError(f"{self.method} does not accept kwarg {key!r}")

    def kwarg(self, key, default=None):
        for k, v in self.kwargs:
            if k == key:
                return v
        return default

    def to_dict(self) -> dict:
        doc: dict = {"method": self.method}
        if self.args:
            doc["args"] = list(self.args)
        if self.kwargs:
            doc["kwargs"] = dict(self.kwargs)
        return doc


@dataclass(frozen=True)
class OpChain:
    ops: tuple

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        if not self.ops:
            raise EmptyChainError("operation chain must not be empty")
        if self.ops[0].method not in _SOURCE_METHODS:
            raise QueryError(
                f"chain must start with a source op, got {self.ops[0].method!r}"
            )

    def to_list(self) -> list:
        return [op.to_dict() for op in self.ops]


def serialize_chain(chain: OpChain) -> str:
    return json.dumps(chain.to_list())


def parse_chain(document) -> OpChain:
    """Validate the documented array-of-objects wire format into an OpChain."""
    if isinstance(document, str):
        document = json.loads(document)
    if not isinstance(document, list):
        raise QueryError("chain document must be a JSON array")
    if not document:
        raise EmptyChainError("operation chain must not be empty")
    ops = []
    for i, entry in enumerate(document):
        if "method" not in entry:
            raise QueryError(f"chain entry {i} missing 'method'")
        ops.append(QueryOp(
            method=entry["method"],
            args=tuple(entry.get("args", ())),
            kwargs=entry.get("kwargs", {}),
        ))
    return OpChain(tuple(ops))


# --- instruction grammar --------------------------------------------------

_ARTICLES = {"a", "an", "the", "one"}
_COLOR_WORDS = {
    "white", "black", "red", "gray", "grey", "blue", "green", "brown", "silver",
}
_COLOR_CANON = {"grey": "gray"}
_CLASS_WORDS = {
    "car": "vehicle", "cars": "vehicle", "vehicle": "vehicle", "truck": "vehicle",
    "van": "vehicle", "building": "building", "house": "building",
    "road": "road", "street": "road",
    "parking lot": "parking_lot", "park": "green_space", "green space": "green_space",
}
# longest phrases first so multi-word relations win
_RELATION_PHRASES = [
    ("near the corner of", "near_corner"),
    ("at the corner of", "near_corner"),
    ("in front of", "north_of"),
    ("to the north of", "north_of"),
    ("to the south of", "south_of"),
    ("to the east of", "east_of"),
    ("to the west of", "west_of"),
    ("northeast of", "northeast_of"),
    ("northwest of", "northwest_of"),
    ("southeast of", "southeast_of"),
    ("southwest of", "southwest_of"),
    ("north of", "north_of"),
    ("south of", "south_of"),
    ("east of", "east_of"),
    ("west of", "west_of"),
    ("adjacent to", "adjacent_to"),
    ("next to", "adjacent_to"),
    ("beside", "adjacent_to"),
    ("behind", "south_of"),
    ("inside", "contains"),
    ("parked on", "contains"),
    ("parked in", "contains"),
    ("on", "contains"),
    ("in", "contains"),
]
_FILLER_WORDS = {"parked", "located", "situated", "standing"}


def _normalize(text: str) -> list:
    return re.findall(r"[A-Za-z_']+", text)


def parse_instruction(text: str, landmark_names=None) -> GoalSpec:
    """Parse the constrained instruction grammar into a structured goal.

    Grammar: ``<article> <color?> <class> [<relation phrase> <landmark>]*``
    with an optional trailing ``with ...`` context clause that is parsed past
    but not compiled into constraints.
    """
    words = _normalize(text)
    pos = 0
    if not words:
        raise InstructionParseError("empty instruction", 0)
    if words[pos].lower() in _ARTICLES:
        pos += 1
    color = None
    if pos < len(words) and words[pos].lower() in _COLOR_WORDS:
        color = _COLOR_CANON.get(words[pos].lower(), words[pos].lower())
        pos += 1
    cls = None
    if pos + 1 < len(words):
        two = f"{words[pos].lower()} {words[pos + 1].lower()}"
        if two in _CLASS_WORDS:
            cls = _CLASS_WORDS[two]
            pos += 2
    if cls is None:
        if pos < len(words) and words[pos].lower() in _CLASS_WORDS:
            cls = _CLASS_WORDS[words[pos].lower()]
            pos += 1
        else:
            raise InstructionParseError(
                f"expected an object class, got {words[pos] if pos < len(words) else 'end'!r}",
                pos,
            )

    chain = []
    while pos < len(words):
        word = words[pos].lower()
        if word == "with":
            break  # trailing context clause, not a target constraint
        if word in _FILLER_WORDS:
            pos += 1
            continue
        matched = None
        for phrase, rel in _RELATION_PHRASES:
            n = len(phrase.split())
            cand = " ".join(w.lower() for w in words[pos:pos + n])
            if cand == phrase:
                matched = (rel, n)
                break
        if matched is None:
            raise InstructionParseError(f"expected a relation phrase, got {words[pos]!r}", pos)
        rel, n = matched
        pos += n
        name_words = []
        while pos < len(words) and words[pos][0].isupper():
            name_words.append(words[pos])
            pos += 1
        if not name_words:
            raise InstructionParseError("expected a landmark name", pos)
        landmark = " ".join(name_words)
        if landmark_names is not None and landmark not in landmark_names:
            raise InstructionParseError(f"unknown landmark {landmark!r}", pos)
        chain.append((rel, landmark))

    anchor = chain[0][1] if chain else None
    relation_chain = []
    if chain:
        relation_chain.append((chain[0][0], None))
        relation_chain.extend(chain[1:])
    attributes = {"color": color} if color else {}
    return GoalSpec(
        target_class=cls,
        target_attributes=attributes,
        anchor_landmark=anchor,
        relation_chain=tuple(relation_chain),
    )


def compile_chain(goal: GoalSpec) -> OpChain:
    """Canonical chain: anchor lookup, relation hop, then class/attribute filters."""
    ops = []
    if goal.anchor_landmark is not None:
        ops.append(QueryOp("get_geonode_by_name", (goal.anchor_landmark,)))
        anchor_rel = goal.relation_chain[0][0] if goal.relation_chain else "contains"
        ops.append(QueryOp("get_child_nodes", (), {"relation_type": anchor_rel}))
    ops.append(QueryOp("filter_by_class", (goal.target_class,)))
    for attr in sorted(goal.target_attributes):
        ops.append(QueryOp("filter_by_attribute", (attr, goal.target_attributes[attr])))
    for rel, qualifier in goal.relation_chain:
        if qualifier is not None:
            ops.append(QueryOp("filter_by_relation", (rel, qualifier)))
    return OpChain(tuple(ops))


# --- execution ------------------------------------------------------------

@dataclass(frozen=True)
class TraceEntry:
    op: QueryOp
    input_count: int
    output_count: int
    fallback_used: bool

    def to_dict(self) -> dict:
        return {
            "op": self.op.to_dict(),
            "input_count": self.input_count,
            "output_count": self.output_count,
            "fallback_used": self.fallback_used,
        }


@dataclass(frozen=True)
class QueryResult:
    candidates: tuple
    trace: tuple

    @property
    def candidate_ids(self) -> list:
        return [n.id for n in self.candidates]


def _named_nodes(g: SceneGraph, name: str) -> list:
    wanted = name.lower()
    return sorted(
        (n for n in g.nodes.values()
         if n.level in ("landmark", "block") and (n.name or "").lower() == wanted),
        key=lambda n: n.id,
    )


def _apply_op(g: SceneGraph, op: QueryOp, candidates: list) -> list:
    if op.method == "get_geonode_by_name":
        return _named_nodes(g, op.args[0])
    if op.method == "get_child_nodes":
        relation = op.args[0] if op.args else op.kwarg("relation_type")
        ids = g.children([n.id for n in candidates], relation)
        return [g.nodes[i] for i in ids]
    if op.method == "filter_by_class":
        return [n for n in candidates if n.level == "object" and n.object_type == op.args[0]]
    if op.method == "filter_by_attribute":
        attr, value = op.args
        return [n for n in candidates if getattr(n, attr, None) == value]
    if op.method == "filter_by_relation":
        relation, name = op.args
        sources = {n.id for n in _named_nodes(g, name)}
        kept = []
        for n in candidates:
            for src in sources:
                if any(e.dst == n.id and e.relation == relation
                       for e in g._out.get(src, ())):
                    kept.append(n)
                    break
        return kept
    if op.method == "nearest_to":
        radius = op.kwarg("radius")
        if radius is not None:
            found = {}
            for c in candidates:
                region = Rect(c.position.x - radius, c.position.y - radius,
                              c.position.x + radius, c.position.y + radius)
                for n in g.nodes_within(region):
                    if n.level == "object" and n.position.distance_to(c.position) <= radius:
                        found[n.id] = n
            return [found[k] for k in sorted(found)]
        point = WorldPoint(float(op.args[0]), float(op.args[1]))
        objs = sorted(g.object_nodes(), key=lambda n: (n.position.distance_to(point), n.id))
        return objs[:1]
    raise UnknownMethodError(op.method)


def execute_chain(g: SceneGraph, chain: OpChain, fallback_used: bool = False) -> QueryResult:
    """Fold the candidate set through the chain, recording a per-op trace."""
    candidates = sorted(g.nodes.values(), key=lambda n: n.id)
    trace = []
    for op in chain.ops:
        before = len(candidates)
        candidates = _apply_op(g, op, candidates)
        trace.append(TraceEntry(op, before, len(candidates), fallback_used))
    return QueryResult(tuple(candidates), tuple(trace))


# --- relaxation and retrieval --------------------------------------------

def _widen_relations(op: QueryOp) -> QueryOp:
    if op.method == "get_child_nodes":
        rel = op.args[0] if op.args else op.kwarg("relation_type")
        if rel in _RELAXABLE:
            return QueryOp("get_child_nodes", (), {"relation_type": "contains"})
    if op.method == "filter_by_relation" and op.args[0] in _RELAXABLE:
        return QueryOp("filter_by_relation", ("contains", op.args[1]))
    return op


def relax_chain(chain: OpChain, level: int, sigma: float = 10.0) -> OpChain:
    """Deterministic relaxation ladder.

    Level 1 widens every directional/adjacency relation to ``contains``;
    level 2 additionally replaces relation hops with a 3-sigma spatial
    neighborhood scan around the anchor; level 3 drops the anchor and keeps
    only class/attribute filters graph-wide.
    """
    if level not in (1, 2, 3):
        raise QueryError(f"relaxation level must be 1, 2 or 3, got {level}")
    if level == 1:
        return OpChain(tuple(_widen_relations(op) for op in chain.ops))
    if level == 2:
        ops = []
        for op in chain.ops:
            if op.method == "get_child_nodes":
                ops.append(QueryOp("nearest_to", (), {"radius": 3 * sigma}))
            elif op.method == "filter_by_relation":
                continue
            else:
                ops.append(op)
        return OpChain(tuple(ops))
    ops = [op for op in chain.ops
           if op.method in ("filter_by_class", "filter_by_attribute")]
    if not ops:
        ops = [QueryOp("filter_by_class", (chain.ops[-1].args[0],))] \
            if chain.ops[-1].method == "filter_by_class" else []
    if not ops:
        raise QueryError("cannot relax a chain with no class/attribute filters")
    return OpChain(tuple(ops))


@dataclass(frozen=True)
class RetrievalResult:
    position: WorldPoint
    node_id: str | None
    fallback_used: bool
    fallback_level: int
    failed: bool
    trace: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "position": [self.position.x, self.position.y],
            "node_id": self.node_id,
            "fallback_used": self.fallback_used,
            "fallback_level": self.fallback_level,
            "failed": self.failed,
            "trace": [t.to_dict() for t in self.trace],
        }


def _selection_key(node: SceneNode, pose: Pose):
    conf = node.confidence if node.level == "object" else 1.0
    return (-conf, node.position.distance_to(pose.position), node.id)


def confidence(v: SceneNode) -> float:
    if v.level != "object":
        raise QueryError(f"confidence is defined for object nodes, not {v.level!r}")
    return v.confidence


def retrieve_target(g: SceneGraph, goal: GoalSpec, pose: Pose,
                    max_trial: int = MAX_TRIAL) -> RetrievalResult:
    """Execute the compiled chain with the relaxation fallback ladder."""
    chain = compile_chain(goal)
    trace = []
    result = execute_chain(g, chain)
    trace.extend(result.trace)
    if result.candidates:
        best = min(result.candidates, key=lambda n: _selection_key(n, pose))
        return RetrievalResult(best.position, best.id, False, 0, False, tuple(trace))
    for level in range(1, max_trial + 1):
        try:
            relaxed = relax_chain(chain, level, g.sigma)
        except QueryError:
            continue
        result = execute_chain(g, relaxed, fallback_used=True)
        trace.extend(result.trace)
        if result.candidates:
            best = min(result.candidates, key=lambda n: _selection_key(n, pose))
            return RetrievalResult(best.position, best.id, True, level, False, tuple(trace))
    if goal.anchor_landmark is not None and goal.anchor_landmark in g.contours:
        fallback_pos = g.contours[goal.anchor_landmark].centroid()
        node_id = f"geo:{goal.anchor_landmark}"
    else:
        block = g.nodes.get("block")
        fallback_pos = block.position if block else pose.position
        node_id = "block" if block else None
    return RetrievalResult(fallback_pos, node_id, True, max_trial, True, tuple(trace))
