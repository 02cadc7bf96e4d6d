"""A small in-memory R-tree for rectangle range queries over scene nodes."""

from __future__ import annotations

from .geometry import Rect

MAX_ENTRIES = 8
MIN_ENTRIES = 3


def _mbr(rects) -> Rect:
    return Rect(
        min(r.x_min for r in rects),
        min(r.y_min for r in rects),
        max(r.x_max for r in rects),
        max(r.y_max for r in rects),
    )


def _enlargement(mbr: Rect, rect: Rect) -> float:
    merged = _mbr((mbr, rect))
    return merged.width * merged.height - mbr.width * mbr.height


class _Node:
    __slots__ = ("leaf", "entries", "mbr")

    def __init__(self, leaf: bool):
        self.leaf = leaf
        self.entries = []  # leaf: (rect, key); internal: (rect, child)
        self.mbr = None

    def recompute_mbr(self):
        self.mbr = _mbr([e[0] for e in self.entries]) if self.entries else None


class RTree:
    """R-tree with quadratic split; deletion tolerates underfull nodes."""

    def __init__(self):
        self._root = _Node(leaf=True)
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def insert(self, key, rect: Rect) -> None:
        split = self._insert(self._root, key, rect)
        if split is not None:
            old_root = self._root
            self._root = _Node(leaf=False)
            self._root.entries = [(old_root.mbr, old_root), (split.mbr, split)]
            self._root.recompute_mbr()
        self._size += 1

    def _insert(self, node: _Node, key, rect: Rect):
        if node.leaf:
            node.entries.append((rect, key))
        else:
            best_i = min(
                range(len(node.entries)),
                key=lambda i: (_enlargement(node.entries[i][0], rect),
                               node.entries[i][0].width * node.entries[i][0].height),
            )
            child = node.entries[best_i][1]
            split = self._insert(child, key, rect)
            node.entries[best_i] = (child.mbr, child)
            if split is not None:
                node.entries.append((split.mbr, split))
        node.recompute_mbr()
        if len(node.entries) > MAX_ENTRIES:
            return self._split(node)
        return None

    def _split(self, node: _Node):
        entries = node.entries
        # quadratic seed pick: the pair wasting the most area together
        worst, seeds = -1.0, (0, 1)
        for i in range(len(entries)):
            for j in range(i + 1, len(entries)):
                merged = _mbr((entries[i][0], entries[j][0]))
                waste = (merged.width * merged.height
                         - entries[i][0].width * entries[i][0].height
                         - entries[j][0].width * entries[j][0].height)
                if waste > worst:
                    worst, seeds = waste, (i, j)
        a, b = seeds
        group_a = [entries[a]]
        group_b = [entries[b]]
        rest = [e for k, e in enumerate(entries) if k not in (a, b)]
        for k, e in enumerate(rest):
            remaining = len(rest) - k
            if len(group_a) + remaining <= MIN_ENTRIES:
                group_a.append(e)
                continue
            if len(group_b) + remaining <= MIN_ENTRIES:
                group_b.append(e)
                continue
            mbr_a, mbr_b = _mbr([x[0] for x in group_a]), _mbr([x[0] for x in group_b])
            if _enlargement(mbr_a, e[0]) <= _enlargement(mbr_b, e[0]):
                group_a.append(e)
            else:
                group_b.append(e)
        node.entries = group_a
        node.recompute_mbr()
        sibling = _Node(leaf=node.leaf)
        sibling.entries = group_b
        sibling.recompute_mbr()
        return sibling

    def delete(self, key, rect: Rect) -> bool:
        removed = self._delete(self._root, key, rect)
        if removed:
            self._size -= 1
            if not self._root.leaf and len(self._root.entries) == 1:
                self._root = self._root.entries[0][1]
        return removed

    def _delete(self, node: _Node, key, rect: Rect) -> bool:
        if node.leaf:
            for i, (r, k) in enumerate(node.entries):
                if k == key:
                    del node.entries[i]
                    node.recompute_mbr()
                    return True
            return False
        for i, (r, child) in enumerate(node.entries):
            if r.intersects(rect) and self._delete(child, key, rect):
                if child.entries:
                    node.entries[i] = (child.mbr, child)
                else:
                    del node.entries[i]
                node.recompute_mbr()
                return True
        return False

    def search(self, region: Rect) -> list:
        """Keys whose rectangles intersect ``region``."""
        out = []
        stack = [self._root]
        while stack:
            node = stack.pop()
            if node.mbr is None or not node.mbr.intersects(region):
                continue
            if node.leaf:
                out.extend(k for r, k in node.entries if r.intersects(region))
            else:
                stack.extend(child for _, child in node.entries)
        return out
