"""Skeleton pixels as a weighted graph, its minimum spanning forest, and the
split of that forest into pen strokes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .morphology import PlanningError

__all__ = ["SkeletonGraph", "build_graph", "mst_refine", "tree_to_strokes"]

SQRT2 = math.sqrt(2.0)
# forward half of the 8-neighbourhood, so every edge is generated once
_FORWARD = ((0, 1, 1.0), (1, -1, SQRT2), (1, 0, 1.0), (1, 1, SQRT2))


@dataclass(frozen=True)
class SkeletonGraph:
    """Nodes are (row, col) pixels in raster order; edges are ``(i, j, w)`` with i < j."""

    nodes: tuple
    edges: tuple

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def components(self) -> list[list[int]]:
        uf = _UnionFind(len(self.nodes))
        for i, j, _ in self.edges:
            uf.union(i, j)
        groups: dict[int, list[int]] = {}
        for i in range(len(self.nodes)):
            groups.setdefault(uf.find(i), []).append(i)
        return sorted(groups.values())

    def is_forest(self) -> bool:
        uf = _UnionFind(len(self.nodes))
        for i, j, _ in self.edges:
            if not uf.union(i, j):
                return False
        return True


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def build_graph(skeleton) -> SkeletonGraph:
    px = np.asarray(skeleton, dtype=bool)
    coords = [tuple(int(v) for v in rc) for rc in np.argwhere(px)]
    index = {rc: k for k, rc in enumerate(coords)}
    edges = []
    for k, (r, c) in enumerate(coords):
        for dr, dc, w in _FORWARD:
            j = index.get((r + dr, c + dc))
            if j is not None:
                edges.append((min(k, j), max(k, j), w))
    edges.sort(key=lambda e: (e[0], e[1]))
    return SkeletonGraph(tuple(coords), tuple(edges))


def mst_refine(graph: SkeletonGraph) -> SkeletonGraph:
    """Kruskal's minimum spanning forest.

    Equal weights are taken in lexicographic order of their endpoint pixels,
    which makes the result reproducible.
    """
    if not graph.nodes:
        raise PlanningError("skeleton graph is empty")
    uf = _UnionFind(len(graph.nodes))
    kept = [e for e in sorted(graph.edges, key=lambda e: (e[2], e[0], e[1])) if uf.union(e[0], e[1])]
    kept.sort(key=lambda e: (e[0], e[1]))
    return SkeletonGraph(graph.nodes, tuple(kept))


def _farthest(adj, start, alive):
    """Weighted distances from ``start`` over a tree; returns (node, dist, parent)."""
    dist = {start: 0.0}
    parent = {start: None}
    stack = [start]
    while stack:
        u = stack.pop()
        for v, w in adj[u]:
            if (min(u, v), max(u, v)) in alive and v not in dist:
                dist[v] = dist[u] + w
                parent[v] = u
                stack.append(v)
    # longest distance; ties to the smallest node index
    best = min(dist, key=lambda n: (-round(dist[n], 9), n))
    return best, parent


def tree_to_strokes(tree: SkeletonGraph) -> list[np.ndarray]:
    """Cover every tree edge exactly once with polylines.

    Repeatedly takes the longest remaining path (by edge weight) in the
    remaining forest, then adds a one-point stroke for every isolated
    node. Returned polylines are (x, y) = (col, row) pixels.
    """
    if not tree.is_forest():
        raise PlanningError("stroke extraction needs an acyclic graph")
    adj: dict[int, list] = {i: [] for i in range(len(tree.nodes))}
    for i, j, w in tree.edges:
        adj[i].append((j, w))
        adj[j].append((i, w))
    for lst in adj.values():
        lst.sort()
    alive = {(i, j) for i, j, _ in tree.edges}
    strokes = []
    while alive:
        seed = min(min(e) for e in alive)
        a, _ = _farthest(adj, seed, alive)
        b, parent = _farthest(adj, a, alive)
        path = [b]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        path.reverse()
        for u, v in zip(path, path[1:]):
            alive.discard((min(u, v), max(u, v)))
        rc = np.array([tree.nodes[k] for k in path])
        strokes.append(rc[:, ::-1].copy())
    for k, nbrs in adj.items():
        if not nbrs:
            strokes.append(np.array([tree.nodes[k][::-1]], dtype=float))
    return strokes
