"""Hierarchical density clustering of reduced points.

Pipeline: mutual reachability distances -> exact Prim minimum spanning tree ->
single-linkage hierarchy -> condensed tree at min_cluster_size -> flat
clusters by excess-of-mass stability. Points in no selected cluster get the
noise label -1. Everything is a pure, deterministic function of its inputs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InputError
from .reduction import ReducedMatrix

NOISE = -1

# Stand-in for an infinite density level at zero distance; keeps stability
# arithmetic finite when duplicates collapse.
_LAMBDA_CAP = 1e15


@dataclass
class ClusterAssignment:
    fqcns: list[str]
    labels: list[int]
    min_cluster_size: int

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.fqcns):
            raise InputError("one label required per class")
        ids = sorted({l for l in self.labels if l != NOISE})
        if ids and ids != list(range(len(ids))):
            raise InputError(f"cluster ids not contiguous from 0: {ids}")

    def groups(self) -> dict[int, list[int]]:
        """Cluster id -> member row indices (noise excluded)."""
        out: dict[int, list[int]] = {}
        for idx, label in enumerate(self.labels):
            if label != NOISE:
                out.setdefault(label, []).append(idx)
        return out

    def sizes(self) -> dict[int, int]:
        return {cid: len(rows) for cid, rows in self.groups().items()}

    def n_noise(self) -> int:
        return sum(1 for l in self.labels if l == NOISE)

    def to_json(self) -> dict:
        return {fqcn: int(label) for fqcn, label in zip(self.fqcns, self.labels)}


@dataclass
class CondensedTree:
    """Pruned cluster hierarchy: one row per child (point or cluster) leaving
    or splitting from its parent cluster at density level ``lambda_val``."""

    parents: np.ndarray
    children: np.ndarray
    lambdas: np.ndarray
    sizes: np.ndarray
    n_points: int
    stabilities: dict[int, float] = field(default_factory=dict)

    @property
    def root(self) -> int:
        return self.n_points

    def cluster_ids(self) -> list[int]:
        return sorted({int(c) for c in self.children if c >= self.n_points} | {self.root})


def mutual_reachability(points: ReducedMatrix, min_samples: int) -> np.ndarray:
    """max(core_a, core_b, d(a, b)) for all pairs, zero diagonal.

    The core distance of x is the Euclidean distance to its min_samples-th
    nearest other point.
    """
    n = len(points.fqcns)
    if not 1 <= min_samples < n:
        raise InputError(f"min_samples={min_samples} must be in [1, {n - 1}]")
    dist = cdist(points.points, points.points)
    # Sorted rows start with the self-distance 0; dropping that one slot
    # leaves distances to the other points.
    core = np.sort(dist, axis=1)[:, min_samples]
    mreach = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mreach, 0.0)
    return mreach


def prim_mst(dist: np.ndarray) -> list[tuple[int, int, float]]:
    """Exact MST edges of a dense symmetric distance matrix.

    Ties resolve to the lowest-index vertex, so the edge list is a
    deterministic function of the matrix.
    """
    n = dist.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    in_tree[0] = True
    current = 0
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        row = dist[current]
        better = (~in_tree) & (row < best)
        best[better] = row[better]
        parent[better] = current
        candidates = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(candidates))
        edges.append((int(parent[nxt]), nxt, float(best[nxt])))
        in_tree[nxt] = True
        current = nxt
    return edges


def _single_linkage(edges: list[tuple[int, int, float]], n: int):
    """Merge MST edges in weight order into a dendrogram.

    Returns (left, right, height, size) arrays indexed by internal node id
    minus n; internal ids run n .. 2n-2.
    """
    order = sorted(range(len(edges)), key=lambda i: (edges[i][2], min(edges[i][:2]), max(edges[i][:2])))
    parent_uf = list(range(2 * n - 1))

    def find(x: int) -> int:
        root = x
        while parent_uf[root] != root:
            root = parent_uf[root]
        while parent_uf[x] != root:
            parent_uf[x], x = root, parent_uf[x]
        return root

    node_of = list(range(n)) + [-1] * (n - 1)
    size_of = [1] * n + [0] * (n - 1)
    left = np.empty(n - 1, dtype=np.int64)
    right = np.empty(n - 1, dtype=np.int64)
    height = np.empty(n - 1, dtype=np.float64)
    size = np.empty(n - 1, dtype=np.int64)
    for new, idx in enumerate(order):
        u, v, w = edges[idx]
        ru, rv = find(u), find(v)
        node_id = n + new
        left[new] = node_of[ru]
        right[new] = node_of[rv]
        height[new] = w
        size[new] = size_of[ru] + size_of[rv]
        parent_uf[ru] = node_id
        parent_uf[rv] = node_id
        node_of[node_id] = node_id
        size_of[node_id] = size[new]
    return left, right, height, size


def _subtree_points(node: int, left, right, n: int) -> list[int]:
    out: list[int] = []
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur < n:
            out.append(cur)
        else:
            stack.append(int(left[cur - n]))
            stack.append(int(right[cur - n]))
    return out


def condense_tree(left, right, height, size, n: int, min_cluster_size: int) -> CondensedTree:
    """Prune the dendrogram: splits where both sides reach min_cluster_size
    start new clusters; smaller sides fall out as points at that level."""
    root = 2 * n - 2
    relabel = {root: n}
    next_label = n + 1
    parents: list[int] = []
    children: list[int] = []
    lambdas: list[float] = []
    sizes: list[int] = []

    def emit(parent: int, child: int, lam: float, child_size: int) -> None:
        parents.append(parent)
        children.append(child)
        lambdas.append(lam)
        sizes.append(child_size)

    queue: deque[int] = deque([root])
    while queue:
        node = queue.popleft()
        cluster = relabel[node]
        l, r = int(left[node - n]), int(right[node - n])
        d = float(height[node - n])
        lam = 1.0 / d if d > 0 else _LAMBDA_CAP
        l_size = 1 if l < n else int(size[l - n])
        r_size = 1 if r < n else int(size[r - n])

        if l_size >= min_cluster_size and r_size >= min_cluster_size:
            for child, child_size in ((l, l_size), (r, r_size)):
                relabel[child] = next_label
                emit(cluster, next_label, lam, child_size)
                next_label += 1
                if child >= n:
                    queue.append(child)
                else:
                    # min_cluster_size of 1 makes single points clusters; the
                    # point immediately becomes that cluster's sole member.
                    emit(relabel[child], child, lam, 1)
        elif l_size < min_cluster_size and r_size < min_cluster_size:
            for child in (l, r):
                for point in _subtree_points(child, left, right, n):
                    emit(cluster, point, lam, 1)
        else:
            survivor, runt = (l, r) if l_size >= min_cluster_size else (r, l)
            relabel[survivor] = cluster
            for point in _subtree_points(runt, left, right, n):
                emit(cluster, point, lam, 1)
            if survivor >= n:
                queue.append(survivor)
            else:
                emit(cluster, survivor, lam, 1)

    tree = CondensedTree(
        parents=np.array(parents, dtype=np.int64),
        children=np.array(children, dtype=np.int64),
        lambdas=np.array(lambdas, dtype=np.float64),
        sizes=np.array(sizes, dtype=np.int64),
        n_points=n,
    )
    tree.stabilities = _compute_stabilities(tree)
    return tree


def _compute_stabilities(tree: CondensedTree) -> dict[int, float]:
    births: dict[int, float] = {tree.root: float(tree.lambdas.min(initial=0.0))}
    for child, lam in zip(tree.children, tree.lambdas):
        if child >= tree.n_points:
            births[int(child)] = float(lam)
    stabilities = {cid: 0.0 for cid in births}
    for parent, lam, child_size in zip(tree.parents, tree.lambdas, tree.sizes):
        stabilities[int(parent)] += (float(lam) - births[int(parent)]) * int(child_size)
    return stabilities


def _select_excess_of_mass(tree: CondensedTree) -> set[int]:
    """Stability-maximizing antichain of condensed clusters, root excluded."""
    cluster_children: dict[int, list[int]] = {cid: [] for cid in tree.stabilities}
    for parent, child in zip(tree.parents, tree.children):
        if child >= tree.n_points:
            cluster_children[int(parent)].append(int(child))

    selected = {cid for cid in tree.stabilities if cid != tree.root}
    subtree_stability = dict(tree.stabilities)
    for cid in sorted(tree.stabilities, reverse=True):
        if cid == tree.root:
            continue
        child_sum = sum(subtree_stability[ch] for ch in cluster_children[cid])
        if cluster_children[cid] and child_sum > tree.stabilities[cid]:
            selected.discard(cid)
            subtree_stability[cid] = child_sum
        else:
            stack = list(cluster_children[cid])
            while stack:
                down = stack.pop()
                selected.discard(down)
                stack.extend(cluster_children[down])
    return selected


def _labels_from_selection(tree: CondensedTree, selected: set[int], n: int) -> list[int]:
    label_of = {cid: i for i, cid in enumerate(sorted(selected))}
    parent_cluster: dict[int, int] = {}
    for parent, child in zip(tree.parents, tree.children):
        if child >= n:
            parent_cluster[int(child)] = int(parent)

    resolve_cache: dict[int, int | None] = {cid: cid for cid in selected}
    resolve_cache.setdefault(tree.root, None)

    def resolve(cid: int) -> int | None:
        path = []
        cur = cid
        while cur not in resolve_cache:
            path.append(cur)
            cur = parent_cluster[cur]
        result = resolve_cache[cur]
        for node in path:
            resolve_cache[node] = result
        return result

    labels = [NOISE] * n
    for parent, child in zip(tree.parents, tree.children):
        if child < n:
            owner = resolve(int(parent))
            if owner is not None:
                labels[int(child)] = label_of[owner]
    return labels


def cluster(points: ReducedMatrix, min_cluster_size: int = 2, min_samples: int | None = None) -> ClusterAssignment:
    """Flat density clusters over reduced points; unclustered points get -1.

    When the condensed hierarchy holds no real split (a lone dense group),
    the root acts as the single cluster, minus whatever departed at the very
    first density level.
    """
    n = len(points.fqcns)
    if n < 2:
        raise InputError("clustering needs at least 2 points")
    if min_cluster_size < 1:
        raise InputError("min_cluster_size must be positive")
    if min_samples is None:
        min_samples = min_cluster_size
    min_samples = min(min_samples, n - 1)

    mreach = mutual_reachability(points, min_samples)
    if mreach.max() == 0.0:
        return ClusterAssignment(fqcns=list(points.fqcns), labels=[0] * n, min_cluster_size=min_cluster_size)

    edges = prim_mst(mreach)
    left, right, height, size = _single_linkage(edges, n)
    tree = condense_tree(left, right, height, size, n, min_cluster_size)
    selected = _select_excess_of_mass(tree)

    if selected:
        labels = _labels_from_selection(tree, selected, n)
    else:
        # Root-only hierarchy: treat the root as one cluster, excluding the
        # departures at its birth level (the loosest points).
        birth = float(tree.lambdas.min())
        members = [int(c) for c, lam in zip(tree.children, tree.lambdas) if c < n and lam > birth]
        labels = [NOISE] * n
        if len(members) >= min_cluster_size:
            for point in members:
                labels[point] = 0
    return ClusterAssignment(fqcns=list(points.fqcns), labels=labels, min_cluster_size=min_cluster_size)
