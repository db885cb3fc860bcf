"""Spanning trees with O(log n) path-resistance queries and total stretch.

The default construction is the maximum-total-weight spanning tree (greedy
Kruskal with union-find, ties broken by ascending (u, v) for reproducibility).
Maximizing kept weight is a cheap heuristic for keeping the stretch
sum-of-w/w_path small; an AKPW-style low-diameter-decomposition tree is
available behind the same interface.

Path resistance (sum of reciprocal weights along the unique tree path) is
answered via binary-lifting LCA plus prefix sums of reciprocal weights from
the root, so the total stretch over all m graph edges runs in O(m log n).
"""

from __future__ import annotations

import heapq

import numpy as np

from .errors import ConnectivityError, ParameterError
from .graph import WeightedGraph, connected_components


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:  # path compression
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


class SpanningTree:
    """Rooted spanning tree with LCA support and tree-edge membership.

    ``edge_indices`` point back into the source graph's canonical edge arrays;
    tree edges keep the source weights exactly.
    """

    __slots__ = (
        "graph", "n", "root", "parent", "parent_weight", "depth",
        "edge_indices", "tree_edge_set", "_up", "_res_root",
    )

    def __init__(self, graph: WeightedGraph, edge_indices):
        edge_indices = np.asarray(edge_indices, dtype=np.int64)
        n = graph.n
        if edge_indices.size != n - 1:
            raise ParameterError(
                f"spanning tree needs {n - 1} edges, got {edge_indices.size}"
            )
        self.graph = graph
        self.n = n
        self.root = 0
        self.edge_indices = edge_indices
        self.tree_edge_set = frozenset(
            (int(graph.edges_u[i]), int(graph.edges_v[i])) for i in edge_indices
        )

        # adjacency restricted to tree edges
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for i in edge_indices:
            u, v, w = int(graph.edges_u[i]), int(graph.edges_v[i]), float(graph.edges_w[i])
            adj[u].append((v, w))
            adj[v].append((u, w))

        parent = np.full(n, -1, dtype=np.int64)
        parent_weight = np.zeros(n, dtype=np.float64)
        depth = np.zeros(n, dtype=np.int64)
        res_root = np.zeros(n, dtype=np.float64)
        parent[self.root] = self.root
        stack = [self.root]
        seen = 1
        while stack:
            p = stack.pop()
            for q, w in adj[p]:
                if parent[q] != -1:
                    continue
                parent[q] = p
                parent_weight[q] = w
                depth[q] = depth[p] + 1
                res_root[q] = res_root[p] + 1.0 / w
                stack.append(q)
                seen += 1
        if seen != n:
            raise ConnectivityError("edge set does not span the graph")
        self.parent = parent
        self.parent_weight = parent_weight
        self.depth = depth
        self._res_root = res_root

        levels = max(1, int(np.ceil(np.log2(max(2, int(depth.max()) + 1)))) + 1)
        up = np.empty((levels, n), dtype=np.int64)
        up[0] = parent
        for j in range(1, levels):
            up[j] = up[j - 1][up[j - 1]]
        self._up = up

    def lca(self, p: int, q: int) -> int:
        return int(self.lca_batch(np.array([p]), np.array([q]))[0])

    def lca_batch(self, ps, qs) -> np.ndarray:
        """Vectorized lowest common ancestor for arrays of vertex pairs."""
        p = np.asarray(ps, dtype=np.int64).copy()
        q = np.asarray(qs, dtype=np.int64).copy()
        depth, up = self.depth, self._up
        swap = depth[p] < depth[q]
        p[swap], q[swap] = q[swap], p[swap]
        diff = depth[p] - depth[q]
        for j in range(up.shape[0]):
            take = (diff >> j) & 1 == 1
            if take.any():
                p[take] = up[j][p[take]]
        out = np.where(p == q, p, -1)
        todo = out < 0
        for j in range(up.shape[0] - 1, -1, -1):
            move = todo & (up[j][p] != up[j][q])
            if move.any():
                p[move] = up[j][p[move]]
                q[move] = up[j][q[move]]
        out[todo] = self.parent[p[todo]]
        return out

    def path_resistance(self, p: int, q: int) -> float:
        """Sum of 1/w along the unique tree path between p and q."""
        if p == q:
            raise ParameterError("path resistance requires distinct endpoints")
        return float(self.path_resistance_batch(np.array([p]), np.array([q]))[0])

    def path_resistance_batch(self, ps, qs) -> np.ndarray:
        ps = np.asarray(ps, dtype=np.int64)
        qs = np.asarray(qs, dtype=np.int64)
        if np.any(ps == qs):
            raise ParameterError("path resistance requires distinct endpoints")
        anc = self.lca_batch(ps, qs)
        r = self._res_root
        return r[ps] + r[qs] - 2.0 * r[anc]

    def as_graph(self) -> WeightedGraph:
        return self.graph.subgraph_from_edge_indices(self.edge_indices)

    def off_tree_edge_indices(self) -> np.ndarray:
        mask = np.ones(self.graph.m, dtype=bool)
        mask[self.edge_indices] = False
        return np.nonzero(mask)[0]


def build_spanning_tree(graph: WeightedGraph, method: str = "max-weight") -> SpanningTree:
    """Deterministic spanning tree of a connected graph.

    "max-weight" sorts edges by descending weight (ties by ascending (u, v))
    and adds greedily with union-find. "akpw-lsst" grows low-diameter clusters
    over the resistance metric (1/w) and recurses on the contracted graph.
    """
    if graph.n > 1 and int(connected_components(graph).max()) != 0:
        raise ConnectivityError("spanning tree requires a connected graph")
    if method == "max-weight":
        idx = _max_weight_tree(graph)
    elif method == "akpw-lsst":
        idx = _akpw_tree(graph)
    else:
        raise ParameterError(f"unknown tree method {method!r}")
    return SpanningTree(graph, idx)


def _max_weight_tree(graph: WeightedGraph) -> np.ndarray:
    order = np.lexsort((graph.edges_v, graph.edges_u, -graph.edges_w))
    uf = _UnionFind(graph.n)
    chosen = []
    for i in order:
        if uf.union(int(graph.edges_u[i]), int(graph.edges_v[i])):
            chosen.append(i)
            if len(chosen) == graph.n - 1:
                break
    return np.array(sorted(chosen), dtype=np.int64)


def _akpw_tree(graph: WeightedGraph) -> np.ndarray:
    """AKPW-flavored tree via deterministic low-diameter ball growing.

    Rounds grow shortest-path balls over the resistance metric (length 1/w)
    from seeds in ascending vertex-id order, adopting the Dijkstra-tree entry
    edges; the radius doubles each round until the forest spans. Heuristic
    rather than the bounded-stretch construction, kept behind the same
    interface as the default tree.
    """
    n = graph.n
    adj: list[list[tuple[float, int, int]]] = [[] for _ in range(n)]
    for i in range(graph.m):
        u, v, w = int(graph.edges_u[i]), int(graph.edges_v[i]), float(graph.edges_w[i])
        adj[u].append((1.0 / w, v, i))
        adj[v].append((1.0 / w, u, i))

    radius = 2.0 * float(np.median(1.0 / graph.edges_w))
    uf = _UnionFind(n)
    chosen: list[int] = []
    while len(chosen) < n - 1:
        visited = np.zeros(n, dtype=bool)
        for seed in range(n):
            if visited[seed]:
                continue
            visited[seed] = True
            dist = {seed: 0.0}
            heap = [(0.0, seed)]
            while heap:
                d0, p = heapq.heappop(heap)
                if d0 > dist.get(p, np.inf):
                    continue
                for length, q, ei in adj[p]:
                    nd = d0 + length
                    if nd > radius or nd >= dist.get(q, np.inf):
                        continue
                    if visited[q] and q not in dist:
                        continue  # belongs to an earlier ball this round
                    dist[q] = nd
                    if not visited[q]:
                        visited[q] = True
                        if uf.union(p, q):
                            chosen.append(ei)
                    heapq.heappush(heap, (nd, q))
        radius *= 2.0
    return np.array(sorted(chosen), dtype=np.int64)


def tree_path_resistance(tree: SpanningTree, p: int, q: int) -> float:
    return tree.path_resistance(p, q)


def total_stretch(graph: WeightedGraph, tree: SpanningTree) -> float:
    """Sum over graph edges of w_pq times the tree path resistance p..q.

    Equals trace(pinv(L_tree) @ L_graph); each tree edge contributes exactly 1.
    """
    res = tree.path_resistance_batch(graph.edges_u, graph.edges_v)
    return float(np.dot(graph.edges_w, res))
