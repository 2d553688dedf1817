"""Fill-reducing symmetric orderings.

Nested dissection follows the usual multilevel scheme: heavy-edge coarsening
down to about 100 vertices, greedy graph-growing bisection of the coarsest
graph, Fiduccia-Mattheyses refinement while projecting back, and a greedy
vertex cover of the final edge separator.  Parts at or below ``leaf_size``
vertices are ordered by minimum degree.  Everything is deterministic: ties
go to the lowest vertex index.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import SparsityPattern, identity_permutation

COARSEST_SIZE = 100
MIN_SHRINK = 0.10
IMBALANCE_TOL = 0.10
FM_PASSES = 10
N_SEEDS = 4
DEFAULT_LEAF_SIZE = 64


@dataclass
class Graph:
    """Undirected weighted graph in adjacency-array form (no self loops)."""

    xadj: np.ndarray
    adjncy: np.ndarray
    adjwgt: np.ndarray
    vwgt: np.ndarray

    @property
    def nvtxs(self) -> int:
        return self.vwgt.size

    def neighbors(self, v: int):
        lo, hi = self.xadj[v], self.xadj[v + 1]
        return self.adjncy[lo:hi], self.adjwgt[lo:hi]

    def total_weight(self) -> int:
        return int(self.vwgt.sum())

    @classmethod
    def from_edges(cls, n: int, edges, weights=None, vwgt=None) -> "Graph":
        """Build from undirected edge pairs; repeated edges add up their weight."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        w = np.ones(len(edges), dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
        keep = edges[:, 0] != edges[:, 1]
        edges, w = edges[keep], w[keep]
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        ww = np.concatenate([w, w])
        return cls._from_arcs(n, src, dst, ww, vwgt)

    @classmethod
    def _from_arcs(cls, n, src, dst, w, vwgt=None) -> "Graph":
        key = src * max(n, 1) + dst
        uniq, inv = np.unique(key, return_inverse=True)
        wsum = np.zeros(uniq.size, dtype=np.int64)
        np.add.at(wsum, inv, w)
        s, d = uniq // max(n, 1), uniq % max(n, 1)
        xadj = np.zeros(n + 1, dtype=np.int64)
        np.add.at(xadj, s + 1, 1)
        vw = np.ones(n, dtype=np.int64) if vwgt is None else np.asarray(vwgt, dtype=np.int64)
        return cls(np.cumsum(xadj), d, wsum, vw)

    @classmethod
    def from_pattern(cls, p: SparsityPattern) -> "Graph":
        cols = np.repeat(np.arange(p.n, dtype=np.int64), np.diff(p.col_ptr))
        rows = p.row_idx
        off = rows != cols
        src = np.concatenate([rows[off], cols[off]])
        dst = np.concatenate([cols[off], rows[off]])
        # symmetric pattern gives each arc twice; weights collapse to 1 below
        g = cls._from_arcs(p.n, src, dst, np.ones(src.size, dtype=np.int64))
        g.adjwgt = np.ones_like(g.adjwgt)
        return g

    def subgraph(self, vertices) -> tuple["Graph", np.ndarray]:
        """Induced subgraph; returns it with the local-to-global vertex map."""
        vertices = np.asarray(vertices, dtype=np.int64)
        local = np.full(self.nvtxs, -1, dtype=np.int64)
        local[vertices] = np.arange(vertices.size)
        src_g = np.repeat(np.arange(self.nvtxs), np.diff(self.xadj))
        keep = (local[src_g] >= 0) & (local[self.adjncy] >= 0)
        src = local[src_g[keep]]
        dst = local[self.adjncy[keep]]
        g = Graph._from_arcs(vertices.size, src, dst, self.adjwgt[keep], self.vwgt[vertices])
        return g, vertices


@dataclass
class CoarseGraph:
    graph: Graph
    cmap: np.ndarray  # fine vertex -> coarse vertex


@dataclass(frozen=True)
class TreeNode:
    """One node of the separator tree.

    The node owns positions ``[start, stop)`` of the new ordering; its own
    separator occupies ``[sep_start, stop)`` (empty for leaves) and the
    children cover ``[start, sep_start)`` in order.
    """

    start: int
    stop: int
    sep_start: int
    children: tuple[int, ...] = ()
    kind: str = "leaf"

    @property
    def is_leaf(self) -> bool:
        return self.kind == "leaf"


@dataclass(frozen=True)
class OrderingResult:
    perm: np.ndarray
    tree: list[TreeNode] = field(default_factory=list)
    root: int | None = None

    @classmethod
    def trivial(cls, n: int) -> "OrderingResult":
        return cls(identity_permutation(n), [TreeNode(0, n, n)], 0)


def edge_cut(g: Graph, part) -> int:
    part = np.asarray(part)
    src = np.repeat(np.arange(g.nvtxs), np.diff(g.xadj))
    return int(g.adjwgt[part[src] != part[g.adjncy]].sum() // 2)


def part_weights(g: Graph, part) -> np.ndarray:
    return np.bincount(np.asarray(part), weights=g.vwgt, minlength=2).astype(np.int64)


def _max_part_weight(total: int, tol: float) -> float:
    return (1.0 + tol) * total / 2.0


# -- coarsening -------------------------------------------------------------

def coarsen(g: Graph) -> CoarseGraph:
    """One level of heavy-edge matching.

    Vertices are visited in index order; an unmatched vertex is merged with
    the unmatched neighbour joined by the heaviest edge.
    """
    n = g.nvtxs
    match = np.full(n, -1, dtype=np.int64)
    xadj, adjncy, adjwgt = g.xadj, g.adjncy, g.adjwgt
    for v in range(n):
        if match[v] >= 0:
            continue
        best, best_w = -1, -1
        for k in range(xadj[v], xadj[v + 1]):
            u = adjncy[k]
            if match[u] < 0 and u != v and adjwgt[k] > best_w:
                best, best_w = u, adjwgt[k]
        if best >= 0:
            match[v] = best
            match[best] = v
        else:
            match[v] = v
    cmap = np.full(n, -1, dtype=np.int64)
    nc = 0
    for v in range(n):
        if cmap[v] < 0:
            cmap[v] = nc
            cmap[match[v]] = nc
            nc += 1
    vwgt = np.zeros(nc, dtype=np.int64)
    np.add.at(vwgt, cmap, g.vwgt)
    src = cmap[np.repeat(np.arange(n), np.diff(xadj))]
    dst = cmap[adjncy]
    keep = src != dst
    coarse = Graph._from_arcs(nc, src[keep], dst[keep], adjwgt[keep], vwgt)
    return CoarseGraph(coarse, cmap)


# -- initial bisection ------------------------------------------------------

def _bfs_levels(g: Graph, start: int, allowed=None):
    dist = np.full(g.nvtxs, -1, dtype=np.int64)
    dist[start] = 0
    q = deque([start])
    last = start
    while q:
        v = q.popleft()
        last = v
        for u in g.adjncy[g.xadj[v]:g.xadj[v + 1]]:
            if dist[u] < 0 and (allowed is None or allowed[u]):
                dist[u] = dist[v] + 1
                q.append(int(u))
    return dist, last


def pseudo_peripheral_vertex(g: Graph, start: int = 0) -> int:
    v = start
    dist, _ = _bfs_levels(g, v)
    ecc = dist.max()
    while True:
        far = int(np.flatnonzero(dist == dist.max())[0])
        dist2, _ = _bfs_levels(g, far)
        if dist2.max() <= ecc:
            return v if dist2.max() < ecc else far
        v, dist, ecc = far, dist2, dist2.max()


def _grow(g: Graph, seed: int, tol: float) -> np.ndarray:
    """Greedy graph growing: part 0 grows from ``seed`` by best cut gain."""
    n = g.nvtxs
    part = np.ones(n, dtype=np.int64)
    total = g.total_weight()
    target = total / 2.0
    limit = _max_part_weight(total, tol)
    w0 = 0
    # gain of moving v into part 0 = (edges to part 0) - (edges to part 1)
    gain = np.zeros(n, dtype=np.int64)
    for v in range(n):
        gain[v] = -int(g.adjwgt[g.xadj[v]:g.xadj[v + 1]].sum())
    frontier: set[int] = set()
    candidate = seed
    while w0 < target:
        if candidate < 0:
            if frontier:
                fr = sorted(frontier, key=lambda x: (-gain[x], x))
                candidate = next((x for x in fr if w0 + g.vwgt[x] <= limit), -1)
            if candidate < 0:
                # disconnected or blocked: take the next unassigned vertex
                rest = [x for x in range(n) if part[x] == 1 and w0 + g.vwgt[x] <= limit]
                if not rest:
                    break
                candidate = rest[0]
        v = candidate
        candidate = -1
        part[v] = 0
        w0 += g.vwgt[v]
        frontier.discard(v)
        for k in range(g.xadj[v], g.xadj[v + 1]):
            u = g.adjncy[k]
            gain[u] += 2 * g.adjwgt[k]
            if part[u] == 1:
                frontier.add(int(u))
    return part


def bisect_coarsest(g: Graph, tol: float = IMBALANCE_TOL, n_seeds: int = N_SEEDS) -> np.ndarray:
    """Balanced 2-way partition of a small graph.

    Best (lowest cut, then best balance) of ``n_seeds`` greedy growths, each
    started at a pseudo-peripheral vertex and refined by FM.
    """
    n = g.nvtxs
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    starts = sorted({(k * n) // n_seeds for k in range(n_seeds)})
    seeds: list[int] = []
    for s in starts:
        p = pseudo_peripheral_vertex(g, s)
        if p not in seeds:
            seeds.append(p)
    best = None
    best_key = None
    for seed in seeds:
        part = refine(g, _grow(g, seed, tol), tol)
        w = part_weights(g, part)
        key = (edge_cut(g, part), abs(int(w[0]) - int(w[1])))
        if best_key is None or key < best_key:
            best, best_key = part, key
    return best


# -- Fiduccia-Mattheyses refinement -----------------------------------------

def _violation(w, limit):
    return max(0.0, float(max(w[0], w[1])) - limit)


def refine(g: Graph, part, tol: float = IMBALANCE_TOL, passes: int = FM_PASSES) -> np.ndarray:
    """FM refinement of a 2-way partition.

    Each pass moves every vertex at most once, always taking the highest-gain
    move that keeps the heavier side within ``(1 + tol) * total / 2`` plus
    one vertex weight of slack (or moves weight off an overweight side), then
    rolls back to the best prefix.  Prefixes are ranked by balance violation
    first and cut second, so the slack only lets a pass walk through
    temporarily unbalanced states; the returned cut never exceeds the input
    cut when the input is balanced.
    """
    part = np.array(part, dtype=np.int64, copy=True)
    n = g.nvtxs
    if n < 2:
        return part
    total = g.total_weight()
    limit = _max_part_weight(total, tol)
    xadj, adjncy, adjwgt, vwgt = g.xadj, g.adjncy, g.adjwgt, g.vwgt
    move_limit = limit + int(vwgt.max())

    for _ in range(passes):
        w = part_weights(g, part).astype(float)
        cut = edge_cut(g, part)
        # gain = external - internal edge weight
        gain = np.zeros(n, dtype=np.int64)
        for v in range(n):
            nb = adjncy[xadj[v]:xadj[v + 1]]
            ew = adjwgt[xadj[v]:xadj[v + 1]]
            same = part[nb] == part[v]
            gain[v] = int(ew[~same].sum() - ew[same].sum())
        heaps: list[list[tuple[int, int]]] = [[], []]
        for v in range(n):
            heapq.heappush(heaps[part[v]], (-int(gain[v]), v))
        locked = np.zeros(n, dtype=bool)

        start_key = (_violation(w, limit), cut)
        best_key, best_len = start_key, 0
        moves: list[int] = []
        cur = cut
        stall = 0
        max_stall = max(25, n // 4)
        while True:
            choice = -1
            choice_gain = None
            for side in (0, 1):
                h = heaps[side]
                while h and (locked[h[0][1]] or -h[0][0] != gain[h[0][1]] or part[h[0][1]] != side):
                    heapq.heappop(h)
                if not h:
                    continue
                # best movable vertex on this side under the balance rule
                popped = []
                cand = -1
                while h:
                    gneg, v = heapq.heappop(h)
                    if locked[v] or -gneg != gain[v] or part[v] != side:
                        continue
                    popped.append((gneg, v))
                    nw_to = w[1 - side] + vwgt[v]
                    if nw_to <= move_limit or w[side] > limit and nw_to < w[side]:
                        cand = v
                        break
                for item in popped:
                    heapq.heappush(h, item)
                if cand < 0:
                    continue
                key = (-int(gain[cand]), cand)
                if choice < 0 or key < (-int(choice_gain), choice):
                    choice, choice_gain = cand, gain[cand]
            if choice < 0:
                break
            v = choice
            side = part[v]
            part[v] = 1 - side
            locked[v] = True
            w[side] -= vwgt[v]
            w[1 - side] += vwgt[v]
            cur -= int(gain[v])
            moves.append(v)
            for k in range(xadj[v], xadj[v + 1]):
                u = adjncy[k]
                if locked[u]:
                    continue
                # v moved away from u's side or onto it
                delta = 2 * adjwgt[k] if part[u] == side else -2 * adjwgt[k]
                gain[u] += delta
                heapq.heappush(heaps[part[u]], (-int(gain[u]), int(u)))
            key = (_violation(w, limit), cur)
            if key < best_key:
                best_key, best_len = key, len(moves)
                stall = 0
            else:
                stall += 1
                if stall > max_stall:
                    break
        for v in moves[best_len:][::-1]:
            part[v] = 1 - part[v]
        if best_key >= start_key:
            break
    return part


# -- vertex separator -------------------------------------------------------

def vertex_separator_from_edge_separator(g: Graph, part):
    """Greedy vertex cover of the cut edges.

    Returns ``(v1, v2, vs)`` as sorted index arrays.  Vertices covering the
    most uncovered cut edges go first (ties: lighter side, then lower index);
    afterwards any separator vertex whose cut edges are all covered by other
    separator vertices is dropped.
    """
    part = np.asarray(part, dtype=np.int64)
    n = g.nvtxs
    w = part_weights(g, part)
    cut_nbrs: dict[int, set[int]] = {}
    for v in range(n):
        nb = g.adjncy[g.xadj[v]:g.xadj[v + 1]]
        ext = nb[part[nb] != part[v]]
        if ext.size:
            cut_nbrs[v] = set(int(x) for x in ext)
    in_sep = np.zeros(n, dtype=bool)
    remaining = {v: len(s) for v, s in cut_nbrs.items()}
    heap = [(-c, int(w[part[v]]), v) for v, c in remaining.items()]
    heapq.heapify(heap)
    while heap:
        negc, _, v = heapq.heappop(heap)
        if in_sep[v] or remaining[v] != -negc:
            if not in_sep[v] and remaining[v] > 0:
                heapq.heappush(heap, (-remaining[v], int(w[part[v]]), v))
            continue
        if remaining[v] == 0:
            continue
        in_sep[v] = True
        for u in cut_nbrs[v]:
            if not in_sep[u]:
                remaining[u] -= 1
                heapq.heappush(heap, (-remaining[u], int(w[part[u]]), u))
        remaining[v] = 0
    changed = True
    while changed:
        changed = False
        for v in np.flatnonzero(in_sep):
            if all(in_sep[u] for u in cut_nbrs[int(v)]):
                in_sep[v] = False
                changed = True
    v1 = np.flatnonzero((part == 0) & ~in_sep)
    v2 = np.flatnonzero((part == 1) & ~in_sep)
    vs = np.flatnonzero(in_sep)
    return v1, v2, vs


# -- multilevel bisection ---------------------------------------------------

def multilevel_bisection(g: Graph, tol: float = IMBALANCE_TOL,
                         coarsest_size: int = COARSEST_SIZE) -> np.ndarray:
    levels: list[CoarseGraph] = []
    cur = g
    while cur.nvtxs > coarsest_size:
        cg = coarsen(cur)
        if cg.graph.nvtxs > (1.0 - MIN_SHRINK) * cur.nvtxs:
            break
        levels.append(cg)
        cur = cg.graph
    part = bisect_coarsest(cur, tol)
    for depth in range(len(levels) - 1, -1, -1):
        cmap = levels[depth].cmap
        part = part[cmap]
        fine = levels[depth - 1].graph if depth > 0 else g
        part = refine(fine, part, tol)
    return part


# -- orderings --------------------------------------------------------------

def minimum_degree(p: SparsityPattern | Graph) -> np.ndarray:
    """Minimum degree ordering with explicit clique fill.

    At every step the vertex of smallest current degree (lowest index on
    ties) is eliminated and its neighbours are joined pairwise.
    """
    if isinstance(p, Graph):
        g = p
    else:
        g = Graph.from_pattern(p)
    n = g.nvtxs
    adj = [set(int(u) for u in g.adjncy[g.xadj[v]:g.xadj[v + 1]]) for v in range(n)]
    heap = [(len(adj[v]), v) for v in range(n)]
    heapq.heapify(heap)
    eliminated = np.zeros(n, dtype=bool)
    order = np.empty(n, dtype=np.int64)
    k = 0
    while heap:
        d, v = heapq.heappop(heap)
        if eliminated[v] or d != len(adj[v]):
            continue
        eliminated[v] = True
        order[k] = v
        k += 1
        nbrs = adj[v]
        for u in nbrs:
            adj[u].discard(v)
        for u in nbrs:
            adj[u] |= nbrs
            adj[u].discard(u)
        for u in nbrs:
            heapq.heappush(heap, (len(adj[u]), u))
        adj[v] = set()
    return order


def nested_dissection(p: SparsityPattern, leaf_size: int = DEFAULT_LEAF_SIZE,
                      tol: float = IMBALANCE_TOL) -> OrderingResult:
    """Recursive multilevel nested dissection.

    Within each node ``V1`` is numbered first, then ``V2``, then the
    separator ``Vs``.  Parts with at most ``leaf_size`` vertices (or that
    cannot be split) are leaves ordered by minimum degree of their induced
    subgraph.
    """
    if leaf_size < 1:
        raise ValueError("leaf_size must be positive")
    g = Graph.from_pattern(p)
    n = g.nvtxs
    perm = np.empty(n, dtype=np.int64)
    tree: list[TreeNode] = []

    def leaf(vertices, start):
        sub, glob = g.subgraph(vertices)
        perm[start:start + len(vertices)] = glob[minimum_degree(sub)]
        tree.append(TreeNode(start, start + len(vertices), start + len(vertices)))
        return len(tree) - 1

    def build(vertices, start) -> int:
        if len(vertices) <= leaf_size:
            return leaf(vertices, start)
        sub, glob = g.subgraph(vertices)
        part = multilevel_bisection(sub, tol)
        v1, v2, vs = vertex_separator_from_edge_separator(sub, part)
        if v1.size == 0 or v2.size == 0:
            return leaf(vertices, start)
        children = []
        pos = start
        for side in (v1, v2):
            children.append(build(glob[side], pos))
            pos += side.size
        perm[pos:pos + vs.size] = glob[vs]
        stop = pos + vs.size
        tree.append(TreeNode(start, stop, pos, tuple(children), "separator"))
        return len(tree) - 1

    root = build(np.arange(n, dtype=np.int64), 0) if n else None
    perm.setflags(write=False)
    return OrderingResult(perm, tree, root)


def order(p: SparsityPattern, method: str = "nd", leaf_size: int = DEFAULT_LEAF_SIZE) -> OrderingResult:
    if method == "nd":
        return nested_dissection(p, leaf_size)
    if method == "md":
        perm = minimum_degree(p)
        perm.setflags(write=False)
        return OrderingResult(perm, [TreeNode(0, p.n, p.n)], 0)
    if method == "natural":
        return OrderingResult.trivial(p.n)
    raise ValueError(f"unknown ordering '{method}'")
