"""Bridge trees: star and branching constructions plus an exhaustive oracle.

A bridge tree connects the data qubits of one stabilizer through ancilla
qubits that all lie inside the stabilizer's syndrome rectangle.  Data qubits
are leaves only; data qubits of other stabilizers are never traversed.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property

from .arch import DeviceGraph

MAX_CANDIDATES = 32
_PATH_CAP = 16


class TreeError(ValueError):
    """No bridge tree exists inside the region."""


class OracleScopeError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    """Closed rectangle plus the terminals that must be connected and blocked qubits."""

    bounds: tuple[int, int, int, int]
    terminals: tuple[int, ...]
    blocked: frozenset[int] = frozenset()

    def contains(self, g: DeviceGraph, q: int) -> bool:
        x, y = g.pos(q)
        x0, y0, x1, y1 = self.bounds
        return x0 <= x <= x1 and y0 <= y <= y1

    def allowed(self, g: DeviceGraph) -> list[int]:
        term = set(self.terminals)
        return sorted(
            (q for q in _qubits_in(g, self.bounds) if q not in term and q not in self.blocked),
            key=g.key,
        )


def _qubits_in(g: DeviceGraph, bounds) -> list[int]:
    x0, y0, x1, y1 = bounds
    return [q.id for q in g.qubits if x0 <= q.x <= x1 and y0 <= q.y <= y1]


@dataclass(frozen=True)
class BridgeTree:
    bridges: frozenset[int]
    edges: frozenset[tuple[int, int]]
    leaves: tuple[int, ...]
    syndrome: int

    @property
    def nodes(self) -> frozenset[int]:
        return self.bridges | frozenset(self.leaves)

    @property
    def b(self) -> int:
        return len(self.bridges)

    @property
    def w(self) -> int:
        return len(self.leaves)

    @property
    def length(self) -> int:
        return len(self.edges)

    @cached_property
    def nbrs(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {q: [] for q in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
            out[b].append(a)
        return {q: tuple(sorted(v)) for q, v in out.items()}

    def tree_degree(self, q: int) -> int:
        return len(self.nbrs[q])

    def is_tree(self) -> bool:
        if len(self.edges) != len(self.nodes) - 1:
            return False
        seen = {self.syndrome}
        todo = [self.syndrome]
        while todo:
            for b in self.nbrs[todo.pop()]:
                if b not in seen:
                    seen.add(b)
                    todo.append(b)
        return len(seen) == len(self.nodes)


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


class _Local:
    """Shortest-path machinery restricted to a region."""

    def __init__(self, g: DeviceGraph, region: Region):
        self.g = g
        self.region = region
        self.allowed = region.allowed(g)
        self.allowed_set = set(self.allowed)
        self.terms = set(region.terminals)
        self._bfs_cache: dict[int, tuple[dict, dict]] = {}

    def bfs(self, src: int):
        """Distances and predecessor lists from src; terminals are sinks."""
        if src in self._bfs_cache:
            return self._bfs_cache[src]
        dist = {src: 0}
        pred: dict[int, list[int]] = {src: []}
        todo = deque([src])
        while todo:
            u = todo.popleft()
            if u in self.terms and u != src:
                continue
            for v in self.g.adj[u]:
                if v not in self.allowed_set and v not in self.terms:
                    continue
                if u in self.terms and v in self.terms:
                    continue
                if v not in dist:
                    dist[v] = dist[u] + 1
                    pred[v] = [u]
                    todo.append(v)
                elif dist[v] == dist[u] + 1:
                    pred[v].append(u)
        self._bfs_cache[src] = (dist, pred)
        return dist, pred

    def dist(self, a: int, b: int) -> int | None:
        return self.bfs(a)[0].get(b)

    def paths(self, a: int, b: int, cap: int = _PATH_CAP) -> list[list[int]]:
        dist, pred = self.bfs(a)
        if b not in dist:
            return []
        out: list[list[int]] = []

        def walk(v, acc):
            if len(out) >= cap:
                return
            if v == a:
                out.append([a] + acc[::-1])
                return
            for p in sorted(pred[v], key=self.g.key):
                walk(p, acc + [v])

        walk(b, [])
        return out


def _prune(local: _Local, nodes: set[int], edges: set[tuple[int, int]], root: int):
    """Reduce an edge union to a tree whose leaves are exactly the terminals."""
    nb: dict[int, list[int]] = {q: [] for q in nodes}
    for a, b in edges:
        nb[a].append(b)
        nb[b].append(a)
    seen = {root}
    tree_edges = set()
    todo = deque([root])
    while todo:
        u = todo.popleft()
        if u in local.terms and u != root:
            continue
        for v in sorted(nb[u], key=local.g.key):
            if v not in seen:
                seen.add(v)
                tree_edges.add(_edge(u, v))
                todo.append(v)
    if not local.terms <= seen:
        return None
    deg = {q: 0 for q in seen}
    for a, b in tree_edges:
        deg[a] += 1
        deg[b] += 1
    changed = True
    while changed:
        changed = False
        for q in list(seen):
            if q not in local.terms and deg[q] <= 1 and len(seen) > 1:
                for e in [e for e in tree_edges if q in e]:
                    tree_edges.discard(e)
                    for v in e:
                        deg[v] -= 1
                seen.discard(q)
                changed = True
    bridges = frozenset(seen - local.terms)
    if not bridges:
        return None
    return bridges, frozenset(tree_edges)


def tree_center(g: DeviceGraph, bridges, edges) -> int:
    """Bridge qubit minimizing eccentricity inside the tree; ties by (y, x)."""
    nb: dict[int, list[int]] = {}
    for a, b in edges:
        nb.setdefault(a, []).append(b)
        nb.setdefault(b, []).append(a)
    if not nb:
        return min(bridges, key=g.key)

    def ecc(s):
        dist = {s: 0}
        todo = deque([s])
        while todo:
            u = todo.popleft()
            for v in nb[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    todo.append(v)
        return max(dist.values())

    return min(bridges, key=lambda q: (ecc(q), g.key(q)))


def _make(local: _Local, found):
    bridges, edges = found
    return BridgeTree(
        bridges=bridges,
        edges=edges,
        leaves=tuple(local.region.terminals),
        syndrome=tree_center(local.g, bridges, edges),
    )


def _keep_min(trees):
    if not trees:
        return []
    best = min(t.length for t in trees)
    uniq = {}
    for t in trees:
        if t.length == best and t.edges not in uniq:
            uniq[t.edges] = t
    return list(uniq.values())


def star_trees(region: Region, g: DeviceGraph, local: _Local | None = None) -> list[BridgeTree]:
    """Root a tree at each allowed qubit and join it to every terminal by shortest paths."""
    local = local or _Local(g, region)
    out = []
    for root in local.allowed:
        per_term = [local.paths(root, t, cap=4) for t in region.terminals]
        if any(not p for p in per_term):
            continue
        for combo in itertools.islice(itertools.product(*per_term), 64):
            nodes, edges = set(), set()
            for path in combo:
                nodes.update(path)
                edges.update(_edge(a, b) for a, b in zip(path, path[1:]))
            found = _prune(local, nodes, edges, root)
            if found:
                out.append(_make(local, found))
    return _keep_min(out)


def pairings(terms):
    a, b, c, d = terms
    return [((a, b), (c, d)), ((a, c), (b, d)), ((a, d), (b, c))]


def branching_trees(region: Region, g: DeviceGraph, local: _Local | None = None) -> list[BridgeTree]:
    """Join two shortest terminal-pair paths with a shortest connector."""
    local = local or _Local(g, region)
    terms = region.terminals
    if len(terms) == 2:
        out = []
        for path in local.paths(terms[0], terms[1]):
            if len(path) < 3:
                continue
            edges = {_edge(a, b) for a, b in zip(path, path[1:])}
            found = _prune(local, set(path), edges, path[1])
            if found:
                out.append(_make(local, found))
        return _keep_min(out)
    if len(terms) != 4:
        raise TreeError(f"unsupported terminal count {len(terms)}")
    scored = []
    for p in pairings(terms):
        la = local.dist(*p[0])
        lb = local.dist(*p[1])
        if la is None or lb is None:
            continue
        scored.append((la + lb, p))
    if not scored:
        return []
    best = min(s for s, _ in scored)
    out = []
    for s, ((a, b), (c, d)) in scored:
        if s != best:
            continue
        for p1 in local.paths(a, b, cap=8):
            for p2 in local.paths(c, d, cap=8):
                in1, in2 = p1[1:-1], p2[1:-1]
                if not in1 or not in2:
                    continue
                if set(in1) & set(in2):
                    connectors = [[]]
                else:
                    lens = {}
                    for q1 in in1:
                        dist, _ = local.bfs(q1)
                        for q2 in in2:
                            if q2 in dist:
                                lens[(q1, q2)] = dist[q2]
                    if not lens:
                        continue
                    lmin = min(lens.values())
                    connectors = []
                    for (q1, q2), l in sorted(lens.items()):
                        if l == lmin:
                            connectors += local.paths(q1, q2, cap=4)
                for conn in connectors[:16]:
                    nodes = set(p1) | set(p2) | set(conn)
                    edges = set()
                    for path in (p1, p2, conn):
                        edges.update(_edge(x, y) for x, y in zip(path, path[1:]))
                    found = _prune(local, nodes, edges, in1[0])
                    if found:
                        out.append(_make(local, found))
    return _keep_min(out)


def _order(g: DeviceGraph, t: BridgeTree):
    return (sorted(g.key(q) for q in t.bridges), sorted(t.edges))


def find_bridge_trees(region: Region, g: DeviceGraph, cap: int = MAX_CANDIDATES) -> list[BridgeTree]:
    local = _Local(g, region)
    merged = _keep_min(star_trees(region, g, local) + branching_trees(region, g, local))
    if not merged:
        raise TreeError(f"no bridge tree inside region {region.bounds} for data {region.terminals}")
    merged.sort(key=lambda t: _order(g, t))
    return merged[:cap]


def pairwise_bound(region: Region, g: DeviceGraph) -> float:
    """Half the sum of in-region shortest distances over all terminal pairs."""
    local = _Local(g, region)
    total = 0
    for a, b in itertools.combinations(region.terminals, 2):
        d = local.dist(a, b)
        if d is None:
            raise TreeError(f"terminals {a} and {b} are disconnected inside the region")
        total += d
    return total / 2


def steiner_oracle(region: Region, g: DeviceGraph, max_interior: int = 40) -> int:
    """Exact minimum tree length by enumerating connected ancilla sets by size."""
    allowed = region.allowed(g)
    if len(allowed) > max_interior:
        raise OracleScopeError(f"region has {len(allowed)} interior qubits (limit {max_interior})")
    aset = set(allowed)
    index = {q: i for i, q in enumerate(allowed)}
    w = len(region.terminals)
    touches = {q: {t for t in region.terminals if g.has_edge(q, t)} for q in allowed}
    terms = set(region.terminals)
    if any(not any(t in touches[q] for q in allowed) for t in terms):
        raise TreeError("a terminal has no allowed neighbour inside the region")

    # Enumerate each connected subset once: grow from its smallest-index vertex,
    # only adding vertices of larger index through an extension frontier.
    best = None
    for k in range(1, len(allowed) + 1):
        for v in allowed:
            if _grow(g, aset, index, touches, terms, {v}, {u for u in g.adj[v] if u in aset and index[u] > index[v]}, index[v], k):
                best = k
                break
        if best is not None:
            return best - 1 + w
    raise TreeError("terminals cannot be connected inside the region")


def _grow(g, aset, index, touches, terms, sub, ext, root_i, k):
    if len(sub) == k:
        covered = set()
        for q in sub:
            covered |= touches[q]
        return covered == terms
    ext = set(ext)
    while ext:
        w = min(ext, key=lambda q: index[q])
        ext.discard(w)
        new_ext = set(ext)
        for u in g.adj[w]:
            if u in aset and index[u] > root_i and u not in sub and u not in ext and all(
                u not in g.adj[s] for s in sub
            ):
                new_ext.add(u)
        if _grow(g, aset, index, touches, terms, sub | {w}, new_ext, root_i, k):
            return True
    return False
