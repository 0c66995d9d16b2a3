"""Data-qubit allocation for a rotated surface code on a device graph.

High-degree qubits and their neighbourhoods give bridge rectangles.  The data
qubits around one rectangle fix a plaquette shape; its two edge vectors span a
data lattice that is replicated over the d x d code and checked stabilizer by
stabilizer for bridge trees.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

from . import arch as archmod
from .arch import DeviceGraph
from .bridge import BridgeTree, Region, TreeError, find_bridge_trees

MODES = ("pair3", "center4")


class InfeasibleError(RuntimeError):
    """The patch cannot host the requested code."""


@dataclass(frozen=True)
class BridgeRectangle:
    anchors: tuple[int, ...]
    bounds: tuple[int, int, int, int]
    contained: frozenset[int]


@dataclass
class SyndromeRectangle:
    stab_id: int
    stab_type: str
    logical_pos: tuple[int, int]
    roles: dict[str, int]
    bounds: tuple[int, int, int, int]
    base: BridgeRectangle | None = None
    candidates: list[BridgeTree] = field(default_factory=list)
    order: tuple[int, ...] = ()

    @property
    def data(self) -> tuple[int, ...]:
        """Data qubits in coupling order (role order when no order is set)."""
        return self.order or tuple(self.roles[r] for r in "abcd" if r in self.roles)

    @property
    def weight(self) -> int:
        return len(self.roles)

    def region(self, blocked=frozenset()) -> Region:
        return Region(self.bounds, self.data, frozenset(blocked) - set(self.data))


@dataclass
class DataLayout:
    distance: int
    mode: str
    basis: tuple[tuple[int, int], tuple[int, int]]
    origin: tuple[int, int]
    data_map: dict[tuple[int, int], int]
    rects: list[SyndromeRectangle]

    @property
    def data_qubits(self) -> frozenset[int]:
        return frozenset(self.data_map.values())

    def to_dict(self, g: DeviceGraph) -> dict:
        return {
            "distance": self.distance,
            "mode": self.mode,
            "basis": [list(v) for v in self.basis],
            "origin": list(self.origin),
            "data_map": [
                {"row": r, "col": c, "qubit": q, "x": g.pos(q)[0], "y": g.pos(q)[1]}
                for (r, c), q in sorted(self.data_map.items())
            ],
            "stabilizers": [
                {
                    "id": s.stab_id,
                    "type": s.stab_type,
                    "logical_pos": list(s.logical_pos),
                    "bounds": list(s.bounds),
                    "roles": {k: s.roles[k] for k in sorted(s.roles)},
                    "trees": [
                        {"syndrome": t.syndrome, "bridges": sorted(t.bridges), "edges": [list(e) for e in sorted(t.edges)]}
                        for t in s.candidates
                    ],
                }
                for s in self.rects
            ],
        }


def high_degree_nodes(g: DeviceGraph) -> list[int]:
    return sorted((q for q in range(g.n) if g.degree(q) >= 3), key=g.key)


def _bfs_dist(g: DeviceGraph, src: int) -> dict[int, int]:
    dist = {src: 0}
    todo = deque([src])
    while todo:
        u = todo.popleft()
        for v in g.adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                todo.append(v)
    return dist


def rectangle_for(g: DeviceGraph, anchors) -> BridgeRectangle:
    pts = set(anchors)
    for a in anchors:
        pts.update(g.adj[a])
    xs = [g.pos(q)[0] for q in pts]
    ys = [g.pos(q)[1] for q in pts]
    bounds = (min(xs), min(ys), max(xs), max(ys))
    inside = frozenset(q.id for q in g.qubits if bounds[0] <= q.x <= bounds[2] and bounds[1] <= q.y <= bounds[3])
    return BridgeRectangle(tuple(sorted(anchors, key=g.key)), bounds, inside)


def build_bridge_rectangles(g: DeviceGraph, mode: str = "pair3") -> list[BridgeRectangle]:
    """Rectangles around single degree-4 anchors and nearest high-degree pairs.

    In pair mode every high-degree qubit is paired with its nearest
    high-degree neighbour (graph distance, ties by (y, x)), so lattices whose
    qubits all have degree four still produce pairs.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    hd = high_degree_nodes(g)
    if not hd:
        raise InfeasibleError("infeasible architecture: no qubit has degree >= 3")
    hd_set = set(hd)
    out: dict[tuple, BridgeRectangle] = {}
    for q in hd:
        if g.degree(q) >= 4:
            r = rectangle_for(g, [q])
            out.setdefault((r.bounds, r.anchors), r)
        if mode == "pair3":
            dist = _bfs_dist(g, q)
            others = [p for p in hd_set if p != q and p in dist]
            if not others:
                continue
            mate = min(others, key=lambda p: (dist[p], g.key(p)))
            r = rectangle_for(g, [q, mate])
            out.setdefault((r.bounds, r.anchors), r)
    if mode == "center4" and not out:
        raise InfeasibleError("infeasible architecture: center4 mode needs degree-4 qubits")
    seen, rects = set(), []
    for key in sorted(out, key=lambda k: (k[0][1], k[0][0], k[0][3], k[0][2], k[1])):
        r = out[key]
        if r.bounds in seen:
            continue
        seen.add(r.bounds)
        rects.append(r)
    return rects


def overlap_area(b1, b2) -> int:
    w = min(b1[2], b2[2]) - max(b1[0], b2[0])
    h = min(b1[3], b2[3]) - max(b1[1], b2[1])
    return max(0, w) * max(0, h)


def compatible(r1: BridgeRectangle, r2: BridgeRectangle) -> bool:
    return overlap_area(r1.bounds, r2.bounds) == 0


def potential_data_area(g: DeviceGraph, rects) -> list[int]:
    """Qubits enclosed by a group of rectangles but strictly inside none of them."""
    cx = [(r.bounds[0] + r.bounds[2]) / 2 for r in rects]
    cy = [(r.bounds[1] + r.bounds[3]) / 2 for r in rects]
    box = (min(cx), min(cy), max(cx), max(cy))
    out = []
    for q in g.qubits:
        if not (box[0] <= q.x <= box[2] and box[1] <= q.y <= box[3]):
            continue
        if any(r.bounds[0] < q.x < r.bounds[2] and r.bounds[1] < q.y < r.bounds[3] for r in rects):
            continue
        out.append(q.id)
    return out


def center_qubit(g: DeviceGraph, qubits) -> int:
    qubits = list(qubits)
    mx = sum(g.pos(q)[0] for q in qubits) / len(qubits)
    my = sum(g.pos(q)[1] for q in qubits) / len(qubits)
    return min(qubits, key=lambda q: ((g.pos(q)[0] - mx) ** 2 + (g.pos(q)[1] - my) ** 2, g.key(q)))


def assign_roles(pts: dict[int, tuple[int, int]]) -> dict[str, int]:
    """Topmost is a, then leftmost b, rightmost c, and the last one d.

    Ties go to the left for a and to the top for b and c.  Two qubits get
    roles b and c.
    """
    rest = dict(pts)
    roles = {}
    if len(rest) == 4:
        a = min(rest, key=lambda q: (rest[q][1], rest[q][0]))
        roles["a"] = a
        del rest[a]
    b = min(rest, key=lambda q: (rest[q][0], rest[q][1]))
    roles["b"] = b
    del rest[b]
    c = min(rest, key=lambda q: (-rest[q][0], rest[q][1]))
    roles["c"] = c
    del rest[c]
    if rest:
        roles["d"] = next(iter(rest))
    return roles


Vec = tuple[int, int]


def _sub(p, q) -> Vec:
    return p[0] - q[0], p[1] - q[1]


def template_bases(g: DeviceGraph, rects, ring: int = 1) -> list[tuple[Vec, Vec]]:
    """Lattice bases (u, v) from data quadrilaterals around bridge rectangles.

    Data candidates are the qubits at graph distance `ring` from the anchors.
    A quadrilateral whose roles satisfy a + d = b + c is a plaquette; u = c - a
    steps along a code row and v = b - a steps down a column.
    """
    bases = set()
    for r in rects:
        dist = {a: 0 for a in r.anchors}
        todo = deque(r.anchors)
        while todo:
            u = todo.popleft()
            if dist[u] >= ring:
                continue
            for v in g.adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    todo.append(v)
        ringq = sorted((q for q, k in dist.items() if k == ring), key=g.key)
        for quad in itertools.combinations(ringq, 4):
            pts = {q: g.pos(q) for q in quad}
            ro = assign_roles(pts)
            a, b, c, d = (pts[ro[k]] for k in "abcd")
            if _sub(a, b) != _sub(c, d):
                continue
            u, v = _sub(c, a), _sub(b, a)
            if u[0] * v[1] - u[1] * v[0] == 0:
                continue
            xs = [p[0] for p in pts.values()]
            ys = [p[1] for p in pts.values()]
            if not all(min(xs) <= g.pos(q)[0] <= max(xs) and min(ys) <= g.pos(q)[1] <= max(ys) for q in r.anchors):
                continue
            bases.add((u, v))
    return sorted(bases, key=lambda uv: (abs(uv[0][0] * uv[1][1] - uv[0][1] * uv[1][0]), uv))


def stabilizer_cells(d: int):
    """Rotated-code stabilizers as (row, col, type, corner offsets).

    Cell (r, c) covers data rows r..r+1 and columns c..c+1; X on even r + c.
    Weight-2 cells keep X on the top and bottom edges and Z on the sides.
    """
    out = []
    for r in range(-1, d):
        for c in range(-1, d):
            t = "X" if (r + c) % 2 == 0 else "Z"
            corners = [(r + i, c + j) for i in (0, 1) for j in (0, 1)]
            inside = [p for p in corners if 0 <= p[0] < d and 0 <= p[1] < d]
            if len(inside) == 4:
                out.append((r, c, t, corners, inside))
            elif len(inside) == 2:
                vertical_edge = r in (-1, d - 1)
                if (vertical_edge and t == "X") or (not vertical_edge and t == "Z"):
                    out.append((r, c, t, corners, inside))
    return out


def hook_safe_order(stab_type: str, inside, data_map) -> tuple[int, ...]:
    """Coupling order whose mid-circuit hook pair runs across the matching logical.

    X checks go row by row, so an X hook covers two qubits of one row;
    Z checks go column by column.
    """
    key = (lambda p: p) if stab_type == "X" else (lambda p: (p[1], p[0]))
    return tuple(data_map[p] for p in sorted(inside, key=key))


class _TreeCache:
    """Memoizes tree searches by translation-normalized local structure."""

    def __init__(self, g: DeviceGraph):
        self.g = g
        self.memo: dict = {}

    def trees(self, region: Region) -> list[BridgeTree]:
        g = self.g
        x0, y0, x1, y1 = region.bounds
        inside = [q.id for q in g.qubits if x0 <= q.x <= x1 and y0 <= q.y <= y1]
        inset = set(inside)
        rel = lambda q: (g.pos(q)[0] - x0, g.pos(q)[1] - y0)
        key = (
            (x1 - x0, y1 - y0),
            frozenset(rel(q) for q in inside),
            frozenset((rel(a), rel(b)) for a in inside for b in g.adj[a] if b in inset and a < b),
            tuple(rel(t) for t in region.terminals),
            frozenset(rel(q) for q in region.blocked if q in inset),
        )
        if key not in self.memo:
            try:
                found = find_bridge_trees(region, g)
            except TreeError:
                found = []
            self.memo[key] = (
                (x0, y0),
                [(frozenset(rel(q) for q in t.bridges), frozenset((rel(a), rel(b)) for a, b in t.edges), rel(t.syndrome)) for t in found],
            )
        (ox, oy), stored = self.memo[key]
        at = lambda p: g.at(p[0] + x0, p[1] + y0)
        out = []
        for br, ed, syn in stored:
            out.append(
                BridgeTree(
                    bridges=frozenset(at(p) for p in br),
                    edges=frozenset(tuple(sorted((at(a), at(b)))) for a, b in ed),
                    leaves=region.terminals,
                    syndrome=at(syn),
                )
            )
        return out


def _assign_disjoint(rects: list[SyndromeRectangle]) -> bool:
    """Reorder candidates so the first trees of same-type stabilizers are disjoint."""
    for t in ("X", "Z"):
        group = sorted((r for r in rects if r.stab_type == t), key=lambda r: (len(r.candidates), r.stab_id))
        chosen: dict[int, BridgeTree] = {}
        used: set[int] = set()

        def solve(i):
            if i == len(group):
                return True
            r = group[i]
            for tree in r.candidates:
                if used & tree.bridges:
                    continue
                chosen[r.stab_id] = tree
                used.update(tree.bridges)
                if solve(i + 1):
                    return True
                used.difference_update(tree.bridges)
                del chosen[r.stab_id]
            return False

        if not solve(0):
            return False
        for r in group:
            pick = chosen[r.stab_id]
            r.candidates = [pick] + [c for c in r.candidates if c is not pick]
    return True


def tile(g: DeviceGraph, d: int, basis, origin, cache: _TreeCache | None = None, mode: str = "pair3"):
    """Place the d x d lattice at origin and build every syndrome rectangle, or None."""
    u, v = basis
    cache = cache or _TreeCache(g)
    coord = lambda r, c: (origin[0] + r * v[0] + c * u[0], origin[1] + r * v[1] + c * u[1])
    data_map = {}
    for r in range(d):
        for c in range(d):
            q = g.at(*coord(r, c))
            if q is None:
                return None
            data_map[(r, c)] = q
    data_set = set(data_map.values())
    gx0, gy0, gx1, gy1 = g.bounds()
    rects = []
    for r, c, t, corners, inside in stabilizer_cells(d):
        pts = [coord(*p) for p in corners]
        if len(inside) == 2:
            # a boundary check may also use the interior cell next to it
            ri, ci = min(max(r, 0), d - 2), min(max(c, 0), d - 2)
            pts += [coord(ri + i, ci + j) for i in (0, 1) for j in (0, 1)]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        bounds = (max(min(xs), gx0), max(min(ys), gy0), min(max(xs), gx1), min(max(ys), gy1))
        qs = {data_map[p]: g.pos(data_map[p]) for p in inside}
        rect = SyndromeRectangle(len(rects), t, (r, c), assign_roles(qs), bounds, order=hook_safe_order(t, inside, data_map))
        rect.candidates = cache.trees(rect.region(data_set))
        if not rect.candidates:
            return None
        rects.append(rect)
    # among equally short trees, prefer those that stay inside the code's bounding box
    pts = [g.pos(q) for q in data_set]
    bx0, by0 = min(p[0] for p in pts), min(p[1] for p in pts)
    bx1, by1 = max(p[0] for p in pts), max(p[1] for p in pts)
    outside = lambda t: sum(1 for q in t.bridges if not (bx0 <= g.pos(q)[0] <= bx1 and by0 <= g.pos(q)[1] <= by1))
    for rect in rects:
        rect.candidates.sort(key=outside)
    if not _assign_disjoint(rects):
        return None
    return DataLayout(d, mode, (tuple(u), tuple(v)), tuple(origin), data_map, rects)


@lru_cache(maxsize=64)
def _viable_for_arch(name: str, mode: str):
    return _viable_bases(archmod.gen_arch(name, 14, 14), mode)


def _viable_bases(g: DeviceGraph, mode: str):
    """Bases whose periodic interior admits same-type disjoint trees.

    Tested on a 5 x 5 interior block in the middle of the device.  Rings of
    data candidates are tried outward until one ring gives a viable basis.
    """
    rects = build_bridge_rectangles(g, mode)
    x0, y0, x1, y1 = g.bounds()
    mid = ((x0 + x1) // 2, (y0 + y1) // 2)
    for ring in (1, 2):
        good = []
        for basis in template_bases(g, rects, ring):
            u, v = basis
            block = 5
            cache = _TreeCache(g)
            ok = False
            for q in sorted(range(g.n), key=lambda q: abs(g.pos(q)[0] - mid[0]) + abs(g.pos(q)[1] - mid[1]))[:12]:
                o = g.pos(q)
                start = (o[0] - 2 * (u[0] + v[0]), o[1] - 2 * (u[1] + v[1]))
                if _interior_ok(g, block, basis, start, cache):
                    ok = True
                    break
            if ok:
                good.append(basis)
        if good:
            return tuple(good)
    return ()


def _interior_ok(g, block, basis, origin, cache) -> bool:
    u, v = basis
    coord = lambda r, c: (origin[0] + r * v[0] + c * u[0], origin[1] + r * v[1] + c * u[1])
    data = {}
    for r in range(block):
        for c in range(block):
            q = g.at(*coord(r, c))
            if q is None:
                return False
            data[(r, c)] = q
    data_set = set(data.values())
    rects = []
    for r in range(block - 1):
        for c in range(block - 1):
            corners = [(r + i, c + j) for i in (0, 1) for j in (0, 1)]
            qs = {data[p]: g.pos(data[p]) for p in corners}
            xs = [p[0] for p in qs.values()]
            ys = [p[1] for p in qs.values()]
            rect = SyndromeRectangle(len(rects), "X" if (r + c) % 2 == 0 else "Z", (r, c), assign_roles(qs),
                                     (min(xs), min(ys), max(xs), max(ys)))
            rect.candidates = cache.trees(rect.region(data_set))
            if not rect.candidates:
                return False
            rects.append(rect)
    return _assign_disjoint(rects)


def viable_bases(g: DeviceGraph, mode: str):
    """Viable bases, probed on a large patch when g is a known architecture."""
    if g.name in archmod.ARCHS:
        return _viable_for_arch(g.name, mode)
    return _viable_bases(g, mode)


def footprint(layout: DataLayout, g: DeviceGraph, trees=None) -> frozenset[int]:
    """Qubits inside the bounding box of some stabilizer's data plus its tree.

    `trees` maps stabilizer id to the tree in use; first candidates otherwise.
    """
    out = set()
    for r in layout.rects:
        t = trees[r.stab_id] if trees is not None else r.candidates[0]
        pts = [g.pos(q) for q in set(r.data) | t.nodes]
        x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
        y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
        out.update(q for q in range(g.n) if x0 <= g.pos(q)[0] <= x1 and y0 <= g.pos(q)[1] <= y1)
    return frozenset(out)


def layout_score(layout: DataLayout, g: DeviceGraph) -> tuple[int, int]:
    return len(footprint(layout, g)), sum(r.candidates[0].b for r in layout.rects)


def allocate_data_qubits(g: DeviceGraph, d: int, mode: str = "pair3", bases=None) -> DataLayout:
    """Place a distance-d code on g, preferring the smallest footprint."""
    if d < 3 or d % 2 == 0:
        raise ValueError(f"distance must be odd and >= 3 (got {d})")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    bases = viable_bases(g, mode) if bases is None else tuple(bases)
    if not bases:
        raise InfeasibleError(f"no plaquette pattern of this architecture supports a surface code in {mode} mode")
    cache = _TreeCache(g)
    best = None
    for basis in bases:
        for q in sorted(range(g.n), key=g.key):
            layout = tile(g, d, basis, g.pos(q), cache, mode)
            if layout is None:
                continue
            score = layout_score(layout, g)
            if best is None or score < best[0]:
                best = (score, layout)
            break
    if best is None:
        raise InfeasibleError(f"patch with {g.n} qubits cannot host a distance-{d} code at any position")
    return best[1]


def feasibility_check(layout: DataLayout, g: DeviceGraph) -> list[str]:
    """Every weight-4 rectangle needs a degree-4 qubit or two degree-3 qubits; returns violations."""
    data_set = layout.data_qubits
    problems = []
    for r in layout.rects:
        if r.weight != 4:
            continue
        region = r.region(data_set)
        allowed = set(region.allowed(g))
        local = set(allowed) | set(r.data)
        deg = {q: sum(1 for p in g.adj[q] if p in local) for q in allowed}
        if not (any(k >= 4 for k in deg.values()) or sum(1 for k in deg.values() if k >= 3) >= 2):
            problems.append(f"stabilizer {r.stab_id} at {r.logical_pos}: no degree-4 or two degree-3 qubits inside {r.bounds}")
    return problems
