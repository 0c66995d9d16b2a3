"""Device architecture graphs on an integer grid.

Coordinates live on a doubled grid: lattice qubits sit on even (x, y) and the
extra qubit of a heavy edge sits on the midpoint, which is then still integer.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path


class ArchError(ValueError):
    """Raised for invalid dimensions, embeddings or device files."""


@dataclass(frozen=True)
class QubitRecord:
    id: int
    x: int
    y: int


@dataclass(frozen=True)
class DeviceGraph:
    name: str
    qubits: tuple[QubitRecord, ...]
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        problems = _invariant_problems(self)
        if problems:
            raise ArchError("invalid device graph: " + "; ".join(problems))

    @cached_property
    def adj(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in self.qubits]
        for a, b in self.edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return tuple(tuple(sorted(n, key=lambda q: self.key(q))) for n in nbrs)

    @cached_property
    def index(self) -> dict[tuple[int, int], int]:
        return {(q.x, q.y): q.id for q in self.qubits}

    @property
    def n(self) -> int:
        return len(self.qubits)

    def pos(self, q: int) -> tuple[int, int]:
        r = self.qubits[q]
        return r.x, r.y

    def key(self, q: int) -> tuple[int, int]:
        """Top-left-first ordering key, (y, x)."""
        r = self.qubits[q]
        return r.y, r.x

    def at(self, x: int, y: int) -> int | None:
        return self.index.get((x, y))

    def degree(self, q: int) -> int:
        return len(self.adj[q])

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def bounds(self) -> tuple[int, int, int, int]:
        xs = [q.x for q in self.qubits]
        ys = [q.y for q in self.qubits]
        return min(xs), min(ys), max(xs), max(ys)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "qubits": [{"id": q.id, "x": q.x, "y": q.y} for q in self.qubits],
            "edges": [list(e) for e in sorted(self.edges)],
        }


def _invariant_problems(g: DeviceGraph) -> list[str]:
    out = []
    ids = [q.id for q in g.qubits]
    if ids != list(range(len(ids))):
        out.append("qubit ids must be dense 0..N-1 in order")
    seen: dict[tuple[int, int], int] = {}
    for q in g.qubits:
        if not isinstance(q.x, int) or not isinstance(q.y, int):
            out.append(f"qubit {q.id} has non-integer coordinates")
        if (q.x, q.y) in seen:
            out.append(f"qubits {seen[(q.x, q.y)]} and {q.id} share coordinate ({q.x}, {q.y})")
        seen[(q.x, q.y)] = q.id
    n = len(g.qubits)
    for a, b in g.edges:
        if not (0 <= a < n and 0 <= b < n):
            out.append(f"edge ({a}, {b}) references an unknown qubit")
        elif a == b:
            out.append(f"self-loop on qubit {a}")
        elif a > b:
            out.append(f"edge ({a}, {b}) is not normalized")
    if out or n == 0:
        return out
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for a, b in g.edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    reach = {0}
    todo = deque([0])
    while todo:
        for b in nbrs[todo.popleft()]:
            if b not in reach:
                reach.add(b)
                todo.append(b)
    if len(reach) != n:
        out.append(f"graph is disconnected ({n - len(reach)} qubits unreachable from qubit 0)")
    return out


def build(name: str, coords, edge_coords) -> DeviceGraph:
    """Build a graph from coordinates; ids follow (y, x) order."""
    coords = sorted(set(coords), key=lambda p: (p[1], p[0]))
    ids = {p: i for i, p in enumerate(coords)}
    edges = set()
    for p, q in edge_coords:
        a, b = ids[p], ids[q]
        edges.add((min(a, b), max(a, b)))
    qubits = tuple(QubitRecord(i, p[0], p[1]) for i, p in enumerate(coords))
    return DeviceGraph(name, qubits, frozenset(edges))


def gen_square(rows: int, cols: int) -> DeviceGraph:
    if rows < 2 or cols < 2:
        raise ArchError(f"invalid dimension: square needs rows, cols >= 2 (got {rows}x{cols})")
    coords = [(2 * i, 2 * j) for i in range(cols) for j in range(rows)]
    edges = []
    for i in range(cols):
        for j in range(rows):
            if i + 1 < cols:
                edges.append(((2 * i, 2 * j), (2 * i + 2, 2 * j)))
            if j + 1 < rows:
                edges.append(((2 * i, 2 * j), (2 * i, 2 * j + 2)))
    return build("square", coords, edges)


def gen_hexagon(rows: int, cols: int) -> DeviceGraph:
    """Brick-wall hexagon lattice; a vertical rung hangs below (i, j) when i + j is even."""
    if rows < 2 or cols < 3:
        raise ArchError(f"invalid dimension: hexagon needs rows >= 2, cols >= 3 (got {rows}x{cols})")
    coords = [(2 * i, 2 * j) for i in range(cols) for j in range(rows)]
    edges = []
    for i in range(cols):
        for j in range(rows):
            if i + 1 < cols:
                edges.append(((2 * i, 2 * j), (2 * i + 2, 2 * j)))
            if j + 1 < rows and (i + j) % 2 == 0:
                edges.append(((2 * i, 2 * j), (2 * i, 2 * j + 2)))
    return build("hexagon", coords, edges)


def gen_heavy(g: DeviceGraph) -> DeviceGraph:
    coords = [g.pos(q) for q in range(g.n)]
    taken = set(coords)
    edges = []
    for a, b in sorted(g.edges):
        (xa, ya), (xb, yb) = g.pos(a), g.pos(b)
        if (xa + xb) % 2 or (ya + yb) % 2:
            raise ArchError(f"embedding error: midpoint of edge ({a}, {b}) is not on the grid")
        m = ((xa + xb) // 2, (ya + yb) // 2)
        if m in taken:
            raise ArchError(f"embedding error: midpoint {m} of edge ({a}, {b}) is occupied")
        taken.add(m)
        coords.append(m)
        edges += [((xa, ya), m), (m, (xb, yb))]
    return build("heavy-" + g.name, coords, edges)


ARCHS = ("square", "hexagon", "heavy-square", "heavy-hexagon")


def gen_arch(arch: str, rows: int, cols: int) -> DeviceGraph:
    """Rectangular patch of the named architecture with rows x cols lattice sites."""
    if arch == "square":
        return gen_square(rows, cols)
    if arch == "hexagon":
        return gen_hexagon(rows, cols)
    if arch == "heavy-square":
        return gen_heavy(gen_square(rows, cols))
    if arch == "heavy-hexagon":
        return gen_heavy(gen_hexagon(rows, cols))
    raise ArchError(f"unknown architecture {arch!r}; expected one of {', '.join(ARCHS)}")


def dumps(g: DeviceGraph) -> str:
    d = g.to_dict()
    lines = ["{", f'  "name": {json.dumps(d["name"])},', '  "qubits": [']
    lines += [
        f'    {{"id": {q["id"]}, "x": {q["x"]}, "y": {q["y"]}}}' + ("," if i + 1 < len(d["qubits"]) else "")
        for i, q in enumerate(d["qubits"])
    ]
    lines += ["  ],", '  "edges": [']
    lines += [f"    [{a}, {b}]" + ("," if i + 1 < len(d["edges"]) else "") for i, (a, b) in enumerate(d["edges"])]
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


def loads(text: str) -> DeviceGraph:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ArchError(f"parse error at line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(raw, dict):
        raise ArchError("parse error: top level must be an object")
    for key in ("name", "qubits", "edges"):
        if key not in raw:
            raise ArchError(f"parse error: missing field {key!r}")
    qubits = []
    for i, q in enumerate(raw["qubits"]):
        try:
            qubits.append(QubitRecord(int(q["id"]), q["x"], q["y"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ArchError(f"parse error in qubits[{i}]: {e!r}") from None
    qubits.sort(key=lambda q: q.id)
    edges = set()
    for i, e in enumerate(raw["edges"]):
        if not isinstance(e, list) or len(e) != 2 or not all(isinstance(v, int) for v in e):
            raise ArchError(f"parse error in edges[{i}]: expected a pair of integer ids")
        a, b = e
        pair = (min(a, b), max(a, b))
        if pair in edges:
            raise ArchError(f"validation error: duplicate edge {list(pair)} at edges[{i}]")
        edges.add(pair)
    return DeviceGraph(str(raw["name"]), tuple(qubits), frozenset(edges))


def save(g: DeviceGraph, path) -> None:
    Path(path).write_text(dumps(g))


def load(path) -> DeviceGraph:
    return loads(Path(path).read_text())
