"""Flag-bridge stabilizer measurement circuits and a Pauli-propagation verifier.

X-type: the syndrome qubit is put in |+>, a CNOT cascade spreads it over the
bridge tree (a GHZ state), every data qubit is hit by a CNOT from its tree
neighbour, and the cascade is undone.  Z-type is the exact Hadamard dual:
bridge qubits start in |+>, the syndrome in |0>, and every CNOT points the
other way.  In both cases the syndrome qubit reads the stabilizer and the
other tree qubits read a deterministic 0 unless a fault spread through them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .bridge import BridgeTree


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]

    def __str__(self):
        return f"{self.name} " + " ".join(map(str, self.qubits))


@dataclass
class MeasurementCircuit:
    layers: list[list[Gate]]
    stab_type: str
    tree: BridgeTree
    data_order: tuple[int, ...] = field(default=())

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def measured(self) -> list[int]:
        return [q for g in self.layers[-1] if g.name == "M" for q in g.qubits]

    def gates(self):
        for t, layer in enumerate(self.layers):
            for gate in layer:
                yield t, gate

    def metrics(self) -> dict:
        return metrics(self)

    def text(self) -> str:
        return to_text(self.layers)


def _children(tree: BridgeTree, key) -> dict[int, list[int]]:
    nb = tree.nbrs
    kids: dict[int, list[int]] = {}
    seen = {tree.syndrome}
    order = [tree.syndrome]
    for u in order:
        kids[u] = []
        for v in sorted(nb[u], key=key):
            if v in seen or v not in tree.bridges:
                continue
            seen.add(v)
            kids[u].append(v)
            order.append(v)
    return kids


def cascade_schedule(tree: BridgeTree, key=None) -> list[list[tuple[int, int]]]:
    """Layers of (parent, child) pairs spreading from the syndrome qubit.

    A qubit joins once its parent has sent to it and afterwards sends to one
    child per layer, taller subtrees first, which is optimal for trees.
    """
    key = key or (lambda q: q)
    kids = _children(tree, key)

    def height(u):
        return 1 + max((height(c) for c in kids[u]), default=0)

    for u in kids:
        kids[u].sort(key=lambda c: (-height(c), key(c)))
    layers: list[list[tuple[int, int]]] = []
    start = {tree.syndrome: 0}
    todo = [tree.syndrome]
    while todo:
        u = todo.pop(0)
        t = start[u]
        for c in kids[u]:
            while len(layers) <= t:
                layers.append([])
            layers[t].append((u, c))
            start[c] = t + 1
            todo.append(c)
            t += 1
        todo.sort(key=lambda q: (start[q], key(q)))
    return layers


def gen_measurement_circuit(stab_type: str, tree: BridgeTree, key=None) -> MeasurementCircuit:
    """Build the layered circuit; data couplings follow the leaf order of the tree."""
    if stab_type not in ("X", "Z"):
        raise CircuitError(f"unknown stabilizer type {stab_type!r}")
    if tree.w not in (2, 4):
        raise CircuitError(f"unsupported stabilizer weight {tree.w}")
    key = key or (lambda q: q)
    bridges = sorted(tree.bridges)
    s = tree.syndrome
    cascade = cascade_schedule(tree, key)
    if stab_type == "X":
        fwd = [[Gate("CX", (p, c)) for p, c in layer] for layer in cascade]
        hq = [s]
    else:
        fwd = [[Gate("CX", (c, p)) for p, c in layer] for layer in cascade]
        hq = [q for q in bridges if q != s]
    couple = []
    for dq in tree.leaves:
        t = next(q for q in tree.nbrs[dq])
        couple.append([Gate("CX", (t, dq)) if stab_type == "X" else Gate("CX", (dq, t))])
    layers = [[Gate("R", (q,)) for q in bridges]]
    if hq:
        layers.append([Gate("H", (q,)) for q in hq])
    layers += fwd + couple + [list(l) for l in reversed(fwd)]
    if hq:
        layers.append([Gate("H", (q,)) for q in hq])
    layers.append([Gate("M", (q,)) for q in bridges])
    layers = [sorted(l, key=lambda gt: gt.qubits) for l in layers]
    return MeasurementCircuit(layers, stab_type, tree, tuple(tree.leaves))


def metrics(c: MeasurementCircuit) -> dict:
    return {
        "cnot_count": sum(1 for _, g in c.gates() if g.name == "CX"),
        "depth": c.depth,
        "bridge_qubit_count": c.tree.b,
    }


def to_text(layers) -> str:
    out = []
    for i, layer in enumerate(layers):
        if i:
            out.append("TICK")
        out += [str(g) for g in sorted(layer, key=lambda gt: gt.qubits)]
    return "\n".join(out) + "\n"


def parse_text(text: str) -> list[list[Gate]]:
    layers: list[list[Gate]] = [[]]
    for n, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "TICK":
            layers.append([])
            continue
        name = parts[0]
        arity = {"R": 1, "H": 1, "M": 1, "CX": 2}.get(name)
        if arity is None or len(parts) != arity + 1:
            raise CircuitError(f"line {n}: cannot parse {line!r}")
        layers[-1].append(Gate(name, tuple(int(p) for p in parts[1:])))
    return layers


class Pauli:
    """A signed Pauli string in symplectic form, keyed by qubit id."""

    __slots__ = ("x", "z", "sign")

    def __init__(self, x=(), z=(), sign=0):
        self.x = set(x)
        self.z = set(z)
        self.sign = sign

    @classmethod
    def from_dict(cls, ops: dict[int, str]):
        x = {q for q, p in ops.items() if p in "XY"}
        z = {q for q, p in ops.items() if p in "ZY"}
        return cls(x, z)

    def copy(self):
        return Pauli(self.x, self.z, self.sign)

    def on(self, qubits) -> dict[int, str]:
        out = {}
        for q in qubits:
            xb, zb = q in self.x, q in self.z
            if xb or zb:
                out[q] = "Y" if xb and zb else ("X" if xb else "Z")
        return out

    def support(self):
        return self.x | self.z

    def commutes(self, other: "Pauli") -> bool:
        return (len(self.x & other.z) + len(self.z & other.x)) % 2 == 0

    def apply(self, gate: Gate):
        """Conjugate by a unitary gate (self-inverse gates only)."""
        if gate.name == "H":
            (q,) = gate.qubits
            xb, zb = q in self.x, q in self.z
            if xb and zb:
                self.sign ^= 1
            _set(self.x, q, zb)
            _set(self.z, q, xb)
        elif gate.name == "CX":
            c, t = gate.qubits
            xc, zc, xt, zt = c in self.x, c in self.z, t in self.x, t in self.z
            if xc and zt and (xt == zc):
                self.sign ^= 1
            _set(self.x, t, xt ^ xc)
            _set(self.z, c, zc ^ zt)


def _set(s: set, q: int, on: bool):
    if on:
        s.add(q)
    else:
        s.discard(q)


def backpropagate(layers, obs: Pauli, start_layer: int | None = None) -> Pauli:
    """Heisenberg-propagate an observable measured after the last unitary layer."""
    p = obs.copy()
    last = len(layers) if start_layer is None else start_layer
    for layer in reversed(layers[:last]):
        for g in layer:
            if g.name in ("H", "CX"):
                p.apply(g)
    return p


def forward_flips(layers, error: Pauli) -> dict[int, int]:
    """Propagate an error injected before the circuit; return measurement flips."""
    p = error.copy()
    flips = {}
    for layer in layers:
        for g in layer:
            if g.name == "R":
                p.x.discard(g.qubits[0])
                p.z.discard(g.qubits[0])
            elif g.name == "M":
                flips[g.qubits[0]] = int(g.qubits[0] in p.x)
            else:
                p.apply(g)
    return flips


def verify_stabilizer(c: MeasurementCircuit, stab: dict[int, str]) -> list[str]:
    """Check the circuit measures `stab` without disturbing the data qubits.

    Returns a list of mismatches, empty when the circuit is correct.
    """
    problems = []
    data = list(c.data_order)
    tree_q = sorted(c.tree.bridges)
    stab_p = Pauli.from_dict(stab)
    # injected single-qubit errors on data flip the syndrome parity iff they anticommute
    for q in data:
        for name in "XYZ":
            err = Pauli.from_dict({q: name})
            flips = forward_flips(c.layers, err)
            parity = sum(flips.values()) % 2
            expect = 0 if err.commutes(stab_p) else 1
            if parity != expect:
                problems.append(f"injecting {name} on data {q}: parity {parity}, expected {expect}")
    # measured observables traced back to the preparation layer
    body = c.layers[1:-1]
    syn = backpropagate(body, Pauli(z=tree_q))
    if syn.on(data) != stab or syn.sign:
        problems.append(f"syndrome parity measures {syn.on(data)} (sign {syn.sign}), expected {stab}")
    if syn.x & set(tree_q):
        problems.append("syndrome parity is not deterministic on the prepared ancillas")
    for q in tree_q:
        if q == c.tree.syndrome:
            continue
        f = backpropagate(body, Pauli(z=[q]))
        if f.on(data) or f.x & set(tree_q) or f.sign:
            problems.append(f"flag qubit {q} is not a deterministic zero (reads {f.on(data)})")
    other = "Z" if c.stab_type == "X" else "X"
    keep = [{q: c.stab_type} for q in data] + [{a: other, b: other} for i, a in enumerate(data) for b in data[i + 1:]]
    for ops in keep:
        p = backpropagate(body, Pauli.from_dict(ops))
        if p.on(data) != ops or p.x & set(tree_q) or p.sign:
            problems.append(f"data operator {ops} is not preserved by the circuit")
    return problems


def stabilizer_of(stab_type: str, data) -> dict[int, str]:
    return {q: stab_type for q in data}
