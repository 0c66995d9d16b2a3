"""Partitioning stabilizer measurements into conflict-free parallel rounds.

Start from one round of X-type and one of Z-type measurements, then move the
deepest circuits of the shorter round into the longer one, evicting whatever
they collide with back and forth a bounded number of times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .bridge import BridgeTree
from .circuit import Gate, MeasurementCircuit, gen_measurement_circuit


@dataclass
class Entry:
    stab_id: int
    stab_type: str
    candidates: list[BridgeTree]
    build: Callable[[str, BridgeTree], MeasurementCircuit]
    choice: int = 0
    _circuits: dict = field(default_factory=dict, repr=False)

    @property
    def tree(self) -> BridgeTree:
        return self.candidates[self.choice]

    def circuit_for(self, i: int):
        if i not in self._circuits:
            self._circuits[i] = self.build(self.stab_type, self.candidates[i])
        return self._circuits[i]

    @property
    def circuit(self):
        return self.circuit_for(self.choice)

    @property
    def exec_time(self) -> int:
        return self.circuit.depth


def compatible_trees(t1: BridgeTree, t2: BridgeTree) -> bool:
    return not (t1.bridges & t2.bridges)


@dataclass
class Schedule:
    partitions: list[list[Entry]]

    def entries(self):
        for part in self.partitions:
            yield from part

    def state(self):
        return [[(e.stab_id, e.choice) for e in p] for p in self.partitions]

    def to_dict(self) -> dict:
        return {
            "total_cycle_time": total_cycle_time(self),
            "partitions": [
                [
                    {
                        "stabilizer": e.stab_id,
                        "type": e.stab_type,
                        "syndrome": e.tree.syndrome,
                        "bridges": sorted(e.tree.bridges),
                        "depth": e.exec_time,
                    }
                    for e in sorted(p, key=lambda e: e.stab_id)
                ]
                for p in self.partitions
            ],
        }


def exec_time(part) -> int:
    return max((e.exec_time for e in part), default=0)


def total_cycle_time(s: Schedule) -> int:
    return sum(exec_time(p) for p in s.partitions)


def valid(s: Schedule) -> bool:
    for part in s.partitions:
        for i, a in enumerate(part):
            for b in part[i + 1:]:
                if not compatible_trees(a.tree, b.tree):
                    return False
    return True


def make_entries(rects, key=None) -> list[Entry]:
    build = lambda t, tree: gen_measurement_circuit(t, tree, key)
    return [Entry(r.stab_id, r.stab_type, list(r.candidates), build) for r in rects]


def init_schedule(entries: list[Entry]) -> Schedule:
    s1 = [e for e in entries if e.stab_type == "X"]
    s2 = [e for e in entries if e.stab_type == "Z"]
    for e in entries:
        e.choice = 0
    if exec_time(s1) < exec_time(s2):
        s1, s2 = s2, s1
    return Schedule([p for p in (s1, s2) if p])


def _conflicts(e: Entry, i: int, part) -> list[Entry]:
    t = e.candidates[i]
    return [o for o in part if o is not e and not compatible_trees(t, o.tree)]


def _place(e: Entry, part: list[Entry]):
    """Pick e's tree with the fewest collisions in part (current tree on ties)."""
    best = min(range(len(e.candidates)), key=lambda i: (len(_conflicts(e, i, part)), i != e.choice, i))
    e.choice = best
    part.append(e)


def refine(s: Schedule, k: int = 4) -> Schedule:
    """Iterative refinement of a two-round schedule; returns s modified in place."""
    if len(s.partitions) < 2:
        return s
    seen = {_key(s)}
    while True:
        backup = [(list(p), [e.choice for e in p]) for p in s.partitions]
        before = total_cycle_time(s)
        s1, s2 = s.partitions[0], s.partitions[1]
        if not s2:
            break
        r2 = max(s2, key=lambda e: (e.exec_time, -e.stab_id))
        s2.remove(r2)
        swap_list = [r2]
        stop = False
        for i in range(k):
            target = s1 if i % 2 == 0 else s2
            for r in list(swap_list):
                swap_list.remove(r)
                _place(r, target)
                for r1 in sorted(_conflicts(r, r.choice, target), key=lambda e: (-e.exec_time, e.stab_id)):
                    if r1.exec_time > r.exec_time:
                        stop = True
                        break
                    swap_list.append(r1)
                    target.remove(r1)
                if stop:
                    break
            if stop or not swap_list:
                break
        after = total_cycle_time(s)
        if stop or swap_list or after > before or not valid(s):
            _restore(s, backup)
            break
        s.partitions = [p for p in s.partitions if p]
        state = _key(s)
        if state in seen or len(s.partitions) < 2:
            break
        seen.add(state)
    s.partitions = [p for p in s.partitions if p]
    return s


def _key(s: Schedule):
    return tuple(tuple(sorted((e.stab_id, e.choice) for e in p)) for p in s.partitions)


def _restore(s: Schedule, backup):
    parts = []
    for members, choices in backup:
        for e, c in zip(members, choices):
            e.choice = c
        parts.append(members)
    s.partitions = parts


def synthesize_schedule(rects, key=None, k: int = 4) -> Schedule:
    return refine(init_schedule(make_entries(rects, key)), k)


def merge_partition(part: list[Entry], data_qubits) -> list[list[Gate]]:
    """Lay circuits of one round side by side, shifting where they would collide.

    Two circuits may not touch a qubit in the same layer.  An X-type and a
    Z-type circuit that share data qubits must reach them in a consistent order
    (an even number of them first by the X circuit) so both stay valid.
    """
    data_qubits = set(data_qubits)
    busy: dict[int, set[int]] = {}
    touches: dict[int, dict[int, int]] = {}
    placed: list[tuple[Entry, int]] = []
    layers: list[list[Gate]] = []
    for e in sorted(part, key=lambda e: (-e.exec_time, e.stab_id)):
        c = e.circuit
        when = {}
        for t, g in c.gates():
            for q in g.qubits:
                if q in data_qubits:
                    when[q] = t
        off = 0
        while True:
            clash = any(q in busy.get(t + off, ()) for t, g in c.gates() for q in g.qubits)
            if not clash:
                clash = any(
                    _bad_order(e, when, off, o, touches[o.stab_id]) for o, _ in placed if o.stab_type != e.stab_type
                )
            if not clash:
                break
            off += 1
        for t, g in c.gates():
            while len(layers) <= t + off:
                layers.append([])
            layers[t + off].append(g)
            busy.setdefault(t + off, set()).update(g.qubits)
        touches[e.stab_id] = {q: t + off for q, t in when.items()}
        placed.append((e, off))
    return [sorted(l, key=lambda g: g.qubits) for l in layers]


def _bad_order(e: Entry, when, off, other: Entry, other_when) -> bool:
    shared = set(when) & set(other_when)
    if not shared:
        return False
    first = sum(1 for q in shared if when[q] + off < other_when[q])
    return first % 2 == 1


def cycle_layers(s: Schedule, data_qubits) -> list[list[Gate]]:
    out = []
    for part in s.partitions:
        out += merge_partition(part, data_qubits)
    return out
