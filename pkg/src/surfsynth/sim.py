"""Monte-Carlo Pauli-frame simulation of a scheduled syndrome-extraction cycle.

Frames are bit-packed across shots (64 shots per machine word).  The same
engine enumerates single faults for the decoding graph: there, every column
of the frame is one deterministic fault instead of one random shot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Gate, Pauli
from .decoder import EXACT_LIMIT, MatchingGraph
from .schedule import Schedule, merge_partition

# noise op kinds
DEP1, DEP2, XFLIP = 0, 1, 2
_P1 = ((1, 0), (1, 1), (0, 1))  # X, Y, Z as (x, z)


def _pauli_bits(i: int) -> tuple[int, int]:
    # 0=I 1=X 2=Y 3=Z
    return int(i in (1, 2)), int(i in (2, 3))


_P2 = tuple((_pauli_bits(a), _pauli_bits(b)) for a in range(4) for b in range(4) if a or b)


@dataclass(frozen=True)
class NoiseModel:
    p_gate: float
    p_idle: float = 0.0002

    def __post_init__(self):
        for name in ("p_gate", "p_idle"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def prob(self, cls: str) -> float:
        return self.p_gate if cls == "gate" else self.p_idle


@dataclass
class CycleCircuit:
    """A multi-round memory experiment on compact qubit indices.

    ops holds ("H", q), ("CX", c, t), ("R", q), ("M", q, rec) and
    ("N", kind, qubits, noise_index).  Records past n_meas come from a
    noiseless final readout of the data qubits.
    """

    qubits: list[int]
    ops: list[tuple]
    noise: list[tuple[int, tuple[int, ...], str]]
    n_meas: int
    n_records: int
    final_x: dict[int, int]
    final_z: dict[int, int]
    detectors: list[tuple[int, ...]]
    det_info: list[tuple]
    sectors: list[int]
    observables: list[tuple[int, ...]]
    rounds: int
    layers_per_round: int
    meta: dict = field(default_factory=dict)

    @property
    def n_det(self) -> int:
        return len(self.detectors)

    def count(self, kind: str) -> int:
        return sum(1 for d in self.det_info if d[0] == kind)


def round_layers(schedule: Schedule, data_qubits) -> tuple[list[list[Gate]], list[tuple[int, int, int, str]]]:
    """Merged layers of one cycle plus (layer, qubit, stab_id, role) for every measurement."""
    layers: list[list[Gate]] = []
    meas = []
    for part in schedule.partitions:
        merged = merge_partition(part, data_qubits)
        owner = {}
        for e in part:
            for q in e.tree.bridges:
                owner[q] = e
        for t, layer in enumerate(merged):
            for g in layer:
                if g.name == "M":
                    e = owner[g.qubits[0]]
                    role = "syndrome" if g.qubits[0] == e.tree.syndrome else "flag"
                    meas.append((len(layers) + t, g.qubits[0], e.stab_id, role))
        layers += merged
    return layers, meas


def build_cycle_circuit(schedule: Schedule, layout, rounds: int | None = None) -> CycleCircuit:
    """Repeat the scheduled cycle, then read the data qubits out perfectly.

    The code state is assumed perfectly prepared, so first-round syndromes are
    compared to a zero reference; flags always compare to zero.
    """
    rounds = layout.distance if rounds is None else rounds
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    data = sorted(layout.data_qubits)
    layers, meas = round_layers(schedule, data)
    used = set(data)
    for e in schedule.entries():
        used |= e.tree.bridges
    qubits = sorted(used)
    ix = {q: i for i, q in enumerate(qubits)}
    ops: list[tuple] = []
    noise: list[tuple[int, tuple[int, ...], str]] = []

    def add_noise(kind, qs, cls):
        ops.append(("N", kind, qs, len(noise)))
        noise.append((kind, qs, cls))

    owner = {(t, q): sid for t, q, sid, _ in meas}
    rec_of: dict[tuple[int, int, int], int] = {}
    n_meas = 0
    for r in range(rounds):
        for t, layer in enumerate(layers):
            active = set()
            for g in layer:
                qs = tuple(ix[q] for q in g.qubits)
                active.update(qs)
                if g.name == "R":
                    ops.append(("R", qs[0]))
                    add_noise(XFLIP, qs, "gate")
                elif g.name == "H":
                    ops.append(("H", qs[0]))
                    add_noise(DEP1, qs, "gate")
                elif g.name == "CX":
                    ops.append(("CX", qs[0], qs[1]))
                    add_noise(DEP2, qs, "gate")
                elif g.name == "M":
                    add_noise(XFLIP, qs, "gate")
                    ops.append(("M", qs[0], n_meas))
                    rec_of[(r, owner[(t, g.qubits[0])], g.qubits[0])] = n_meas
                    n_meas += 1
            for i in range(len(qubits)):
                if i not in active:
                    add_noise(DEP1, (i,), "idle")
    final_x, final_z = {}, {}
    n_rec = n_meas
    for q in data:
        final_x[q] = n_rec  # X-frame bit: outcome flip of a Z-basis readout
        final_z[q] = n_rec + 1
        n_rec += 2
    detectors, info, sectors = [], [], []
    styp = {r.stab_id: r.stab_type for r in layout.rects}
    syn_q = {e.stab_id: e.tree.syndrome for e in schedule.entries()}
    flags = {e.stab_id: sorted(e.tree.bridges - {e.tree.syndrome}) for e in schedule.entries()}
    for r in range(rounds):
        for rect in layout.rects:
            sid = rect.stab_id
            cur = rec_of[(r, sid, syn_q[sid])]
            detectors.append((cur,) if r == 0 else (rec_of[(r - 1, sid, syn_q[sid])], cur))
            info.append(("syndrome", sid, r))
            sectors.append(_sector(styp[sid], False))
        for rect in layout.rects:
            for q in flags[rect.stab_id]:
                detectors.append((rec_of[(r, rect.stab_id, q)],))
                info.append(("flag", rect.stab_id, r, q))
                sectors.append(_sector(rect.stab_type, True))
    for rect in layout.rects:
        src = final_x if rect.stab_type == "Z" else final_z
        detectors.append(tuple(sorted([src[q] for q in rect.data] + [rec_of[(rounds - 1, rect.stab_id, syn_q[rect.stab_id])]])))
        info.append(("final", rect.stab_id, rounds))
        sectors.append(_sector(rect.stab_type, False))
    zl, xl = logical_supports(layout)
    observables = [tuple(final_x[q] for q in zl), tuple(final_z[q] for q in xl)]
    return CycleCircuit(qubits, ops, noise, n_meas, n_rec, final_x, final_z, detectors, info, sectors, observables,
                        rounds, len(layers), {"distance": layout.distance})


def _sector(stab_type: str, flag: bool) -> int:
    """0 for detectors of X errors (Z checks, X-circuit flags), 1 for Z errors."""
    return int((stab_type == "X") != flag)


def logical_supports(layout) -> tuple[list[int], list[int]]:
    """Z_L along the first row (between the Z-type sides), X_L down the first column."""
    d = layout.distance
    return [layout.data_map[(0, c)] for c in range(d)], [layout.data_map[(r, 0)] for r in range(d)]


# frame engine


class _Frame:
    def __init__(self, n_qubits: int, n_records: int, columns: int):
        self.columns = columns
        self.words = (columns + 63) // 64
        self.x = np.zeros((n_qubits, self.words), dtype=np.uint64)
        self.z = np.zeros((n_qubits, self.words), dtype=np.uint64)
        self.rec = np.zeros((n_records, self.words), dtype=np.uint64)

    def run(self, cc: CycleCircuit, inject):
        x, z, rec = self.x, self.z, self.rec
        for op in cc.ops:
            k = op[0]
            if k == "CX":
                c, t = op[1], op[2]
                x[t] ^= x[c]
                z[c] ^= z[t]
            elif k == "N":
                inject(self, op[1], op[2], op[3])
            elif k == "H":
                q = op[1]
                tmp = x[q].copy()
                x[q] = z[q]
                z[q] = tmp
            elif k == "R":
                x[op[1]] = 0
                z[op[1]] = 0
            elif k == "M":
                rec[op[2]] = x[op[1]]
        ix = {q: i for i, q in enumerate(cc.qubits)}
        for q, r in cc.final_x.items():
            rec[r] = x[ix[q]]
        for q, r in cc.final_z.items():
            rec[r] = z[ix[q]]

    def parities(self, groups) -> np.ndarray:
        out = np.zeros((len(groups), self.words), dtype=np.uint64)
        for i, g in enumerate(groups):
            for r in g:
                out[i] ^= self.rec[r]
        return out

    def unpack(self, packed: np.ndarray) -> np.ndarray:
        """(rows, words) packed -> (columns, rows) bool."""
        b = np.unpackbits(packed.view(np.uint8).reshape(packed.shape[0], -1), axis=1, bitorder="little")
        return b[:, : self.columns].T.astype(bool)


def _mask(cols: np.ndarray, words: int) -> np.ndarray:
    m = np.zeros(words, dtype=np.uint64)
    np.bitwise_xor.at(m, cols >> 6, np.left_shift(np.uint64(1), (cols & 63).astype(np.uint64)))
    return m


def fault_outcomes(kind: int):
    """Nontrivial Pauli outcomes of a noise channel as per-qubit (x, z) bits, with relative weight."""
    if kind == DEP1:
        return [((p,), 1 / 3) for p in _P1]
    if kind == DEP2:
        return [(p, 1 / 15) for p in _P2]
    return [(((1, 0),), 1.0)]


# fault enumeration


@dataclass
class FaultTable:
    noise_index: np.ndarray  # fault -> noise op
    weight: np.ndarray  # relative probability within its channel
    paulis: list
    detectors: list[tuple[int, ...]]
    observables: np.ndarray  # bit mask per fault


def enumerate_faults(cc: CycleCircuit) -> FaultTable:
    """Every Pauli outcome of every noisy operation, propagated as its own column."""
    starts, flat = [], []
    for i, (kind, qs, cls) in enumerate(cc.noise):
        starts.append(len(flat))
        for pauli, w in fault_outcomes(kind):
            flat.append((i, w, pauli))
    n = len(flat)
    frame = _Frame(len(cc.qubits), cc.n_records, n)
    starts.append(n)

    def inject(fr, kind, qs, idx):
        for col in range(starts[idx], starts[idx + 1]):
            word, bit = col >> 6, np.uint64(1) << np.uint64(col & 63)
            for q, (xb, zb) in zip(qs, flat[col][2]):
                if xb:
                    fr.x[q, word] ^= bit
                if zb:
                    fr.z[q, word] ^= bit

    frame.run(cc, inject)
    dets = frame.unpack(frame.parities(cc.detectors))
    obs = frame.unpack(frame.parities(cc.observables))
    obs_mask = (obs * (1 << np.arange(obs.shape[1]))).sum(axis=1).astype(np.int64)
    det_lists = [tuple(np.flatnonzero(row).tolist()) for row in dets]
    return FaultTable(
        np.array([f[0] for f in flat], dtype=np.int64),
        np.array([f[1] for f in flat]),
        [f[2] for f in flat],
        det_lists,
        obs_mask,
    )


def _xor_prob(a: float, b: float) -> float:
    return a * (1 - b) + b * (1 - a)


@dataclass
class DecodingGraph:
    """One matching graph per error sector; sector k owns observable bit k."""

    n_det: int
    members: list[np.ndarray]
    edges: list[dict[tuple[int, ...], tuple[float, int]]]
    undetectable_logical: float
    matchers: list[MatchingGraph]

    def decode(self, dets: np.ndarray, exact_limit: int = EXACT_LIMIT) -> np.ndarray:
        """dets: (shots, n_det) bool -> predicted observable masks."""
        pred = np.zeros(dets.shape[0], dtype=np.int64)
        sparse = []
        for idx in self.members:
            sub = dets[:, idx]
            indptr = np.zeros(sub.shape[0] + 1, dtype=np.int64)
            np.cumsum(sub.sum(axis=1), out=indptr[1:])
            sparse.append((indptr, np.nonzero(sub)[1].astype(np.int64)))
        for k, m in enumerate(self.matchers):
            (indptr, flat), (oi, of) = sparse[k], sparse[1 - k]
            pred |= m.decode_sparse(indptr, flat, exact_limit, oi, of) & (1 << k)
        return pred


def _weight(p: float) -> float:
    p = min(max(p, 1e-15), 0.5 - 1e-12)
    return math.log((1 - p) / p)


def _merge(slot: dict[int, float]) -> tuple[float, int]:
    """Total probability of a signature and its likeliest observable."""
    total = 0.0
    for p in slot.values():
        total = _xor_prob(total, p)
    return total, max(slot, key=lambda o: (slot[o], -o))


def build_decoding_graph(cc: CycleCircuit, faults: FaultTable, noise: NoiseModel) -> DecodingGraph:
    """Per-sector matching graphs.

    Faults that fire no flag are merged by signature into edges; larger
    signatures are folded into the edges they decompose into.  Faults that fire
    flags become edges conditioned on those flags, priced relative to the
    flags firing on their own.
    """
    classes = [noise.prob(cls) for _, _, cls in cc.noise]
    sectors = np.array(cc.sectors)
    members = [np.flatnonzero(sectors == k) for k in (0, 1)]
    local = [{int(g): i for i, g in enumerate(m)} for m in members]
    all_edges, matchers = [], []
    undetectable = 0.0
    for k in (0, 1):
        flags = frozenset(local[k][j] for j, info in enumerate(cc.det_info) if info[0] == "flag" and j in local[k])
        merged: dict[tuple[int, ...], dict[int, float]] = {}
        flagged: dict[tuple[int, ...], dict[tuple[int, ...], dict[int, float]]] = {}
        full: dict[tuple[int, ...], dict[int, float]] = {}
        partners: dict[tuple[int, ...], set[tuple[int, ...]]] = {}
        for i, dets in enumerate(faults.detectors):
            p = classes[faults.noise_index[i]] * faults.weight[i]
            if p <= 0:
                continue
            part = tuple(local[k][j] for j in dets if j in local[k])
            o = int(faults.observables[i]) & (1 << k)
            if not part and not o:
                continue
            if len(part) > 2:
                slot = full.setdefault(part, {})
                slot[o] = _xor_prob(slot.get(o, 0.0), p)
                partners.setdefault(part, set()).add(tuple(local[1 - k][j] for j in dets if j in local[1 - k]))
            req = tuple(q for q in part if q in flags)
            if req:
                rest = tuple(q for q in part if q not in flags)
                slot = flagged.setdefault(req, {}).setdefault(rest, {})
            else:
                slot = merged.setdefault(part, {})
            slot[o] = _xor_prob(slot.get(o, 0.0), p)
        edges: dict[tuple[int, ...], tuple[float, int]] = {}
        hyper = []
        for dets, by_obs in merged.items():
            if not dets:
                undetectable = _xor_prob(undetectable, sum(p for o, p in by_obs.items() if o))
                continue
            total, obs = _merge(by_obs)
            if len(dets) <= 2:
                edges[dets] = (total, obs)
            else:
                hyper.append((dets, total, obs))
        for dets, p, obs in sorted(hyper, key=lambda h: (len(h[0]), h[0])):
            found = _decompose(dets, edges, obs) or _decompose(dets, edges, obs, allow_new=True)
            parts, new = found or ([dets[i:i + 2] for i in range(0, len(dets), 2)], [])
            rest = obs
            for part in parts:
                if part not in new and part in edges:
                    rest ^= edges[part][1]
            for j, part in enumerate(new):
                edges[part] = (p, rest if j == len(new) - 1 else 0)
            for part in parts:
                if part not in new and part in edges:
                    q, o = edges[part]
                    edges[part] = (_xor_prob(q, p), o)
        conditional = {}
        for req, by_rest in flagged.items():
            alone = _weight(_merge(by_rest[()])[0]) if () in by_rest else 0.0
            items = []
            for rest, by_obs in sorted(by_rest.items()):
                if not rest:
                    continue
                p, obs = _merge(by_obs)
                w = max(_weight(p) - alone, 1e-3)
                if len(rest) <= 2:
                    items.append((rest, w, obs))
                    continue
                found = _decompose(rest, edges, obs)
                parts = found[0] if found else [rest[i:i + 2] for i in range(0, len(rest), 2)]
                left = obs
                for part in parts[:-1]:
                    o = edges[part][1] if part in edges else 0
                    items.append((part, w, o))
                    left ^= o
                items.append((parts[-1], w, left))
            if items:
                conditional[req] = items
        known = {dets: _merge(by_obs)[1] for dets, by_obs in full.items()}
        all_edges.append(edges)
        matchers.append(MatchingGraph(len(members[k]), edges, known, {d: sorted(partners[d]) for d in known},
                                      flags, conditional))
    return DecodingGraph(cc.n_det, members, all_edges, undetectable, matchers)


def _decompose(dets: tuple[int, ...], edges, obs: int, allow_new: bool = False):
    """Split dets into singleton/pair parts whose observables XOR to obs.

    Without allow_new every part must be an existing edge; with it, parts may
    be new edges, the fewest of them, and the last new part absorbs the
    observable remainder.  Ties prefer fewer parts, then the likelier split.
    Returns (parts, new parts) or None.
    """
    best = None

    def rec(rest, acc, new, o, w):
        nonlocal best
        key = (len(new), len(acc), w)
        if best is not None and key >= best[0]:
            return
        if not rest:
            if o == obs or new:
                best = (key, list(acc), list(new))
            return
        a = rest[0]
        options = [(a, b) for b in rest[1:]] + [(a,)]
        for part in options:
            e = edges.get(part)
            left = tuple(q for q in rest if q not in part)
            if e is not None:
                rec(left, acc + [part], new, o ^ e[1], w - math.log(e[0]))
            elif allow_new:
                rec(left, acc + [part], new + [part], o, w)

    if len(dets) <= 12:
        rec(dets, [], [], 0, 0.0)
    if best is None:
        return None
    _, parts, new = best
    return parts, new


# sampling


def _sample_batch(cc: CycleCircuit, noise: NoiseModel, shots: int, rng: np.random.Generator):
    frame = _Frame(len(cc.qubits), cc.n_records, shots)
    probs = [noise.prob(cls) for _, _, cls in cc.noise]
    words = frame.words

    def inject(fr, kind, qs, idx):
        p = probs[idx]
        if p <= 0:
            return
        k = rng.binomial(shots, p)
        if k == 0:
            return
        cols = rng.choice(shots, size=k, replace=False)
        if kind == XFLIP:
            fr.x[qs[0]] ^= _mask(cols, words)
            return
        if kind == DEP1:
            pick = rng.integers(1, 4, size=k)
            xs = cols[np.isin(pick, (1, 2))]
            zs = cols[np.isin(pick, (2, 3))]
            if len(xs):
                fr.x[qs[0]] ^= _mask(xs, words)
            if len(zs):
                fr.z[qs[0]] ^= _mask(zs, words)
            return
        pick = rng.integers(1, 16, size=k)
        for j, q in enumerate(qs):
            part = (pick >> (2 * (1 - j))) & 3
            xs = cols[np.isin(part, (1, 2))]
            zs = cols[np.isin(part, (2, 3))]
            if len(xs):
                fr.x[q] ^= _mask(xs, words)
            if len(zs):
                fr.z[q] ^= _mask(zs, words)

    frame.run(cc, inject)
    dets = frame.unpack(frame.parities(cc.detectors))
    obs = frame.unpack(frame.parities(cc.observables))
    obs_mask = (obs * (1 << np.arange(obs.shape[1]))).sum(axis=1).astype(np.int64)
    return dets, obs_mask


@dataclass
class ShotResult:
    shots: int
    logical_errors: int

    @property
    def rate(self) -> float:
        return self.logical_errors / self.shots if self.shots else 0.0

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return wilson(self.logical_errors, self.shots, z)


def wilson(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ph = k / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


BATCH = 4096


def run_shots(cc: CycleCircuit, noise: NoiseModel, shots: int, seed: int, graph: DecodingGraph | None = None,
              faults: FaultTable | None = None) -> ShotResult:
    """Sample, decode and count logical failures; batches use seed-derived streams."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if noise.p_gate == 0 and noise.p_idle == 0:
        return ShotResult(shots, 0)
    if graph is None:
        graph = build_decoding_graph(cc, faults or enumerate_faults(cc), noise)
    seq = np.random.SeedSequence(seed)
    errors = 0
    n_batches = (shots + BATCH - 1) // BATCH
    for b, child in enumerate(seq.spawn(n_batches)):
        n = min(BATCH, shots - b * BATCH)
        rng = np.random.default_rng(child)
        dets, actual = _sample_batch(cc, noise, n, rng)
        pred = graph.decode(dets)
        errors += int(np.count_nonzero(pred != actual))
    return ShotResult(shots, errors)


def inject_single(cc: CycleCircuit, noise_index: int, pauli) -> tuple[tuple[int, ...], int]:
    """Simulate one deterministic fault directly; returns (detectors, observable mask)."""
    frame = _Frame(len(cc.qubits), cc.n_records, 1)

    def inject(fr, kind, qs, idx):
        if idx != noise_index:
            return
        for q, (xb, zb) in zip(qs, pauli):
            if xb:
                fr.x[q, 0] ^= np.uint64(1)
            if zb:
                fr.z[q, 0] ^= np.uint64(1)

    frame.run(cc, inject)
    dets = frame.unpack(frame.parities(cc.detectors))[0]
    obs = frame.unpack(frame.parities(cc.observables))[0]
    return tuple(np.flatnonzero(dets).tolist()), int(sum(int(b) << i for i, b in enumerate(obs)))


def single_fault_failures(cc: CycleCircuit, faults: FaultTable, graph: DecodingGraph) -> list[int]:
    """Indices of single faults whose signature decodes to the wrong observable."""
    dets = np.zeros((len(faults.detectors), cc.n_det), dtype=bool)
    for i, d in enumerate(faults.detectors):
        dets[i, list(d)] = True
    pred = graph.decode(dets)
    return np.flatnonzero(pred != faults.observables).tolist()


def check_round(schedule: Schedule, layout) -> list[str]:
    """Noiseless check that one merged cycle measures every stabilizer and keeps the code.

    Each syndrome measurement and each stabilizer/logical after the cycle is
    traced back to the cycle start, where it must be a data stabilizer times
    Z on freshly reset qubits.
    """
    data = set(layout.data_qubits)
    layers, meas = round_layers(schedule, sorted(data))
    stabs = {r.stab_id: (r.stab_type, set(r.data)) for r in layout.rects}
    problems = []

    def trace(p: Pauli, upto: int) -> Pauli | None:
        p = p.copy()
        for layer in reversed(layers[:upto]):
            for g in layer:
                if g.name == "R":
                    q = g.qubits[0]
                    if q in p.x:
                        return None
                    p.z.discard(q)
                elif g.name in ("H", "CX"):
                    p.apply(g)
        return p

    for t, q, sid, role in meas:
        p = trace(Pauli(z=[q]), t)
        typ, sup = stabs[sid]
        want = {} if role == "flag" else {d: typ for d in sup}
        if p is None or p.on(p.support()) != want or p.sign:
            problems.append(f"{role} qubit {q} of stabilizer {sid} does not read {want or 'zero'}")
    zl, xl = logical_supports(layout)
    keep = [(f"stabilizer {sid}", {d: typ for d in sup}) for sid, (typ, sup) in stabs.items()]
    keep += [("Z_L", {d: "Z" for d in zl}), ("X_L", {d: "X" for d in xl})]
    for name, ops in keep:
        p = trace(Pauli.from_dict(ops), len(layers))
        if p is None or p.on(p.support()) != ops or p.sign:
            problems.append(f"{name} is not preserved by the cycle")
    return problems
