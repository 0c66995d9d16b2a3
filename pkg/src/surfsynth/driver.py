"""End-to-end synthesis, reporting and simulation sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import arch as archmod
from . import sim
from .allocate import DataLayout, InfeasibleError, allocate_data_qubits, feasibility_check, footprint, layout_score, viable_bases
from .arch import DeviceGraph
from .circuit import stabilizer_of, to_text, verify_stabilizer
from .schedule import Schedule, synthesize_schedule, total_cycle_time

CSV_COLUMNS = ["arch", "mode", "distance", "p_gate", "shots", "logical_errors", "rate", "ci_low", "ci_high"]

# the configurations reported as the architecture table
STANDARD_CONFIGS = (
    ("heavy-square", "pair3"),
    ("heavy-hexagon", "pair3"),
    ("square", "pair3"),
    ("hexagon", "pair3"),
    ("square", "center4"),
    ("heavy-square", "center4"),
)


@dataclass
class Synthesis:
    arch: str
    device: DeviceGraph
    size: tuple[int, int] | None
    layout: DataLayout
    schedule: Schedule
    report: dict

    def to_json(self) -> str:
        doc = {
            "arch": self.arch,
            "patch": list(self.size) if self.size else None,
            "report": self.report,
            "layout": self.layout.to_dict(self.device),
            "schedule": self.schedule.to_dict(),
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _sizes(arch: str, d: int, cap: int):
    n = 3
    while archmod.gen_arch(arch, n, n).n < 2 * d * d - 1:
        n += 1
    r, c = n, n
    while max(r, c) <= cap:
        yield r, c
        if r == c:
            r += 1
        else:
            c += 1


def grow_and_allocate(arch: str, d: int, mode: str, cap: int | None = None):
    """Smallest patch per viable plaquette pattern; the smallest footprint wins.

    Patches grow from a qubit-count lower bound, adding a row and then a
    column at a time.
    """
    cap = cap or 4 * d + 8
    bases = viable_bases(archmod.gen_arch(arch, 14, 14), mode)
    if not bases:
        raise InfeasibleError(f"{arch} has no plaquette pattern for a surface code in {mode} mode")
    best = None
    for i, basis in enumerate(bases):
        for size in _sizes(arch, d, cap):
            g = archmod.gen_arch(arch, *size)
            try:
                layout = allocate_data_qubits(g, d, mode, bases=[basis])
            except InfeasibleError:
                continue
            score = (layout_score(layout, g), i)
            if best is None or score < best[0]:
                best = (score, g, size, layout)
            break
    if best is None:
        raise InfeasibleError(f"no {arch} patch up to {cap}x{cap} sites hosts a distance-{d} code in {mode} mode")
    return best[1], best[2], best[3]


def _mean(xs):
    return round(sum(xs) / len(xs), 4) if xs else None


def build_report(g: DeviceGraph, layout: DataLayout, s: Schedule, arch: str) -> dict:
    per = []
    for e in sorted(s.entries(), key=lambda e: e.stab_id):
        m = e.circuit.metrics()
        per.append({
            "id": e.stab_id,
            "type": e.stab_type,
            "weight": e.tree.w,
            "syndrome": e.tree.syndrome,
            "bridge_qubits": m["bridge_qubit_count"],
            "cnot": m["cnot_count"],
            "depth": m["depth"],
        })

    def avg(rows):
        return {k: _mean([r[k] for r in rows]) for k in ("bridge_qubits", "cnot", "depth")}

    xs = [r for r in per if r["type"] == "X"]
    trees = {e.stab_id: e.tree for e in s.entries()}
    used = footprint(layout, g, trees)
    data = layout.data_qubits
    bridges = set().union(*(t.bridges for t in trees.values())) & used
    total = len(used)
    unused = total - len(data) - len(bridges)
    pct = lambda k: round(100.0 * k / total, 1) if total else 0.0
    return {
        "arch": arch,
        "mode": layout.mode,
        "distance": layout.distance,
        "basis": [list(v) for v in layout.basis],
        "stabilizers": per,
        "x_average": avg([r for r in xs if r["weight"] == 4]),
        "x_average_all": avg(xs),
        "total_cycle_time": total_cycle_time(s),
        "partitions": len(s.partitions),
        "utilization": {
            "total": total,
            "data": len(data),
            "bridge": len(bridges),
            "unused": unused,
            "data_pct": pct(len(data)),
            "bridge_pct": pct(len(bridges)),
            "unused_pct": pct(unused),
        },
    }


def synth(arch: str, d: int, mode: str = "pair3", device: DeviceGraph | None = None, verify: bool = True) -> Synthesis:
    """Allocate, build trees and circuits, schedule and report."""
    if device is None:
        g, size, layout = grow_and_allocate(arch, d, mode)
    else:
        g, size = device, None
        layout = allocate_data_qubits(g, d, mode)
    if verify:
        problems = feasibility_check(layout, g)
        if problems:
            raise InfeasibleError("; ".join(problems))
    s = synthesize_schedule(layout.rects, g.key)
    if verify:
        for e in s.entries():
            rect = layout.rects[e.stab_id]
            bad = verify_stabilizer(e.circuit, stabilizer_of(e.stab_type, rect.data))
            if bad:
                raise RuntimeError(f"stabilizer {e.stab_id}: {bad[0]}")
    return Synthesis(arch, g, size, layout, s, build_report(g, layout, s, arch))


def export_circuit(res: Synthesis) -> str:
    """One syndrome-extraction cycle as text, partitions back to back."""
    layers, _ = sim.round_layers(res.schedule, sorted(res.layout.data_qubits))
    return to_text(layers)


def table_rows(results: list[Synthesis]) -> list[dict]:
    rows = []
    for r in results:
        rep = r.report
        rows.append({
            "arch": r.arch,
            "mode": rep["mode"],
            "distance": rep["distance"],
            "bridge": rep["x_average"]["bridge_qubits"],
            "cnot": rep["x_average"]["cnot"],
            "depth": rep["x_average"]["depth"],
            "tot": rep["total_cycle_time"],
            "total_qubits": rep["utilization"]["total"],
            "data_pct": rep["utilization"]["data_pct"],
            "bridge_pct": rep["utilization"]["bridge_pct"],
            "unused_pct": rep["utilization"]["unused_pct"],
        })
    return rows


def format_table(rows: list[dict]) -> str:
    head = f"{'arch':<14}{'mode':<9}{'d':>3}{'bridge':>8}{'cnot':>7}{'depth':>7}{'tot':>5}{'total':>7}{'data%':>7}{'bridge%':>9}{'unused%':>9}"
    out = [head]
    for r in rows:
        out.append(
            f"{r['arch']:<14}{r['mode']:<9}{r['distance']:>3}{r['bridge']:>8}{r['cnot']:>7}{r['depth']:>7}{r['tot']:>5}"
            f"{r['total_qubits']:>7}{r['data_pct']:>7}{r['bridge_pct']:>9}{r['unused_pct']:>9}"
        )
    return "\n".join(out) + "\n"


def rows_to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in columns})
    return buf.getvalue()


# simulation


@dataclass
class Experiment:
    """A synthesized code wired for simulation, with its fault table cached."""

    arch: str
    mode: str
    distance: int
    circuit: sim.CycleCircuit
    faults: sim.FaultTable

    @classmethod
    def build(cls, arch: str, d: int, mode: str, rounds: int | None = None):
        res = synth(arch, d, mode, verify=False)
        cc = sim.build_cycle_circuit(res.schedule, res.layout, rounds)
        return cls(arch, mode, d, cc, sim.enumerate_faults(cc))

    def run(self, p_gate: float, shots: int, seed: int, p_idle: float = 0.0002) -> dict:
        noise = sim.NoiseModel(p_gate, p_idle)
        r = sim.run_shots(self.circuit, noise, shots, seed, faults=self.faults)
        lo, hi = r.interval()
        return {
            "arch": self.arch,
            "mode": self.mode,
            "distance": self.distance,
            "p_gate": p_gate,
            "shots": shots,
            "logical_errors": r.logical_errors,
            "rate": r.rate,
            "ci_low": lo,
            "ci_high": hi,
        }


def point_seed(seed: int, index: int) -> int:
    """Seed of the index-th sweep point, independent of execution order."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def _run_group(args):
    arch, mode, d, points, shots, seed, p_idle = args
    exp = Experiment.build(arch, d, mode)
    out = []
    for index, p in points:
        try:
            out.append((index, exp.run(p, shots, point_seed(seed, index), p_idle)))
        except Exception as exc:  # a failed point is reported, the sweep goes on
            out.append((index, {"arch": arch, "mode": mode, "distance": d, "p_gate": p, "error": str(exc)}))
    return out


def sweep(configs, distances, p_values, shots: int, seed: int, p_idle: float = 0.0002, workers: int = 1) -> list[dict]:
    """Logical error rates over a grid; rows come back in grid order."""
    groups = []
    index = 0
    for arch, mode in configs:
        for d in distances:
            pts = []
            for p in p_values:
                pts.append((index, p))
                index += 1
            groups.append((arch, mode, d, pts, shots, seed, p_idle))
    results = {}
    if workers > 1 and len(groups) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_group, groups):
                results.update(part)
    else:
        for grp in groups:
            try:
                results.update(_run_group(grp))
            except InfeasibleError as exc:
                for i, p in grp[3]:
                    results[i] = {"arch": grp[0], "mode": grp[1], "distance": grp[2], "p_gate": p, "error": str(exc)}
    return [results[i] for i in sorted(results)]


@dataclass
class Threshold:
    arch: str
    mode: str
    value: float | None
    low: float | None
    high: float | None

    @property
    def crossed(self) -> bool:
        return self.value is not None


def _crossing(ps, lo_curve, hi_curve):
    """First p where log(hi_curve) - log(lo_curve) turns from negative to non-negative."""
    diff = [math.log(b) - math.log(a) for a, b in zip(lo_curve, hi_curve)]
    for i in range(len(ps) - 1):
        if diff[i] < 0 <= diff[i + 1]:
            x0, x1 = math.log(ps[i]), math.log(ps[i + 1])
            t = diff[i] / (diff[i] - diff[i + 1])
            return math.exp(x0 + t * (x1 - x0))
    return None


def estimate_threshold(rows: list[dict], arch: str, mode: str, small: int = 3, large: int = 5) -> Threshold:
    """Crossing of the small- and large-distance curves, log-linear in both axes.

    The interval comes from the same crossing on the 95% binomial bounds.
    """
    pick = lambda d: {r["p_gate"]: r for r in rows if r["arch"] == arch and r["mode"] == mode and r["distance"] == d and "error" not in r}
    a, b = pick(small), pick(large)
    ps = sorted(p for p in set(a) & set(b) if p > 0)
    if len(ps) < 2:
        return Threshold(arch, mode, None, None, None)
    floor = lambda r: max(r["rate"], 0.5 / r["shots"])
    ra = [floor(a[p]) for p in ps]
    rb = [floor(b[p]) for p in ps]
    mid = _crossing(ps, ra, rb)
    if mid is None:
        return Threshold(arch, mode, None, None, None)
    # d=large pessimistic against d=small optimistic crosses first, and vice versa
    lo = _crossing(ps, [max(a[p]["ci_low"], 1e-12) for p in ps], [max(b[p]["ci_high"], 1e-12) for p in ps])
    hi = _crossing(ps, [max(a[p]["ci_high"], 1e-12) for p in ps], [max(b[p]["ci_low"], 1e-12) for p in ps])
    lo = ps[0] if lo is None else min(lo, mid)
    hi = ps[-1] if hi is None else max(hi, mid)
    return Threshold(arch, mode, mid, lo, hi)


def plot_sweep(rows: list[dict], path) -> None:
    """Log-log logical error rate against p_gate, one line per (arch, mode, d)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    keys = sorted({(r["arch"], r["mode"], r["distance"]) for r in rows if "error" not in r})
    for arch, mode, d in keys:
        pts = sorted((r["p_gate"], r["rate"]) for r in rows
                     if "error" not in r and (r["arch"], r["mode"], r["distance"]) == (arch, mode, d) and r["p_gate"] > 0 and r["rate"] > 0)
        if pts:
            ax.plot([p for p, _ in pts], [q for _, q in pts], marker="o", label=f"{arch} {mode} d={d}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("physical error rate p_gate")
    ax.set_ylabel("logical error rate")
    if keys:
        ax.legend(fontsize=7)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)


def plot_utilization(rows: list[dict], path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    labels = [f"{r['arch']}\n{r['mode']}" for r in rows]
    left = np.zeros(len(rows))
    for key, name in (("data_pct", "data"), ("bridge_pct", "bridge"), ("unused_pct", "unused")):
        vals = np.array([r[key] for r in rows], dtype=float)
        ax.barh(labels, vals, left=left, label=name)
        left += vals
    ax.set_xlabel("share of patch qubits (%)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)
