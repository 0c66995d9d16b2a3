import json

import pytest
from hypothesis import given, settings, strategies as st

from surfsynth import arch
from surfsynth.arch import ArchError, DeviceGraph, QubitRecord


def test_square_counts_and_degrees():
    g = arch.gen_arch("square", 4, 5)
    assert g.n == 20
    assert len(g.edges) == 4 * 4 + 5 * 3
    assert max(g.degree(q) for q in range(g.n)) == 4
    assert g.pos(0) == (0, 0) and g.pos(1) == (2, 0)


def test_hexagon_is_degree_three():
    g = arch.gen_arch("hexagon", 4, 6)
    assert max(g.degree(q) for q in range(g.n)) == 3
    assert all(g.degree(q) >= 1 for q in range(g.n))


@pytest.mark.parametrize("base", ["square", "hexagon"])
def test_heavy_adds_one_qubit_per_edge(base):
    g = arch.gen_arch(base, 4, 4)
    h = arch.gen_arch("heavy-" + base, 4, 4)
    assert h.n == g.n + len(g.edges)
    assert len(h.edges) == 2 * len(g.edges)
    mids = [q for q in range(h.n) if h.pos(q)[0] % 2 or h.pos(q)[1] % 2]
    assert len(mids) == len(g.edges)
    assert all(h.degree(q) == 2 for q in mids)


def test_ids_follow_row_major_order():
    g = arch.gen_arch("heavy-square", 3, 3)
    keys = [g.key(q) for q in range(g.n)]
    assert keys == sorted(keys)


@pytest.mark.parametrize("name,rows,cols", [("square", 1, 4), ("square", 3, 0), ("hexagon", 2, 2), ("nope", 3, 3)])
def test_invalid_dimensions(name, rows, cols):
    with pytest.raises(ArchError):
        arch.gen_arch(name, rows, cols)


def test_invariants_rejected():
    q = (QubitRecord(0, 0, 0), QubitRecord(1, 2, 0), QubitRecord(2, 4, 0))
    with pytest.raises(ArchError, match="disconnected"):
        DeviceGraph("x", q, frozenset({(0, 1)}))
    with pytest.raises(ArchError, match="share coordinate"):
        DeviceGraph("x", (QubitRecord(0, 0, 0), QubitRecord(1, 0, 0)), frozenset({(0, 1)}))
    with pytest.raises(ArchError, match="self-loop"):
        DeviceGraph("x", q[:1], frozenset({(0, 0)}))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(arch.ARCHS), st.integers(2, 7), st.integers(3, 7))
def test_json_roundtrip(name, rows, cols):
    g = arch.gen_arch(name, rows, cols)
    text = arch.dumps(g)
    h = arch.loads(text)
    assert h == g
    assert arch.dumps(h) == text


def test_save_load(tmp_path):
    g = arch.gen_arch("heavy-hexagon", 3, 4)
    p = tmp_path / "dev.json"
    arch.save(g, p)
    assert arch.load(p) == g


@pytest.mark.parametrize("text", [
    "not json",
    json.dumps({"name": "x", "qubits": [{"id": 0, "x": 0}], "edges": []}),
    json.dumps({"name": "x", "qubits": [{"id": 0, "x": 0, "y": 0}, {"id": 1, "x": 2, "y": 0}], "edges": [[0, 5]]}),
    json.dumps({"name": "x", "qubits": [{"id": 0, "x": 0.5, "y": 0}], "edges": []}),
])
def test_loads_rejects_bad_files(text):
    with pytest.raises(ArchError):
        arch.loads(text)
