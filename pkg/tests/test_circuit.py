import random

import pytest
from hypothesis import given, settings, strategies as st

from surfsynth import circuit
from surfsynth.circuit import CircuitError, Gate, Pauli

from .conftest import CONFIGS, synthesized


def all_circuits(name, mode, d=5):
    res = synthesized(name, d, mode)
    for e in res.schedule.entries():
        rect = res.layout.rects[e.stab_id]
        for i in range(len(e.candidates)):
            yield rect, e.circuit_for(i)


@pytest.mark.parametrize("name,mode", CONFIGS)
def test_every_candidate_circuit_verifies(name, mode):
    n = 0
    for rect, c in all_circuits(name, mode):
        assert circuit.verify_stabilizer(c, circuit.stabilizer_of(rect.stab_type, rect.data)) == []
        n += 1
    assert n >= 24


@pytest.mark.parametrize("name,mode", CONFIGS)
def test_depth_and_cnot_formulas(name, mode):
    for rect, c in all_circuits(name, mode):
        f = len(circuit.cascade_schedule(c.tree, synthesized(name, 5, mode).device.key))
        m = c.metrics()
        assert m["cnot_count"] == c.tree.w + 2 * (c.tree.b - 1)
        if c.stab_type == "X" or c.tree.b > 1:
            assert m["depth"] == 4 + 2 * f + c.tree.w
        else:
            assert m["depth"] == 2 + c.tree.w
        assert c.measured == sorted(c.tree.bridges)


def test_data_couplings_follow_coupling_order():
    for rect, c in all_circuits("square", "pair3", 3):
        coupled = []
        for _, g in c.gates():
            if g.name == "CX":
                for q in g.qubits:
                    if q in rect.data:
                        coupled.append(q)
        assert tuple(coupled) == rect.data


@pytest.mark.parametrize("name,mode", [("square", "pair3"), ("heavy-hexagon", "pair3")])
def test_text_roundtrip(name, mode):
    for _, c in all_circuits(name, mode, 3):
        assert circuit.parse_text(c.text()) == [sorted(l, key=lambda g: g.qubits) for l in c.layers]


@pytest.mark.parametrize("text", ["CX 1", "FOO 3", "M a"])
def test_parse_errors(text):
    with pytest.raises((CircuitError, ValueError)):
        circuit.parse_text(text)


def test_verifier_catches_broken_circuits():
    rect, c = next(iter(all_circuits("heavy-square", "pair3", 3)))
    stab = circuit.stabilizer_of(rect.stab_type, rect.data)
    rng = random.Random(3)
    caught = 0
    for _ in range(20):
        layers = [list(l) for l in c.layers]
        cx = [(i, j) for i, l in enumerate(layers) for j, g in enumerate(l) if g.name == "CX"]
        i, j = rng.choice(cx)
        del layers[i][j]
        broken = circuit.MeasurementCircuit(layers, c.stab_type, c.tree, c.data_order)
        caught += bool(circuit.verify_stabilizer(broken, stab))
    assert caught == 20
    other = "Z" if rect.stab_type == "X" else "X"
    assert circuit.verify_stabilizer(c, circuit.stabilizer_of(other, rect.data))


def test_bad_inputs():
    rect, c = next(iter(all_circuits("square", "pair3", 3)))
    with pytest.raises(CircuitError):
        circuit.gen_measurement_circuit("Y", c.tree)


PAULI = st.dictionaries(st.integers(0, 4), st.sampled_from("XYZ"), max_size=5)


@settings(max_examples=200, deadline=None)
@given(PAULI, PAULI)
def test_commutation_matches_pairwise_count(a, b):
    anti = sum(1 for q in set(a) & set(b) if a[q] != b[q])
    assert Pauli.from_dict(a).commutes(Pauli.from_dict(b)) == (anti % 2 == 0)


@settings(max_examples=200, deadline=None)
@given(PAULI, st.lists(st.tuples(st.sampled_from(["H", "CX"]), st.integers(0, 4), st.integers(0, 4)), max_size=8))
def test_clifford_conjugation_preserves_commutation(a, gates):
    layers = [[Gate("H", (p,)) if n == "H" else Gate("CX", (p, q))] for n, p, q in gates if n == "H" or p != q]
    b = {0: "X", 1: "Z"}
    pa, pb = Pauli.from_dict(a), Pauli.from_dict(b)
    before = pa.commutes(pb)
    assert circuit.backpropagate(layers, pa).commutes(circuit.backpropagate(layers, pb)) == before
