import pytest

from surfsynth import allocate, arch
from surfsynth.allocate import InfeasibleError

from .conftest import CONFIGS, synthesized


@pytest.mark.parametrize("name,mode", CONFIGS)
@pytest.mark.parametrize("d", [3, 5])
def test_layout_counts_and_feasibility(name, mode, d):
    res = synthesized(name, d, mode)
    layout, g = res.layout, res.device
    assert len(layout.data_map) == d * d
    assert len(layout.data_qubits) == d * d
    assert len(layout.rects) == d * d - 1
    assert allocate.feasibility_check(layout, g) == []
    x = [r for r in layout.rects if r.stab_type == "X"]
    z = [r for r in layout.rects if r.stab_type == "Z"]
    assert len(x) == len(z) == (d * d - 1) // 2
    assert sum(r.weight == 2 for r in layout.rects) == 2 * (d - 1)


@pytest.mark.parametrize("name,mode", CONFIGS)
def test_same_type_trees_are_disjoint_and_avoid_data(name, mode):
    res = synthesized(name, 5, mode)
    data = res.layout.data_qubits
    for t in "XZ":
        used = set()
        for r in res.layout.rects:
            if r.stab_type != t:
                continue
            tree = r.candidates[0]
            assert not (tree.bridges & data)
            assert not (tree.bridges & used)
            used |= tree.bridges
            assert sorted(tree.leaves) == sorted(r.data)


def test_data_grid_is_a_lattice_image():
    res = synthesized("square", 3)
    (ux, uy), (vx, vy) = res.layout.basis
    ox, oy = res.layout.origin
    for (r, c), q in res.layout.data_map.items():
        assert res.device.pos(q) == (ox + r * vx + c * ux, oy + r * vy + c * uy)


def test_stabilizer_pattern():
    # weight-2 X checks on the top and bottom edges, Z checks on the sides
    res = synthesized("square", 5)
    rows = {(r, c) for (r, c) in res.layout.data_map}
    for rect in res.layout.rects:
        pts = [rc for rc, q in res.layout.data_map.items() if q in rect.data]
        if rect.weight == 2:
            rs = {p[0] for p in pts}
            cs = {p[1] for p in pts}
            if rect.stab_type == "X":
                assert rs in ({0}, {4})
            else:
                assert cs in ({0}, {4})
    assert len(rows) == 25


def test_hook_safe_order():
    data_map = {(0, 0): 10, (0, 1): 11, (1, 0): 12, (1, 1): 13}
    cells = list(data_map)
    assert allocate.hook_safe_order("X", cells, data_map) == (10, 11, 12, 13)
    assert allocate.hook_safe_order("Z", cells, data_map) == (10, 12, 11, 13)


def test_assign_roles():
    roles = allocate.assign_roles({1: (2, 0), 2: (0, 2), 3: (4, 2), 4: (2, 4)})
    assert roles == {"a": 1, "b": 2, "c": 3, "d": 4}
    two = allocate.assign_roles({5: (0, 0), 6: (2, 0)})
    assert two == {"b": 5, "c": 6}


@pytest.mark.parametrize("name,mode", CONFIGS)
def test_bridge_rectangles_contain_their_anchors(name, mode):
    g = arch.gen_arch(name, 5, 6)
    rects = allocate.build_bridge_rectangles(g, mode)
    assert rects
    for r in rects:
            x0, y0, x1, y1 = r.bounds
            for a in r.anchors:
                x, y = g.pos(a)
                assert x0 <= x <= x1 and y0 <= y <= y1
                assert g.degree(a) >= 3


def test_footprint_contains_data_and_trees():
    res = synthesized("heavy-square", 3)
    fp = allocate.footprint(res.layout, res.device)
    assert res.layout.data_qubits <= fp
    for r in res.layout.rects:
        assert r.candidates[0].bridges <= fp


def test_too_small_patch_is_infeasible():
    with pytest.raises(InfeasibleError):
        allocate.allocate_data_qubits(arch.gen_arch("square", 4, 4), 5)


def test_unknown_mode():
    with pytest.raises(ValueError):
        allocate.allocate_data_qubits(arch.gen_arch("square", 8, 8), 3, mode="triangle")


def test_center4_needs_degree_four():
    with pytest.raises(InfeasibleError):
        allocate.allocate_data_qubits(arch.gen_arch("hexagon", 12, 12), 3, mode="center4")
