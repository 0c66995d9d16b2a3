import csv
import io
import json

import pytest

from surfsynth import arch, cli, driver

from .conftest import synthesized


def test_synth_is_byte_identical():
    a = driver.synth("heavy-square", 3).to_json()
    b = driver.synth("heavy-square", 3).to_json()
    assert a == b
    doc = json.loads(a)
    assert doc["report"]["distance"] == 3
    assert len(doc["layout"]["data_map"]) == 9


def test_report_consistency():
    res = synthesized("heavy-hexagon", 5)
    rep = res.report
    u = rep["utilization"]
    assert u["data"] == 25
    assert u["data"] + u["bridge"] + u["unused"] == u["total"]
    assert abs(u["data_pct"] + u["bridge_pct"] + u["unused_pct"] - 100) < 0.2
    fours = [s for s in rep["stabilizers"] if s["type"] == "X" and s["weight"] == 4]
    assert rep["x_average"]["cnot"] == pytest.approx(sum(s["cnot"] for s in fours) / len(fours), abs=1e-4)
    for s in rep["stabilizers"]:
        assert s["cnot"] == s["weight"] + 2 * (s["bridge_qubits"] - 1)
    assert rep["partitions"] == len(res.schedule.partitions)


def test_synth_on_given_device():
    g = arch.gen_arch("square", 6, 6)
    res = driver.synth("square", 3, device=g)
    assert res.size is None and res.device is g


def test_table_and_csv():
    rows = driver.table_rows([synthesized("square", 3), synthesized("square", 3, "center4")])
    text = driver.format_table(rows)
    assert text.splitlines()[0].startswith("arch")
    parsed = list(csv.DictReader(io.StringIO(driver.rows_to_csv(rows, rows[0].keys()))))
    assert [r["mode"] for r in parsed] == ["pair3", "center4"]


def test_export_circuit_parses():
    from surfsynth.circuit import parse_text

    res = synthesized("square", 3)
    layers = parse_text(driver.export_circuit(res))
    n_meas = sum(1 for l in layers for g in l if g.name == "M")
    assert n_meas == sum(e.tree.b for e in res.schedule.entries())


def test_sweep_rows_and_zero_noise():
    rows = driver.sweep([("square", "pair3")], [3], [0.0, 2e-3], 500, 3, p_idle=0.0)
    assert [r["p_gate"] for r in rows] == [0.0, 2e-3]
    assert rows[0]["logical_errors"] == 0 and rows[0]["rate"] == 0
    again = driver.sweep([("square", "pair3")], [3], [0.0, 2e-3], 500, 3, p_idle=0.0)
    assert rows == again


def test_empty_sweep():
    assert driver.sweep([("square", "pair3")], [3], [], 100, 0) == []
    assert driver.rows_to_csv([], driver.CSV_COLUMNS) == ",".join(driver.CSV_COLUMNS) + "\n"


def test_infeasible_config_becomes_error_rows():
    rows = driver.sweep([("hexagon", "center4")], [3], [1e-3], 10, 0)
    assert "error" in rows[0]


def test_point_seed_is_stable():
    assert driver.point_seed(1, 2) == driver.point_seed(1, 2)
    assert driver.point_seed(1, 2) != driver.point_seed(1, 3)


def _row(d, p, k, n=1000):
    from surfsynth.sim import wilson

    lo, hi = wilson(k, n)
    return {"arch": "a", "mode": "m", "distance": d, "p_gate": p, "shots": n, "logical_errors": k,
            "rate": k / n, "ci_low": lo, "ci_high": hi}


def test_threshold_crossing():
    # d=5 starts below d=3 and ends above it; the log-log crossing lies between 2e-3 and 4e-3
    rows = [_row(3, 1e-3, 10), _row(5, 1e-3, 2), _row(3, 2e-3, 40), _row(5, 2e-3, 20),
            _row(3, 4e-3, 100), _row(5, 4e-3, 160)]
    t = driver.estimate_threshold(rows, "a", "m")
    assert t.crossed and 2e-3 < t.value < 4e-3
    assert t.low < t.value < t.high


def test_threshold_absent():
    rows = [_row(3, 1e-3, 10), _row(5, 1e-3, 2), _row(3, 2e-3, 40), _row(5, 2e-3, 20)]
    assert not driver.estimate_threshold(rows, "a", "m").crossed
    assert not driver.estimate_threshold([], "a", "m").crossed


def test_plots(tmp_path):
    rows = [_row(3, 1e-3, 10), _row(5, 1e-3, 2)]
    driver.plot_sweep(rows, tmp_path / "s.svg")
    driver.plot_sweep(rows, tmp_path / "s.png")
    driver.plot_utilization(driver.table_rows([synthesized("square", 3)]), tmp_path / "u.svg")
    assert (tmp_path / "s.svg").read_text().lstrip().startswith("<?xml")
    assert (tmp_path / "s.png").stat().st_size > 0
    assert (tmp_path / "u.svg").exists()


# command line


def test_cli_arch_gen(tmp_path, capsys):
    out = tmp_path / "dev.json"
    assert cli.main(["arch", "gen", "--arch", "heavy-square", "--rows", "3", "--cols", "3", "--out", str(out)]) == 0
    assert arch.load(out).n == 21
    assert cli.main(["arch", "gen", "--arch", "square", "--rows", "1", "--cols", "3"]) == 1


def test_cli_synth_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["synth", "--arch", "square", "--distance", "3", "--out", str(a)]) == 0
    assert cli.main(["synth", "--arch", "square", "--distance", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_exit_codes(tmp_path):
    assert cli.main(["synth", "--arch", "hexagon", "--mode", "center4", "--distance", "3"]) == 2
    small = tmp_path / "small.json"
    arch.save(arch.gen_arch("square", 3, 3), small)
    assert cli.main(["synth", "--distance", "5", "--device", str(small)]) == 2
    assert cli.main(["synth", "--device", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["synth", "--device", str(bad)]) == 1
    with pytest.raises(SystemExit):
        cli.main(["synth", "--arch", "triangle"])


def test_cli_simulate_seeded(capsys):
    args = ["simulate", "--arch", "square", "--distance", "3", "--p-gate", "0.004", "--shots", "2000", "--seed", "7"]
    assert cli.main(args) == 0
    first = capsys.readouterr().out
    assert cli.main(args) == 0
    assert capsys.readouterr().out == first
    row = next(csv.DictReader(io.StringIO(first)))
    assert row["shots"] == "2000"


def test_cli_report_and_export(tmp_path, capsys):
    assert cli.main(["report", "--arch", "square", "--distance", "3", "--out", str(tmp_path)]) == 0
    assert "square" in capsys.readouterr().out
    for name in ("report.csv", "report.json", "utilization.svg", "utilization.png"):
        assert (tmp_path / name).exists()
    assert cli.main(["export-circuit", "--distance", "3", "--out", str(tmp_path / "c.txt")]) == 0
    assert "TICK" in (tmp_path / "c.txt").read_text()


def test_cli_sweep(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"configs": [{"arch": "square", "mode": "pair3"}], "distances": [3, 5],
                               "p_gate": [0.002, 0.02], "shots": 300, "seed": 1}))
    out = tmp_path / "out"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "results.csv").open()))
    assert len(rows) == 4
    assert (out / "thresholds.csv").read_text().startswith("arch,mode,threshold")
    assert (out / "sweep.svg").exists()
    assert cli.main(["sweep", "--arch", "square", "--distances", "3"]) == 0
    assert capsys.readouterr().out.strip() == ",".join(driver.CSV_COLUMNS)
