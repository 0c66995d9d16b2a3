"""Command-line entry point: surfsynth <command> [options]."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import arch as archmod
from . import driver
from .allocate import MODES, InfeasibleError

log = logging.getLogger("surfsynth")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _write(text: str, out: str | None):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _synth_args(p: argparse.ArgumentParser, distance_default: int = 5):
    p.add_argument("--arch", choices=archmod.ARCHS, default="square")
    p.add_argument("--distance", type=int, default=distance_default)
    p.add_argument("--mode", choices=MODES, default="pair3")
    p.add_argument("--device", help="device JSON file to use instead of growing a patch")


def _synth_from(args) -> driver.Synthesis:
    device = archmod.load(args.device) if getattr(args, "device", None) else None
    return driver.synth(args.arch, args.distance, args.mode, device=device)


def cmd_arch_gen(args) -> int:
    g = archmod.gen_arch(args.arch, args.rows, args.cols)
    _write(archmod.dumps(g), args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    res = _synth_from(args)
    _write(res.to_json(), args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    configs = [(args.arch, args.mode)] if args.arch else list(driver.STANDARD_CONFIGS)
    results = [driver.synth(a, args.distance, m) for a, m in configs]
    rows = driver.table_rows(results)
    sys.stdout.write(driver.format_table(rows))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(driver.rows_to_csv(rows, rows[0].keys()))
        (out / "report.json").write_text(json.dumps([r.report for r in results], indent=2, sort_keys=True) + "\n")
        driver.plot_utilization(rows, out / "utilization.svg")
        driver.plot_utilization(rows, out / "utilization.png")
        log.info("wrote report files to %s", out)
    return EXIT_OK


def cmd_export_circuit(args) -> int:
    res = _synth_from(args)
    _write(driver.export_circuit(res), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    exp = driver.Experiment.build(args.arch, args.distance, args.mode, args.rounds)
    row = exp.run(args.p_gate, args.shots, args.seed, args.p_idle)
    _write(driver.rows_to_csv([row], driver.CSV_COLUMNS), args.out)
    return EXIT_OK


def _load_sweep_config(args) -> dict:
    cfg = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
    if args.arch:
        cfg["configs"] = [{"arch": args.arch, "mode": args.mode}]
    if args.p_gate:
        cfg["p_gate"] = args.p_gate
    if args.distances:
        cfg["distances"] = args.distances
    if args.shots is not None:
        cfg["shots"] = args.shots
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("configs", [{"arch": "square", "mode": "pair3"}])
    cfg.setdefault("distances", [3, 5])
    cfg.setdefault("p_gate", [])
    cfg.setdefault("shots", 10000)
    cfg.setdefault("seed", 0)
    cfg.setdefault("p_idle", 0.0002)
    return cfg


def cmd_sweep(args) -> int:
    cfg = _load_sweep_config(args)
    configs = [(c["arch"], c.get("mode", "pair3")) for c in cfg["configs"]]
    rows = driver.sweep(configs, cfg["distances"], cfg["p_gate"], cfg["shots"], cfg["seed"], cfg["p_idle"], args.workers)
    good = [r for r in rows if "error" not in r]
    for r in rows:
        if "error" in r:
            log.error("point %s %s d=%s p=%s failed: %s", r["arch"], r["mode"], r["distance"], r["p_gate"], r["error"])
    csv_text = driver.rows_to_csv(good, driver.CSV_COLUMNS)
    thresholds = []
    if len(cfg["distances"]) >= 2:
        small, large = sorted(cfg["distances"])[:2]
        for a, m in configs:
            t = driver.estimate_threshold(good, a, m, small, large)
            thresholds.append(t)
            if t.crossed:
                log.info("threshold %s %s: %.4g (95%% band %.4g..%.4g)", a, m, t.value, t.low, t.high)
            else:
                log.info("threshold %s %s: curves do not cross in the sweep range", a, m)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(csv_text)
        lines = ["arch,mode,threshold,low,high"]
        for t in thresholds:
            fmt = lambda v: "" if v is None else f"{v:.6g}"
            lines.append(f"{t.arch},{t.mode},{fmt(t.value)},{fmt(t.low)},{fmt(t.high)}")
        (out / "thresholds.csv").write_text("\n".join(lines) + "\n")
        driver.plot_sweep(good, out / "sweep.svg")
        driver.plot_sweep(good, out / "sweep.png")
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK if len(good) == len(rows) else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="surfsynth", description="Surface-code synthesis for sparse qubit devices.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p_arch = sub.add_parser("arch", help="device graphs")
    arch_sub = p_arch.add_subparsers(dest="arch_command", required=True)
    p = arch_sub.add_parser("gen", help="generate a rectangular device patch as JSON")
    p.add_argument("--arch", choices=archmod.ARCHS, required=True)
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_arch_gen)

    p = sub.add_parser("synth", help="synthesize layout, circuits and schedule (JSON)")
    _synth_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="metric table for one or all standard configurations")
    p.add_argument("--arch", choices=archmod.ARCHS)
    p.add_argument("--mode", choices=MODES, default="pair3")
    p.add_argument("--distance", type=int, default=5)
    p.add_argument("--out", help="directory for report.csv, report.json and figures")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-circuit", help="one syndrome cycle as a text circuit")
    _synth_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_circuit)

    p = sub.add_parser("simulate", help="logical error rate at one noise strength")
    _synth_args(p, 3)
    p.add_argument("--p-gate", type=float, default=1e-3)
    p.add_argument("--p-idle", type=float, default=0.0002)
    p.add_argument("--rounds", type=int)
    p.add_argument("--shots", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="logical error rate over a p_gate grid, with plots")
    p.add_argument("--config", help="JSON with configs, distances, p_gate, shots, seed")
    p.add_argument("--arch", choices=archmod.ARCHS)
    p.add_argument("--mode", choices=MODES, default="pair3")
    p.add_argument("--distances", type=int, nargs="+")
    p.add_argument("--p-gate", type=float, nargs="+")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="directory for results.csv, thresholds.csv and figures")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except (archmod.ArchError, ValueError, OSError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
