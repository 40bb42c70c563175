"""Command-line front end: check, sweep, simulate."""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DivergenceError, VactsError
from .model import load_system, resolve_config

MANIFEST_SCHEMA = "vacts-kit/manifest/1"
DEFAULT_BEYOND = {"drum_radius": 0.02}


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def parse_range(text: str) -> np.ndarray:
    """'lo:hi:count' -> evenly spaced values, both ends included."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must look like lo:hi:count, got {text!r}", field="--range")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"range must look like lo:hi:count, got {text!r}", field="--range") from None
    if count < 1:
        raise ConfigError("range count must be at least 1", field="--range")
    return np.linspace(lo, hi, count)


def write_manifest(out_dir: Path, command: str, config: Path, outputs: dict, started: float,
                   status: str = "ok", extra: dict | None = None) -> Path:
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "argv": sys.argv[1:],
        "config": str(config),
        "config_sha256": sha256_file(config),
        "version": __version__,
        "outputs": {name: {"path": str(p), "sha256": sha256_file(p)} for name, p in sorted(outputs.items())},
        "status": status,
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _config_path(name) -> Path:
    path = resolve_config(name, ".sys")
    if not path.exists():
        raise ConfigError(f"config {name!r} not found (neither a file nor a bundled config)", field="--config")
    return path


def cmd_check(args) -> int:
    from .checks import run_checks

    started = time.perf_counter()
    cfg = _config_path(args.config)
    system = load_system(cfg)
    results = run_checks(system, samples=args.samples, seed=args.seed)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = out_dir / "check.json"
    report.write_text(json.dumps([{"name": r.name, "passed": r.passed, "value": r.value,
                                   "tolerance": r.tolerance, "detail": r.detail} for r in results],
                                 indent=2) + "\n")
    write_manifest(out_dir, "check", cfg, {"report": report}, started,
                   status="ok" if not failed else f"failed: {failed[0].name}")
    if failed:
        print(f"first failing check: {failed[0].name}", file=sys.stderr)
        return 2
    print("all checks passed")
    return 0


def cmd_sweep(args) -> int:
    from .wrench import SWEEP_AXES, sweep, trend_summary

    started = time.perf_counter()
    cfg = _config_path(args.config)
    if args.axis not in SWEEP_AXES:
        raise ConfigError(f"unsupported sweep axis {args.axis!r}; choose from {', '.join(SWEEP_AXES)}", field="--axis")
    values = parse_range(args.range)
    system = load_system(cfg)
    table = sweep(system, args.axis, values, metric=args.metric, variant=args.variant, threads=args.threads)
    beyond = args.beyond if args.beyond is not None else DEFAULT_BEYOND.get(args.axis)
    trend = trend_summary(table, beyond)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    csv_path.write_text(table.to_csv())
    trend_path = out_dir / "trend.json"
    trend_path.write_text(json.dumps({"axis": args.axis, "metric": args.metric, "variant": args.variant,
                                      "trend": trend}, indent=2, sort_keys=True) + "\n")
    write_manifest(out_dir, "sweep", cfg, {"table": csv_path, "trend": trend_path}, started)
    for col, entry in trend.items():
        if col == "acts_vs_vacts":
            print(f"acts >= vacts on {entry['acts_ge_vacts_rows']}/{entry['rows']} rows, "
                  f"acts <= vacts on {entry['acts_le_vacts_rows']}/{entry['rows']} rows")
            continue
        line = f"{col}: {entry['monotonicity']}"
        if "argmax" in entry:
            line += f", argmax {args.axis} = {entry['argmax']:g} (max {entry['max']:.6g})"
        if "monotonicity_beyond" in entry:
            line += f", beyond {entry['beyond']:g}: {entry['monotonicity_beyond']}"
        print(line)
    bad = [r[args.axis] for r in table.rows if r["error"]]
    if bad:
        print(f"{len(bad)} cells failed; see the error column", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    from .scenario import load_scenario, run_scenario, write_result

    started = time.perf_counter()
    cfg = _config_path(args.config)
    scn = resolve_config(args.scenario, ".scn")
    if not scn.exists():
        raise ConfigError(f"scenario {args.scenario!r} not found", field="--scenario")
    system = load_system(cfg)
    scenario = load_scenario(scn)
    if args.noise == "mocap" or args.seed is not None:
        scenario = scenario.with_noise(args.noise == "mocap" or scenario.noise.enabled, args.seed)
    out_dir = Path(args.out)
    extra = {"scenario": str(scn), "scenario_sha256": sha256_file(scn)}
    try:
        result = run_scenario(system, scenario)
    except DivergenceError as exc:
        paths = write_result(exc.partial, out_dir) if exc.partial is not None else {}
        out_dir.mkdir(parents=True, exist_ok=True)
        write_manifest(out_dir, "simulate", cfg, paths, started, status="diverged",
                       extra={**extra, "failure": str(exc)})
        raise
    paths = write_result(result, out_dir)
    write_manifest(out_dir, "simulate", cfg, paths, started, extra=extra)
    print(result.error_table())
    s = result.summary
    if s["winch_saturated"]:
        print("winch saturation samples per cable: " + ", ".join(str(v) for v in s["winch_saturation_samples"]))
    if s["propeller_saturation_steps"]:
        print(f"propeller saturation in {s['propeller_saturation_steps']} steps")
    print(f"payload drift during measured phases: {100 * s['payload_drift_max']:.3f} cm")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vacts-kit", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="run the model invariant suite on a config")
    c.add_argument("--config", default="table1", help="config path or bundled name (default: table1)")
    c.add_argument("--out", default="vacts-out/check", help="output directory")
    c.add_argument("--samples", type=int, default=100, help="random states per check")
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("sweep", help="wrench-analysis sweep over one design axis")
    s.add_argument("--config", default="table1")
    s.add_argument("--axis", required=True, help="inclination | drum_radius | offset | rotz")
    s.add_argument("--range", required=True, help="lo:hi:count (degrees for angles, metres otherwise)")
    s.add_argument("--metric", choices=("capacity_margin", "manipulability"), default="capacity_margin")
    s.add_argument("--variant", choices=("acts", "vacts", "both"), default="both")
    s.add_argument("--beyond", type=float, default=None,
                   help="extra monotonicity verdict for axis values at or beyond this one")
    s.add_argument("--threads", type=int, default=None, help="worker threads (also capped by VACTS_KIT_THREADS)")
    s.add_argument("--out", default="vacts-out/sweep")
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("simulate", help="run a closed-loop scenario")
    m.add_argument("--config", default="prototype")
    m.add_argument("--scenario", default="resize_hover")
    m.add_argument("--out", default="vacts-out/simulate")
    m.add_argument("--noise", choices=("off", "mocap"), default="off",
                   help="mocap adds the scenario's measurement noise")
    m.add_argument("--seed", type=int, default=None, help="noise seed (overrides the scenario file)")
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:   # usage errors, --help, --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except VactsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
