"""Command-line runner: ``engine <mode> --config <path> [--workers N] [--out DIR]``.

Exit status is 0 on success, 2 when some lambda points failed and 1 on
errors (invalid config, crashed run, failed validation).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .dsc import dsc_levels
from .emission import spectrum_map
from .spectrum import adaptive_solve, sweep
from .validation import format_report, run_validation

log = logging.getLogger("dicke_usc")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2


def _fmt(x: float) -> str:
    return repr(float(x))


def resolve_workers(cli_value, cfg) -> int:
    if cli_value is not None:
        n = cli_value
    elif os.environ.get("ENGINE_WORKERS"):
        n = int(os.environ["ENGINE_WORKERS"])
    else:
        n = cfg["parallelism"]["workers"]
    if n < 0:
        raise cfgmod.ConfigError("worker count must be >= 0", "parallelism/workers")
    return n or (os.cpu_count() or 1)


def _write_manifest(out: Path, cfg: dict, tasks: list, status: str, wall: float, extra=None):
    manifest = {"engine_version": __version__, "mode": cfg["mode"], "status": status,
                "wall_time": wall, "config": cfg, "tasks": tasks}
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default))


def _json_default(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


# -- modes -------------------------------------------------------------------------

def run_energy_sweep(cfg, out: Path, workers: int):
    params = cfgmod.model_params(cfg)
    grid = cfgmod.lambda_grid(cfg)
    s = cfg["solver"]
    t0 = time.perf_counter()
    sw = sweep(params, grid, s["levels"], cutoff_tol=s["cutoff_tol"], gap_ceiling=s["gap_ceiling"],
               workers=workers)
    sw.write_csv(out / "levels.csv")
    sw.write_crossings(out / "crossings.json")
    n_unc = int(sw.uncertain.sum())
    tasks = [{"task": "sweep", "status": "ok", "points": int(grid.size), "cutoff": sw.cutoff_used,
              "uncertain_points": n_unc, "wall": time.perf_counter() - t0}]
    return EXIT_OK, tasks


def run_spectrum_map(cfg, out: Path, workers: int):
    params = cfgmod.model_params(cfg)
    lam = cfgmod.lambda_grid(cfg)
    omega = cfgmod.omega_grid(cfg)
    setup = cfgmod.emission_setup(cfg, params)
    grid, manifest = spectrum_map(params, lam, omega, setup, workers)
    formats = cfg["output"]["formats"]
    if "csv" in formats:
        with open(out / "spectrum.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "omega", "intensity"])
            for i, l in enumerate(lam):
                for j, o in enumerate(omega):
                    w.writerow([_fmt(l), _fmt(o), _fmt(grid[i, j])])
    if "bin" in formats:
        grid.astype("<f8").tofile(out / "map.bin")
        (out / "map.json").write_text(json.dumps({
            "dims": [int(lam.size), int(omega.size)], "dtype": "<f8", "order": "row-major",
            "axes": ["lambda", "omega"], "lambda": lam.tolist(), "omega": omega.tolist()},
            indent=2))
    failed = sum(m["status"] != "ok" for m in manifest)
    if failed == len(manifest):
        return EXIT_ERROR, manifest
    return (EXIT_PARTIAL if failed else EXIT_OK), manifest


def _dsc_point(args):
    params, levels, n_max, order = args
    t0 = time.perf_counter()
    try:
        exact = adaptive_solve(params, levels, tol=1e-10).energies
        approx = {o: dsc_levels(params, n_max, o)[:levels] for o in range(order + 1)}
        return {"lam": params.lam, "status": "ok", "exact": exact, "approx": approx,
                "wall": time.perf_counter() - t0}
    except Exception as exc:  # noqa: BLE001 - recorded in the manifest
        return {"lam": params.lam, "status": "failed", "error": repr(exc),
                "wall": time.perf_counter() - t0}


def run_dsc_compare(cfg, out: Path, workers: int):
    base = cfgmod.model_params(cfg)
    d = cfg["dsc"]
    tasks = [(base.with_lambda(float(l)), d["levels"], d["n_max"], d["order"])
             for l in cfgmod.lambda_grid(cfg)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_dsc_point, tasks))
    else:
        rows = [_dsc_point(t) for t in tasks]
    orders = list(range(d["order"] + 1))
    with open(out / "dsc_compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "level", "exact"] + [f"order{o}" for o in orders] + ["abs_error"])
        for r in rows:
            if r["status"] != "ok":
                continue
            for i, e in enumerate(r["exact"]):
                approx = [r["approx"][o][i] for o in orders]
                w.writerow([_fmt(r["lam"]), i, _fmt(e)] + [_fmt(a) for a in approx]
                           + [_fmt(abs(approx[-1] - e))])
    manifest = [{"lambda": r["lam"], "status": r["status"], "wall": r["wall"],
                 **({"error": r["error"]} if "error" in r else
                    {"max_abs_error": float(np.abs(r["approx"][d["order"]] - r["exact"]).max())})}
                for r in rows]
    failed = sum(m["status"] != "ok" for m in manifest)
    if failed == len(manifest):
        return EXIT_ERROR, manifest
    return (EXIT_PARTIAL if failed else EXIT_OK), manifest


def run_validate(cfg, out: Path, workers: int):
    v = cfg["validate"]
    report = run_validation(v["criteria"], v["tol_scale"], echo=print)
    (out / "validation.json").write_text(json.dumps(report, indent=2, default=_json_default))
    print(format_report(report))
    tasks = [{"criterion": c["number"], "status": "pass" if c["passed"] else "fail",
              "wall": c["runtime"]} for c in report["criteria"]]
    return (EXIT_OK if report["passed"] else EXIT_ERROR), tasks


RUNNERS = {
    "energy-sweep": run_energy_sweep,
    "spectrum-map": run_spectrum_map,
    "dsc-compare": run_dsc_compare,
    "validate": run_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="engine", description=__doc__.splitlines()[0])
    ap.add_argument("mode", choices=cfgmod.MODES)
    ap.add_argument("--config", type=Path, help="YAML run configuration")
    ap.add_argument("--workers", type=int, default=None,
                    help="worker processes (0 = all cores; falls back to ENGINE_WORKERS)")
    ap.add_argument("--out", type=Path, default=None, help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config is not None:
            cfg = cfgmod.load(args.config)
            if cfg["mode"] != args.mode:
                raise cfgmod.ConfigError(f"config is for mode {cfg['mode']!r}", "mode")
        elif args.mode == "validate":
            cfg = cfgmod.resolve({"mode": "validate"})
        else:
            raise cfgmod.ConfigError(f"mode {args.mode!r} needs --config")
        workers = resolve_workers(args.workers, cfg)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"engine: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = args.out or Path(cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    cfg["output"]["directory"] = str(out)
    t0 = time.perf_counter()
    try:
        code, tasks = RUNNERS[args.mode](cfg, out, workers)
    except Exception as exc:  # noqa: BLE001 - top-level failure is reported, not raised
        log.exception("run failed")
        _write_manifest(out, cfg, [{"status": "failed", "error": repr(exc)}], "error",
                        time.perf_counter() - t0)
        print(f"engine: {args.mode} failed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    status = {EXIT_OK: "ok", EXIT_PARTIAL: "partial", EXIT_ERROR: "error"}[code]
    _write_manifest(out, cfg, tasks, status, time.perf_counter() - t0, {"workers": workers})
    return code


if __name__ == "__main__":
    sys.exit(main())
