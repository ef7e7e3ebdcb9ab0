"""Command-line entry point: ``run``, ``sweep`` and ``check`` over a TOML config.

Exit codes: 0 success, 2 invalid configuration, 3 a check or gate failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, SweepSpec, load_config, preset_summary, sweep_from_cli
from .scenarios import InitialSystem, ScenarioPreset, ScenarioResult, run_preset
from .units import HBAR_SI, K_B_SI

log = logging.getLogger("qbmexact")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_GATE = 3

SWEEP_TOLERANCES = {"N": 1e-3, "n_max": 1e-3, "quadrature_order": 1e-9}
FAILED_MARKER = ".failed"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _population_table(res: ScenarioResult, preset: ScenarioPreset):
    times = res.times
    if res.secular is None:
        ground = preset.initial_system is InitialSystem.GROUND
        names = [f"J_{n}{n}_00" if ground else f"rho_{n}{n}" for n in range(3)]
        cols = [res.populations("exact")[:, n] for n in range(3)]
    else:
        names = [f"rho_{n}{n}_exact" for n in range(3)] + ["rho_00_secular", "rho_00_canonical"]
        p = res.populations("exact")
        cols = [p[:, n] for n in range(3)] + [res.populations("secular")[:, 0],
                                              res.populations("canonical")[:, 0]]
    return ["t"] + names, [[t] + [c[i] for c in cols] for i, t in enumerate(times)]


def _coherence_table(res: ScenarioResult):
    pairs = [(0, 2), (1, 3)]
    header = ["t"] + [f"{part}_rho_{n}{m}" for n, m in pairs for part in ("re", "im")]
    series = [res.element_series(n, m) for n, m in pairs]
    rows = [[t] + [v for s in series for v in (s[i].real, s[i].imag)] for i, t in enumerate(res.times)]
    return header, rows


def _tensor_table(res: ScenarioResult):
    header = ["t", "n", "m", "nu", "mu", "re", "im"]
    rows = []
    for key in sorted(res.tensor_slices):
        s = res.tensor_slices[key]
        for i, t in enumerate(res.times):
            rows.append([t, *(str(k) for k in key), s[i].real, s[i].imag])
    return header, rows


def _equilibrium_table(res: ScenarioResult):
    rows = []
    for key in sorted(res.equilibrium):
        v = res.equilibrium[key]
        if key == "rho_beta":
            for n in range(4):
                for m in range(4):
                    rows.append([f"rho_beta_{n}{m}", v.elements[n, m].real])
        else:
            rows.append([key, v])
    return ["quantity", "value"], rows


def _all_finite(res: ScenarioResult) -> bool:
    arrays = [r.elements for v in ("exact", "secular", "canonical") for r in (getattr(res, v) or [])]
    arrays += list(res.tensor_slices.values())
    for v in res.equilibrium.values():
        arrays.append(v.elements if hasattr(v, "elements") else np.asarray(v))
    return all(np.all(np.isfinite(a)) for a in arrays)


def write_outputs(res: ScenarioResult, preset: ScenarioPreset, directory: Path, emit) -> list[str]:
    directory.mkdir(parents=True, exist_ok=True)
    tables = {
        "populations": lambda: _population_table(res, preset),
        "coherences": lambda: _coherence_table(res),
        "tensor_slices": lambda: _tensor_table(res),
        "equilibrium_report": lambda: _equilibrium_table(res),
    }
    written = []
    for kind in sorted(emit):
        header, rows = tables[kind]()
        if kind == "tensor_slices" and not rows:
            continue
        path = directory / f"{kind}.csv"
        _write_csv(path, header, rows)
        written.append(str(path.relative_to(directory.parent)))
    return written


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


def _run_one(preset: ScenarioPreset) -> ScenarioResult:
    return run_preset(preset)


def _execute(presets: list[ScenarioPreset], workers: int):
    """Run presets, keeping input order. Failures come back as exceptions."""
    if workers <= 1 or len(presets) <= 1:
        out = []
        for p in presets:
            try:
                out.append(_run_one(p))
            except Exception as exc:  # reported per preset, the others still run
                log.exception("preset %s failed", p.label)
                out.append(exc)
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_one, p) for p in presets]
        out = []
        for p, f in zip(presets, futures):
            try:
                out.append(f.result())
            except Exception as exc:
                log.error("preset %s failed: %s", p.label, exc)
                out.append(exc)
        return out


def _manifest_base(cfg: RunConfig, command: str) -> dict:
    return {
        "tool": "qbmexact",
        "version": __version__,
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "units": {
            "natural": "hbar = m = omega0 = 1",
            "omega0_rad_s": cfg.omega0_rad_s,
            "time_unit_s": 1.0 / cfg.omega0_rad_s,
            "kelvin_per_inverse_beta": HBAR_SI * cfg.omega0_rad_s / K_B_SI,
        },
        "config": cfg.normalized(),
    }


def _finalize(out_dir: Path, manifest: dict, failed: bool) -> int:
    manifest["status"] = "failed" if failed else "ok"
    (out_dir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    marker = out_dir / FAILED_MARKER
    if failed:
        marker.write_text("one or more checks failed; see manifest.json\n")
        return EXIT_GATE
    if marker.exists():
        marker.unlink()
    return EXIT_OK


def cmd_run(cfg: RunConfig, out_dir: Path, workers: int) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest_base(cfg, "run")
    results = _execute(list(cfg.presets), workers)
    failed = False
    entries = []
    for preset, res in zip(cfg.presets, results):
        entry = {"label": preset.label}
        if isinstance(res, Exception):
            entry.update(error=f"{type(res).__name__}: {res}", passed=False)
            failed = True
        else:
            res.add_check("all_outputs_finite", 0.0 if _all_finite(res) else np.inf, 0.5)
            files = write_outputs(res, preset, out_dir / preset.label, cfg.emit) if cfg.emit else []
            entry.update(files=files, metadata=res.metadata, checks=res.checks, passed=res.passed)
            failed |= not res.passed
        entries.append(entry)
        log.info("%s: %s", preset.label, "ok" if entry["passed"] else "FAILED")
    manifest["presets"] = entries
    return _finalize(out_dir, manifest, failed)


def _scaled(preset: ScenarioPreset, axis: str, factor: float) -> ScenarioPreset:
    if axis == "N":
        return preset.with_mode_factor(factor)
    if axis == "n_max":
        return replace(preset, n_max=int(round(preset.n_max * factor)))
    return replace(preset, quadrature_factor=int(round(preset.quadrature_factor * factor)))


def result_delta(a: ScenarioResult, b: ScenarioResult) -> float:
    """Largest change of any reported element, compared on the common truncation."""
    deltas = []
    for variant in ("exact", "secular", "canonical"):
        xa, xb = getattr(a, variant), getattr(b, variant)
        if xa is None or xb is None:
            continue
        n = min(xa[0].n_max, xb[0].n_max) + 1
        deltas.append(max(float(np.max(np.abs(p.elements[:n, :n] - q.elements[:n, :n])))
                          for p, q in zip(xa, xb)))
    for key, series in a.tensor_slices.items():
        if key in b.tensor_slices:
            deltas.append(float(np.max(np.abs(series - b.tensor_slices[key]))))
    return max(deltas) if deltas else 0.0


def cmd_sweep(cfg: RunConfig, sweep: SweepSpec, out_dir: Path, workers: int) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest_base(cfg, "sweep")
    manifest["sweep"] = {"axis": sweep.axis, "factors": list(sweep.factors),
                         "tolerance": SWEEP_TOLERANCES[sweep.axis]}
    factors = sorted(sweep.factors)
    jobs = [(p, f, _scaled(p, sweep.axis, f)) for p in cfg.presets for f in factors]
    results = _execute([j[2] for j in jobs], workers)
    tol = SWEEP_TOLERANCES[sweep.axis]
    rows, entries = [], []
    failed = False
    by_preset: dict[str, list] = {}
    for (p, f, scaled), res in zip(jobs, results):
        by_preset.setdefault(p.label, []).append((f, scaled, res))
    for label, runs in by_preset.items():
        prev = None
        for f, scaled, res in runs:
            entry = {"label": label, "factor": f, "parameters": preset_summary(scaled)}
            if isinstance(res, Exception):
                entry.update(error=f"{type(res).__name__}: {res}", passed=False)
                failed = True
                prev = None
                entries.append(entry)
                continue
            entry.update(metadata=res.metadata, checks=res.checks, passed=res.passed)
            failed |= not res.passed
            entries.append(entry)
            if prev is not None:
                delta = result_delta(prev[1], res)
                ok = bool(np.isfinite(delta) and delta < tol)
                failed |= not ok
                rows.append([label, sweep.axis, prev[0], f, delta, tol, "true" if ok else "false"])
            prev = (f, res)
    _write_csv(out_dir / "convergence.csv",
               ["preset", "axis", "reference_factor", "factor", "max_delta", "tolerance", "passed"], rows)
    manifest["runs"] = entries
    return _finalize(out_dir, manifest, failed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbmexact", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_exec=True):
        p.add_argument("config", type=Path)
        if with_exec:
            p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
            p.add_argument("--workers", type=int, default=1, help="presets run in parallel")

    common(sub.add_parser("run", help="run every preset and write CSV outputs"))
    sw = sub.add_parser("sweep", help="self-convergence sweep along one axis")
    common(sw)
    sw.add_argument("--axis", default=None, help="N, n_max or quadrature_order")
    sw.add_argument("--factors", default=None, help="comma-separated multipliers, e.g. 1,2,4")
    common(sub.add_parser("check", help="parse and validate only"), with_exec=False)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "sweep":
            if args.axis is None and args.factors is None and cfg.sweep is not None:
                sweep = cfg.sweep
            else:
                axis = args.axis or (cfg.sweep.axis if cfg.sweep else "N")
                sweep = sweep_from_cli(axis, args.factors or "1,2")
        if getattr(args, "workers", 1) < 1:
            raise ConfigError("--workers", "must be at least 1")
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "check":
        print(json.dumps(_jsonable(cfg.normalized()), indent=2, sort_keys=True))
        return EXIT_OK
    out_dir = args.out if args.out is not None else cfg.output_dir
    t0 = time.perf_counter()
    if args.command == "run":
        code = cmd_run(cfg, out_dir, args.workers)
    else:
        code = cmd_sweep(cfg, sweep, out_dir, args.workers)
    log.info("finished in %.1f s with exit code %d", time.perf_counter() - t0, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
