"""Command-line entry point: ``weylgrav {spectrum,hawking,lens,sweep,validate}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import platform
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config, serialize_config

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weylgrav", description="Tilted-Weyl lattice experiments.")
    p.add_argument("command", choices=["spectrum", "hawking", "lens", "sweep", "validate"])
    p.add_argument("--config", type=Path, help="config file; defaults apply when omitted")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--stride", type=int, default=1,
                   help="keep every K-th sample in profile and track CSVs")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    return p


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def _f(x) -> float:
    return float(x)


# ---------------------------------------------------------------- spectrum

def run_spectrum(cfg: ExperimentConfig, out: Path, args) -> dict:
    from .lattice import LatticeSpec
    from .spectra import band_path, cone_params, crossing_frequency, write_band_csv

    sc = cfg["spectrum"]
    spec = LatticeSpec(4, 1 if sc.dimensionality == "chain1d" else 4, t_x=sc.t_x, t_y=sc.t_y,
                       t_z=sc.t_z, beta=sc.beta, dimensionality=sc.dimensionality)
    ks = np.linspace(-np.pi, np.pi, sc.n_points)
    curves, summary = {}, []
    for i, V in enumerate(sc.tilts):
        samples = band_path(spec, (V, 0.0), [(k, 0.0) for k in ks])
        write_band_csv(samples, out / f"bands_{i}.csv")
        cp = cone_params(spec, (V, 0.0))
        summary.append((i, _f(V), _f(cp.slopes_x[0]), _f(cp.slopes_x[1]), cp.tilt_class,
                        crossing_frequency(spec, (V, 0.0))))
        curves[f"V={V:g} ({cp.tilt_class})"] = (ks, np.array([s.omegas for s in samples]))
    _write_rows(out / "cone_params.csv",
                ["index", "V", "slope_1", "slope_2", "class", "crossing_frequency"], summary)
    if not args.no_plots:
        from .plotting import plot_bands
        plot_bands(curves, out / "bands.png")
    return {"tilts": list(sc.tilts), "classes": [r[4] for r in summary]}


# ----------------------------------------------------------------- hawking

def run_hawking(cfg: ExperimentConfig, out: Path, args) -> dict:
    from .hawking import sweep, write_sweep_csv

    hc = cfg["hawking"]
    result = sweep(hc, threads=args.threads)
    write_sweep_csv(result, out / "hawking_rates.csv")
    rows = []
    for r in result.records:
        for ch in (r.classical, r.quantum):
            if ch is None:
                continue
            for t, d in sorted(ch.snapshots.items()):
                for m in range(0, d.size, args.stride):
                    rows.append((r.omega, ch.kind, _f(t), m, _f(d[m])))
    _write_rows(out / "hawking_snapshots.csv", ["omega", "kind", "t", "cell", "density"], rows)
    runs = []
    for r in result.records:
        for ch in (r.classical, r.quantum):
            if ch is not None:
                runs.append((r.omega, ch.kind, ch.k0, ch.omega, ch.chi, ch.t_measure,
                              int(ch.valid), ch.reason, ch.drift, ch.steps,
                              ch.spectrum_peak_k))
    _write_rows(out / "hawking_runs.csv",
                ["omega", "kind", "k0", "omega_packet", "chi", "t_measure", "valid", "reason",
                 "drift", "steps", "flat_side_peak_k"], runs)
    if not args.no_plots:
        from .plotting import plot_rates, plot_tunneling
        plot_rates(result, out / "hawking_rates.png")
        for i, r in enumerate(result.records):
            plot_tunneling([r.classical, r.quantum], hc, out / f"hawking_snapshots_{i}.png")
    return {
        "slope_q": result.slope_q, "slope_q_ci95": list(result.slope_q_ci),
        "slope_c": result.slope_c, "slope_c_ci95": list(result.slope_c_ci),
        "target_slope": -2 * np.pi / hc.gamma_t,
        "spearman_c": result.rank_corr_c, "spearman_q": result.rank_corr_q,
        "run_seconds": {f"{r.omega:g}": {ch.kind: ch.wall_time for ch in (r.classical, r.quantum)
                                         if ch is not None} for r in result.records},
    }


# -------------------------------------------------------------------- lens

def _lens_job(lc):
    from .lensing import deflection_metrics, run_lensing
    track = run_lensing(lc)
    return track, deflection_metrics(track, lc)


def _track_rows(track, stride):
    for i in range(0, track.t.size, stride):
        yield (_f(track.t[i]), _f(track.x[i]), _f(track.y[i]), _f(track.r[i]),
               _f(track.captured[i]))


def run_lens(cfg: ExperimentConfig, out: Path, args) -> dict:
    from .dynamics import write_snapshot
    from .lattice import LatticeSpec

    lc = cfg["lens"]
    track, m = _lens_job(lc)
    _write_rows(out / "lens_track.csv", ["t", "x", "y", "r", "captured_fraction"],
                _track_rows(track, args.stride))
    _write_rows(out / "lens_metrics.csv",
                ["gamma", "b", "side", "closest_approach", "bending_deg", "captured_fraction",
                 "captured", "valid"],
                [(lc.gamma, lc.b, lc.side, m.closest_approach, m.bending_deg,
                  m.captured_fraction, int(m.captured), int(track.valid))])
    spec = LatticeSpec(lc.nx, lc.ny)
    for t, s in sorted(track.states.items()):
        write_snapshot(spec, s, out / f"lens_snapshot_t{t:g}.bin")
    if not args.no_plots:
        from .plotting import plot_lensing
        plot_lensing(track, lc, out / "lens.png")
    return {"valid": track.valid, "reason": track.reason, "energy_drift": track.energy_drift,
            "steps": track.steps, "dt": track.dt, "run_seconds": track.wall_time}


def sweep_configs(cfg: ExperimentConfig):
    base, sw = cfg["lens"], cfg["sweep"]
    jobs = [dataclasses.replace(base, gamma=g, b=sw.b_fixed) for g in sw.gammas]
    jobs += [dataclasses.replace(base, gamma=sw.gamma_fixed, b=b) for b in sw.bs]
    seen, unique = set(), []
    for j in jobs:
        if j not in seen:
            seen.add(j)
            unique.append(j)
    return unique


def run_sweep(cfg: ExperimentConfig, out: Path, args) -> dict:
    jobs = sweep_configs(cfg)
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_lens_job, jobs))
    else:
        results = [_lens_job(j) for j in jobs]
    _write_rows(out / "lens_sweep.csv",
                ["gamma", "b", "side", "closest_approach", "bending_deg", "captured_fraction",
                 "captured", "valid"],
                [(j.gamma, j.b, j.side, m.closest_approach, m.bending_deg, m.captured_fraction,
                  int(m.captured), int(tr.valid)) for j, (tr, m) in zip(jobs, results)])
    if not args.no_plots:
        from .plotting import plot_deflection
        plot_deflection([(f"gamma={j.gamma:g} b={j.b:g}", tr.x, tr.y, j.hole, j.gamma)
                         for j, (tr, _) in zip(jobs, results)], out / "lens_sweep.png")
    return {"runs": len(jobs), "run_seconds": [tr.wall_time for tr, _ in results]}


# ---------------------------------------------------------------- validate

def run_validate(cfg: ExperimentConfig, out: Path, args) -> dict:
    from .checks import validate_suite

    vc = cfg["validate"]
    rows = validate_suite(vc.n, vc.n_k)
    _write_rows(out / "validate.csv", ["check", "passed", "detail"],
                [(n, int(ok), d) for n, ok, d in rows])
    failed = [n for n, ok, _ in rows if not ok]
    for n, ok, d in rows:
        print(f"{'PASS' if ok else 'FAIL'} {n}: {d}")
    if failed:
        raise RuntimeError(f"validation failed: {', '.join(failed)}")
    return {"checks": len(rows)}


RUNNERS = {"spectrum": run_spectrum, "hawking": run_hawking, "lens": run_lens,
           "sweep": run_sweep, "validate": run_validate}


def _error_record(out: Path, command: str, exc: BaseException) -> dict:
    rec = {"status": "error", "command": command, "error": type(exc).__name__,
           "message": str(exc)}
    if isinstance(exc, ConfigError):
        rec.update(line=exc.line, key=exc.key)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "error.json").write_text(json.dumps(rec, indent=2) + "\n")
    except OSError:
        pass
    return rec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out: Path = args.out
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.stride < 1:
            raise ConfigError("--stride must be at least 1")
        text = args.config.read_text() if args.config else ""
        cfg = parse_config(text, args.command)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config_used.ini").write_text(serialize_config(cfg))
        clock = time.perf_counter()
        extra = RUNNERS[args.command](cfg, out, args)
        meta = {
            "status": "ok",
            "command": args.command,
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "threads": args.threads,
            "stride": args.stride,
            "parameters": {k: dataclasses.asdict(v) for k, v in cfg.sections.items()},
            "wall_seconds": time.perf_counter() - clock,
            "results": extra,
        }
        (out / "metadata.json").write_text(json.dumps(meta, indent=2, default=_json_default) + "\n")
        return 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        rec = _error_record(out, args.command, exc)
        print(json.dumps(rec), file=sys.stderr)
        if not isinstance(exc, (ConfigError, OSError)):
            traceback.print_exc()
        return 2 if isinstance(exc, (ConfigError, OSError)) else 1


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


if __name__ == "__main__":
    raise SystemExit(main())
