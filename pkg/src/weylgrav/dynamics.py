"""Time integration of the classical network and wavepacket diagnostics."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lattice import FieldState, LatticeModel, LatticeSpec, _pair
from .spectra import BlochPencil, positive_branches, quadratic_eigensolve

__all__ = [
    "WavepacketSpec",
    "Trajectory",
    "InstabilityError",
    "init_wavepacket_classical",
    "rk4_step",
    "evolve",
    "max_frequency",
    "amplitude_sq",
    "cell_density",
    "density_centroid",
    "spatial_spectrum",
    "write_snapshot",
    "write_trajectory",
]


class InstabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class WavepacketSpec:
    center: tuple
    sigma: float
    k0: tuple
    branch: int = 0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.sigma < 4:
            raise ValueError("sigma must be at least 4 cells")
        if self.branch not in (0, 1):
            raise ValueError("branch must be 0 (lower) or 1 (upper)")
        k = _pair(self.k0, "k0")
        if np.any(np.abs(k) > np.pi + 1e-12):
            raise ValueError("k0 outside the Brillouin zone")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    centroid: list = field(default_factory=list)
    steps: int = 0
    dt: float = 0.0
    wall_time: float = 0.0
    stopped_early: bool = False
    final: FieldState | None = None


def _local_V(model: LatticeModel, center):
    x, y = model.spec.cell_coords()
    cell = int(np.argmin((x - center[0]) ** 2 + (y - center[1]) ** 2))
    return (float(np.ravel(model.potential.vx)[cell]),
            float(np.ravel(model.potential.vy)[cell]))


def init_wavepacket_classical(model: LatticeModel, wp: WavepacketSpec):
    """Bloch-mode Gaussian packet; returns ``(state, carrier_frequency)``.

    The complex field ``Psi`` has unit norm (times ``wp.amplitude``); the
    state is ``u = Re Psi`` and ``v = Re(-i Omega0 Psi)``.
    """
    spec = model.spec
    V = _local_V(model, wp.center)
    k0 = _pair(wp.k0, "k0")
    w, modes = positive_branches(BlochPencil.at(spec, V, k0))
    if abs(w[1] - w[0]) < 1e-8:
        raise ValueError(f"positive branches degenerate at k0={tuple(k0)}")
    omega0 = float(w[wp.branch].real)
    mode = modes[:, wp.branch]
    from .quantum import _warn_boundary
    _warn_boundary(spec, wp)
    x, y = spec.cell_coords()
    cx, cy = wp.center
    env = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * wp.sigma ** 2)
                 + 1j * (k0[0] * x + k0[1] * y))
    psi = np.empty(spec.nsites, dtype=complex)
    psi[0::2] = env * mode[0]
    psi[1::2] = env * mode[1]
    norm = np.linalg.norm(psi)
    psi *= (wp.amplitude / norm) if norm > 0 else 0.0
    return FieldState(psi.real.copy(), (-1j * omega0 * psi).real.copy(), 0.0), omega0


def rk4_step(model: LatticeModel, state: FieldState, dt: float) -> FieldState:
    """One classical RK4 step of ``u' = v, v' = -K u + G v``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    L = model.first_order
    y = np.concatenate([state.u, state.v])
    k1 = L @ y
    k2 = L @ (y + 0.5 * dt * k1)
    k3 = L @ (y + 0.5 * dt * k2)
    k4 = L @ (y + dt * k3)
    y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise InstabilityError(f"non-finite state after step at t={state.t + dt:.4f}")
    n = model.spec.nsites
    return FieldState(y[:n], y[n:], state.t + dt)


def max_frequency(spec: LatticeSpec, field_, resolution: int = 64) -> float:
    """Upper estimate of the largest eigenfrequency over the field's tilt range."""
    vx = np.ravel(field_.vx)
    vy = np.ravel(field_.vy)
    cands = {(0.0, 0.0), (float(vx.max()), 0.0), (float(vx.min()), 0.0),
             (0.0, float(vy.max())), (0.0, float(vy.min()))}
    i = int(np.argmax(np.hypot(vx, vy)))
    cands.add((float(vx[i]), float(vy[i])))
    ks = -np.pi + 2 * np.pi * np.arange(resolution) / resolution
    grid = [(k, 0.0) for k in ks] if spec.is_1d else [(a, b) for a in ks for b in ks]
    best = 0.0
    for V in cands:
        if spec.is_1d and V[1] != 0:
            continue
        for k in grid:
            w, _ = quadratic_eigensolve(BlochPencil.at(spec, V, k))
            best = max(best, float(np.max(np.abs(w))))
    return best


def evolve(model: LatticeModel, state: FieldState, dt: float, t_end: float,
           stride: int = 100, *, carrier: float | None = None,
           snapshot_times=(), omega_max: float | None = None,
           monitor=None, monitor_every: int = 1, energy_limit: float = 10.0) -> Trajectory:
    """Repeated :func:`rk4_step` with strided recording.

    Energy and (if ``carrier`` is given) the density centroid are recorded
    every ``stride`` steps; full snapshots are kept at ``snapshot_times``.
    ``monitor(state)`` returning truthy stops the run.
    """
    if omega_max is None:
        omega_max = max_frequency(model.spec, model.potential)
    if dt > 0.2 / omega_max + 1e-12:
        raise ValueError(f"dt={dt} exceeds stability bound 0.2/Omega_max={0.2 / omega_max:.4f}")
    traj = Trajectory(dt=dt)
    e0 = model.energy(state)
    pending = sorted(float(t) for t in snapshot_times)
    nsteps = int(round((t_end - state.t) / dt))
    t_start = state.t
    clock = time.perf_counter()

    def record(s):
        traj.times.append(s.t)
        traj.energy.append(model.energy(s))
        if carrier is not None:
            traj.centroid.append(density_centroid(model.spec, cell_density(s, carrier)))

    record(state)
    step = 0
    for step in range(1, nsteps + 1):
        state = rk4_step(model, state, dt)
        state.t = t_start + step * dt
        while pending and state.t >= pending[0] - 0.5 * dt:
            traj.snapshots.append(state.copy())
            pending.pop(0)
        if step % stride == 0:
            record(state)
            if e0 > 0 and traj.energy[-1] > energy_limit * e0:
                raise InstabilityError(
                    f"energy grew {traj.energy[-1] / e0:.1f}x by t={state.t:.2f}")
        if monitor is not None and step % monitor_every == 0 and monitor(state):
            traj.stopped_early = True
            break
    traj.steps = step
    traj.wall_time = time.perf_counter() - clock
    traj.final = state
    return traj


def amplitude_sq(state: FieldState, carrier: float) -> np.ndarray:
    """Per-site envelope estimate ``u^2 + (v / carrier)^2``."""
    if carrier <= 0:
        raise ValueError("carrier frequency must be positive")
    return state.u ** 2 + (state.v / carrier) ** 2


def cell_density(state: FieldState, carrier: float) -> np.ndarray:
    d = amplitude_sq(state, carrier)
    return d[0::2] + d[1::2]


def density_centroid(spec: LatticeSpec, density: np.ndarray):
    x, y = spec.cell_coords()
    total = density.sum()
    if total <= 0:
        return (np.nan, np.nan)
    return (float(density @ x / total), float(density @ y / total))


def spatial_spectrum(spec: LatticeSpec, values: np.ndarray):
    """Magnitude of the spatial DFT, peak-normalized.

    ``values`` is either per-site (two sublattice components, summed in
    power) or per-cell.  Returns ``(k, magnitude)``; ``k`` has shape
    ``(nx,)`` for a chain and ``(2, nx, ny)`` for a grid.
    """
    values = np.asarray(values)
    comps = [values[0::2], values[1::2]] if values.size == spec.nsites else [values]
    power = 0.0
    for c in comps:
        c = c.reshape(spec.nx, spec.ny)
        power = power + np.abs(np.fft.fftshift(np.fft.fft2(c))) ** 2
    mag = np.sqrt(power)
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    kx = np.fft.fftshift(np.fft.fftfreq(spec.nx, d=spec.a)) * 2 * np.pi
    if spec.is_1d:
        return kx, mag[:, 0]
    ky = np.fft.fftshift(np.fft.fftfreq(spec.ny, d=spec.a)) * 2 * np.pi
    return np.array(np.meshgrid(kx, ky, indexing="ij")), mag


SNAPSHOT_DTYPE = np.dtype([("m", "<i4"), ("n", "<i4"), ("sublattice", "u1"),
                           ("u", "<f8"), ("v", "<f8")])


def write_snapshot(spec: LatticeSpec, state: FieldState, path) -> None:
    """Flat binary record per site: (m, n, sublattice, u, v)."""
    rec = np.empty(spec.nsites, dtype=SNAPSHOT_DTYPE)
    idx = np.arange(spec.nsites)
    cell, s = np.divmod(idx, 2)
    rec["m"], rec["n"] = np.divmod(cell, spec.ny)
    rec["sublattice"] = s
    rec["u"], rec["v"] = state.u, state.v
    rec.tofile(path)


def read_snapshot(path) -> np.ndarray:
    return np.fromfile(path, dtype=SNAPSHOT_DTYPE)


def write_trajectory(spec: LatticeSpec, model: LatticeModel, traj: Trajectory, outdir,
                     prefix: str = "snap") -> Path:
    """Snapshot binaries plus an index CSV (step, t, file, energy)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    index = outdir / f"{prefix}_index.csv"
    with open(index, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "t", "file", "energy"])
        for i, s in enumerate(traj.snapshots):
            name = f"{prefix}_{i:03d}.bin"
            write_snapshot(spec, s, outdir / name)
            w.writerow([int(round(s.t / traj.dt)) if traj.dt else i, f"{s.t:.17g}", name, f"{model.energy(s):.17g}"])
    return index
