"""1D horizon-tunneling experiment: tanh tilt interface, decay rates vs frequency.

The chain is laid out left to right as a flat region (``n_left`` cells), the
tilt interface (``n_interface`` cells, horizon at its center) and the
over-tilted region (``n_right`` cells) where packets are launched.  Packets
move left toward the horizon on the large-momentum lower band; the fraction
that ends up in the flat region is the decay rate ``chi``.

The classical controller is programmed with *correspondence gains*: near the
band crossing the closed-loop dynamics reduce to ``(M0 - Omega*^2)/(2 Omega*)
+ M1/2``, so the x-direction gains are multiplied by ``classical_scale`` (2 by
default) and the tilt orientation is flipped, which makes the classical
near-cone dynamics coincide with the Bloch Hamiltonian used for the quantum
reference.
"""
from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.optimize import brentq
from scipy.special import expit

from .dynamics import (WavepacketSpec, cell_density, density_centroid, evolve,
                       init_wavepacket_classical, max_frequency, spatial_spectrum)
from .lattice import FieldState, LatticeSpec, build_lattice
from .potentials import tanh_interface
from .quantum import (QuantumState, band_energies, build_hamiltonian, init_wavepacket_quantum,
                      operator_norm, schrodinger_evolve)
from .spectra import BlochPencil, crossing_frequency, positive_branches

__all__ = [
    "HawkingConfig",
    "ChannelResult",
    "TunnelingRecord",
    "SweepResult",
    "rates",
    "chi",
    "quantum_chain",
    "classical_chain",
    "launch_momentum",
    "omega_of_packet",
    "run_quantum",
    "run_classical",
    "run_tunneling",
    "sweep",
    "write_sweep_csv",
]


@dataclass(frozen=True)
class HawkingConfig:
    n_left: int = 800
    n_interface: int = 400
    n_right: int = 800
    gamma_t: float = 0.1
    x0: float = 1600.0
    sigma: float = 60.0
    t_x: float = 1.0
    t_z: float = 1.0
    a: float = 1.0
    branch: int = 0
    classical_scale: float = 2.0
    dt_classical: float | None = None
    dt_quantum: float = 0.025
    t_end: float = 1845.0
    snapshot_times: tuple = (0.0, 198.0, 1174.0, 1845.0)
    omegas: tuple = (0.02, 0.035, 0.05, 0.065, 0.08)
    which: str = "both"
    check_every: float = 10.0
    plateau_window: float = 50.0
    plateau_tol: float = 3e-2
    stop_at_plateau: bool = False

    def __post_init__(self):
        for name in ("n_left", "n_interface", "n_right"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.gamma_t > 0:
            raise ValueError("gamma_t must be positive")
        if not self.sigma >= 4:
            raise ValueError("sigma must be at least 4 cells")
        if self.which not in ("classical", "quantum", "both"):
            raise ValueError("which must be classical, quantum or both")
        lo = (self.n_left + self.n_interface) * self.a
        if not lo <= self.x0 < self.n_cells * self.a:
            raise ValueError("x0 must lie in the over-tilted region")

    @property
    def n_cells(self) -> int:
        return self.n_left + self.n_interface + self.n_right

    @property
    def x_h(self) -> float:
        return (self.n_left + self.n_interface / 2.0) * self.a

    @property
    def left(self) -> slice:
        return slice(0, self.n_left)

    @property
    def right(self) -> slice:
        return slice(self.n_left + self.n_interface, self.n_cells)

    @property
    def interface(self) -> slice:
        return slice(self.n_left, self.n_left + self.n_interface)


@dataclass
class ChannelResult:
    kind: str
    omega_target: float
    omega: float
    k0: float
    branch: int
    carrier: float
    chi: float = float("nan")
    t_measure: float = float("nan")
    valid: bool = True
    reason: str = ""
    drift: float = 0.0
    snapshots: dict = field(default_factory=dict)
    centroids: dict = field(default_factory=dict)
    left_norm: list = field(default_factory=list)
    spectrum_peak_k: float = float("nan")
    steps: int = 0
    wall_time: float = 0.0


@dataclass
class TunnelingRecord:
    omega: float
    chi_c: float
    chi_q: float
    gamma_H: float
    gamma_s: float
    classical: ChannelResult | None = None
    quantum: ChannelResult | None = None

    @property
    def valid(self) -> bool:
        return all(r is None or r.valid for r in (self.classical, self.quantum))


@dataclass
class SweepResult:
    records: list
    slope_q: float
    slope_q_ci: tuple
    slope_c: float
    slope_c_ci: tuple
    rank_corr_c: float
    rank_corr_q: float
    config: HawkingConfig


def rates(omega, gamma_t: float):
    """``Gamma_H = exp(-2 pi omega / gamma_t)`` and ``Gamma_s = 1/(1 + exp(2 pi omega / gamma_t))``."""
    if not gamma_t > 0:
        raise ValueError("gamma_t must be positive")
    x = 2.0 * np.pi * np.asarray(omega, dtype=float) / gamma_t
    return np.exp(-x), expit(-x)


def chi(final, initial, left: slice, right: slice) -> float:
    """Flat-side final norm over launch-side initial norm."""
    denom = float(np.sum(np.asarray(initial)[right]))
    if denom <= 0:
        raise ValueError("initial density has zero norm on the launch side")
    return float(np.sum(np.asarray(final)[left])) / denom


def quantum_chain(config: HawkingConfig):
    spec = LatticeSpec(config.n_cells, 1, a=config.a, t_x=config.t_x, t_z=config.t_z,
                       dimensionality="chain1d")
    field_ = tanh_interface(spec, config.gamma_t, config.x_h)
    return spec, field_


def classical_chain(config: HawkingConfig):
    """Chain with correspondence gains; shares the quantum tilt samples."""
    s = config.classical_scale
    spec_q, field_q = quantum_chain(config)
    spec = LatticeSpec(config.n_cells, 1, a=config.a, t_x=s * config.t_x, t_z=config.t_z,
                       dimensionality="chain1d")
    return spec, field_q.scaled(-s)


def _launch_V(field_, config):
    cell = int(round(config.x0 / config.a))
    return float(field_.vx[cell, 0])


def _band(kind, spec, V, k, branch):
    if kind == "quantum":
        return float(band_energies(spec, V, k)[0][branch])
    w, _ = positive_branches(BlochPencil.at(spec, V, (k, 0.0)))
    return float(w[branch].real)


def _crossing(kind, spec, V):
    if kind == "quantum":
        return float(band_energies(spec, V, 0.0)[0].mean())
    return crossing_frequency(spec, V)


def launch_momentum(kind: str, config: HawkingConfig, omega: float, n_scan: int = 4001):
    """Momentum of the horizon-bound packet on ``config.branch`` at offset ``omega``.

    Picks the root of ``band(k) - crossing = omega`` on ``0 < k < pi`` whose
    group velocity points toward the horizon (negative), taking the largest
    such ``k``.
    """
    spec, field_ = quantum_chain(config) if kind == "quantum" else classical_chain(config)
    V = _launch_V(field_, config)
    star = _crossing(kind, spec, V)
    ks = np.linspace(1e-3, np.pi / spec.a - 1e-3, n_scan)
    f = np.array([_band(kind, spec, V, k, config.branch) for k in ks]) - star - omega
    vel = np.gradient(f, ks)
    roots = [i for i in range(n_scan - 1) if f[i] * f[i + 1] < 0 and vel[i] < 0]
    if not roots:
        raise ValueError(f"no horizon-bound {kind} mode at omega={omega}")
    i = roots[-1]
    k0 = brentq(lambda k: _band(kind, spec, V, k, config.branch) - star - omega,
                ks[i], ks[i + 1], xtol=1e-14)
    return float(k0)


def omega_of_packet(kind: str, config: HawkingConfig, k0: float) -> float:
    """|packet frequency - band crossing| in the launch region."""
    spec, field_ = quantum_chain(config) if kind == "quantum" else classical_chain(config)
    V = _launch_V(field_, config)
    omega = abs(_band(kind, spec, V, k0, config.branch) - _crossing(kind, spec, V))
    if omega < 1e-12:
        raise ValueError("packet sits on the band crossing (omega = 0)")
    return omega


class _Plateau:
    """Watches the flat-side norm and fixes the measurement time."""

    def __init__(self, config, density_of, initial_right):
        self.c = config
        self.density_of = density_of
        self.norm0 = initial_right
        self.history = []
        self.chi = np.nan
        self.t = np.nan
        self.invalid = ""
        self.edge = slice(0, int(3 * config.sigma / config.a))

    def __call__(self, state) -> bool:
        d = self.density_of(state)
        left = float(d[self.c.left].sum())
        inter = float(d[self.c.interface].sum())
        self.history.append((state.t, left / self.norm0))
        if not np.isnan(self.chi):
            return self.c.stop_at_plateau
        if left > 0 and d[self.edge].sum() > 1e-3 * left:
            self.invalid = f"flat-side packet reached the boundary at t={state.t:.1f}"
            return True
        start = state.t - self.c.plateau_window - 1e-9
        window = [v for t, v in self.history if t >= start]
        if len(window) < len(self.history) and inter < max(1e-2 * left, 1e-10 * self.norm0):
            now = self.history[-1][1]
            if now > 0 and max(window) - min(window) <= self.c.plateau_tol * now:
                # the classical envelope estimate beats slowly; average it out
                self.chi, self.t = float(np.mean(window)), state.t
                return self.c.stop_at_plateau
        return False


def _finish(res, plateau, snapshots, spec, config, complex_at):
    res.chi = plateau.chi
    res.t_measure = plateau.t
    res.left_norm = plateau.history
    if plateau.invalid:
        res.valid, res.reason = False, plateau.invalid
    elif np.isnan(plateau.chi):
        res.valid, res.reason = False, "flat-side norm did not plateau before t_end"
    x, _ = spec.cell_coords()
    for t, dens in snapshots.items():
        res.snapshots[t] = dens
        tot = dens.sum()
        res.centroids[t] = float(dens @ x / tot) if tot > 0 else float("nan")
    if complex_at is not None:
        field_ = complex_at.copy()
        cells = np.arange(spec.nsites) // 2
        field_[cells >= config.n_left] = 0.0
        if np.any(field_):
            k, mag = spatial_spectrum(spec, field_)
            res.spectrum_peak_k = float(k[int(np.argmax(mag))])


def run_quantum(config: HawkingConfig, omega: float) -> ChannelResult:
    clock = time.perf_counter()
    spec, field_ = quantum_chain(config)
    k0 = launch_momentum("quantum", config, omega)
    wp = WavepacketSpec((config.x0, 0.0), config.sigma, (k0, 0.0), config.branch)
    state, energy = init_wavepacket_quantum(spec, field_, wp)
    H = build_hamiltonian(spec, field_)
    res = ChannelResult("quantum", omega, omega_of_packet("quantum", config, k0), k0,
                        config.branch, energy)
    d0 = state.density()
    plateau = _Plateau(config, lambda s: s.density(), float(d0[config.right].sum()))
    every = max(1, int(round(config.check_every / config.dt_quantum)))
    hnorm = operator_norm(H)
    snaps = {}
    t_now, psi = 0.0, state
    for t_snap in sorted(set(config.snapshot_times) | {config.t_end}):
        if t_snap > t_now:
            psi = schrodinger_evolve(H, psi, config.dt_quantum, t_snap, t0=t_now,
                                     norm_bound=hnorm, monitor=plateau,
                                     monitor_every=every, max_norm_drift=np.inf)
            res.steps += int(round((psi.t - t_now) / config.dt_quantum))
            t_now = psi.t
            if psi.t < t_snap - 0.5 * config.dt_quantum:
                break
        if t_snap in config.snapshot_times:
            snaps[t_snap] = psi.density()
    res.drift = abs(psi.norm - state.norm) / state.norm
    _finish(res, plateau, snaps, spec, config, psi.psi)
    if res.drift > 1e-8:
        res.valid, res.reason = False, f"norm drift {res.drift:.2e}"
    res.wall_time = time.perf_counter() - clock
    return res


def run_classical(config: HawkingConfig, omega: float) -> ChannelResult:
    clock = time.perf_counter()
    spec, field_ = classical_chain(config)
    model = build_lattice(spec, field_)
    k0 = launch_momentum("classical", config, omega)
    wp = WavepacketSpec((config.x0, 0.0), config.sigma, (k0, 0.0), config.branch)
    state, carrier = init_wavepacket_classical(model, wp)
    res = ChannelResult("classical", omega, omega_of_packet("classical", config, k0), k0,
                        config.branch, carrier)
    omax = max_frequency(spec, field_)
    dt = config.dt_classical or min(0.05, 0.2 / omax)
    d0 = cell_density(state, carrier)
    plateau = _Plateau(config, lambda s: cell_density(s, carrier), float(d0[config.right].sum()))
    every = max(1, int(round(config.check_every / dt)))
    traj = evolve(model, state, dt, config.t_end, stride=every, carrier=carrier,
                  snapshot_times=[t for t in config.snapshot_times if t > 0], omega_max=omax,
                  monitor=plateau, monitor_every=every)
    res.steps = traj.steps
    e = np.asarray(traj.energy)
    res.drift = float(abs(e[-1] - e[0]) / e[0])
    snaps = {0.0: d0} if 0.0 in config.snapshot_times else {}
    later = [t for t in sorted(config.snapshot_times) if t > 0]
    for t, s in zip(later, traj.snapshots):
        snaps[t] = cell_density(s, carrier)
    final = traj.final
    _finish(res, plateau, snaps, spec, config, final.u + 1j * final.v / carrier)
    res.wall_time = time.perf_counter() - clock
    return res


def run_tunneling(config: HawkingConfig, omega: float) -> TunnelingRecord:
    gH, gs = rates(omega, config.gamma_t)
    c = run_classical(config, omega) if config.which in ("classical", "both") else None
    q = run_quantum(config, omega) if config.which in ("quantum", "both") else None
    return TunnelingRecord(float(omega), c.chi if c else float("nan"),
                           q.chi if q else float("nan"), float(gH), float(gs), c, q)


def _fit(omegas, chis):
    omegas, chis = np.asarray(omegas), np.asarray(chis)
    ok = np.isfinite(chis) & (chis > 0)
    if ok.sum() < 3:
        return float("nan"), (float("nan"), float("nan"))
    fit = stats.linregress(omegas[ok], np.log(chis[ok]))
    half = stats.t.ppf(0.975, ok.sum() - 2) * fit.stderr
    return float(fit.slope), (float(fit.slope - half), float(fit.slope + half))


def _spearman(omegas, chis):
    ok = np.isfinite(chis)
    if ok.sum() < 2:
        return float("nan")
    return float(stats.spearmanr(np.asarray(omegas)[ok], np.asarray(chis)[ok]).statistic)


def sweep(config: HawkingConfig, omegas=None, threads: int = 1) -> SweepResult:
    """One tunneling run per frequency offset, merged in ``omegas`` order."""
    omegas = list(config.omegas if omegas is None else omegas)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run_tunneling, [config] * len(omegas), omegas))
    else:
        records = [run_tunneling(config, w) for w in omegas]
    for r in records:
        # an invalid member run only voids its own sweep point
        if r.classical is not None and not r.classical.valid:
            r.chi_c = float("nan")
        if r.quantum is not None and not r.quantum.valid:
            r.chi_q = float("nan")
    chi_q = np.array([r.chi_q for r in records])
    chi_c = np.array([r.chi_c for r in records])
    sq, ciq = _fit(omegas, chi_q)
    sc, cic = _fit(omegas, chi_c)
    return SweepResult(records, sq, ciq, sc, cic, _spearman(omegas, chi_c),
                       _spearman(omegas, chi_q), config)


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "chi_c", "chi_q", "gamma_H", "gamma_s"])
        for r in result.records:
            w.writerow([f"{v:.17g}" for v in (r.omega, r.chi_c, r.chi_q, r.gamma_H, r.gamma_s)])


def config_dict(config: HawkingConfig) -> dict:
    return asdict(config)
