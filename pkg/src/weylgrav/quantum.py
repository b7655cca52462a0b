"""Tight-binding Weyl Hamiltonian in real space and its Schrodinger evolution."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import eigsh

from .lattice import SIGMA0, SIGMAX, SIGMAY, SIGMAZ, LatticeSpec, _neighbors, _pair

__all__ = [
    "QuantumState",
    "bloch_hamiltonian",
    "build_hamiltonian",
    "operator_norm",
    "schrodinger_evolve",
    "init_wavepacket_quantum",
    "band_energies",
    "NormDriftError",
]


class NormDriftError(RuntimeError):
    pass


@dataclass
class QuantumState:
    psi: np.ndarray
    t: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def density(self) -> np.ndarray:
        """|psi|^2 summed over the two sublattices of each cell."""
        d = np.abs(self.psi) ** 2
        return d[0::2] + d[1::2]


def bloch_hamiltonian(spec: LatticeSpec, V, k) -> np.ndarray:
    """``sum_j t_j (sigma_j - V_j) sin(k_j a) + t_z sigma_z (2 - cos k_x a - cos k_y a)``."""
    Vx, Vy = _pair(V, "V")
    kx, ky = _pair(k, "k")
    a = spec.a
    if spec.is_1d:
        return (spec.t_x * (SIGMAX - Vx * SIGMA0) * np.sin(kx * a)
                + spec.t_z * SIGMAZ * (1 - np.cos(kx * a)))
    return (spec.t_x * (SIGMAX - Vx * SIGMA0) * np.sin(kx * a)
            + spec.t_y * (SIGMAY - Vy * SIGMA0) * np.sin(ky * a)
            + spec.t_z * SIGMAZ * (2 - np.cos(kx * a) - np.cos(ky * a)))


def band_energies(spec: LatticeSpec, V, k):
    """Eigenvalues (ascending) and eigenvectors of the Bloch Hamiltonian."""
    return np.linalg.eigh(bloch_hamiltonian(spec, V, k))


def build_hamiltonian(spec: LatticeSpec, field) -> sps.csr_matrix:
    """Real-space Hermitian operator whose Bloch reduction is ``bloch_hamiltonian``.

    A term ``c sin(k a)`` becomes hops ``-i c/2`` forward and ``+i c/2``
    backward; ``c cos(k a)`` becomes ``c/2`` both ways.  The tilt on a bond
    uses the mean of the potential at its two cells.
    """
    vx = np.asarray(field.vx, dtype=float).ravel()
    vy = np.asarray(field.vy, dtype=float).ravel()
    if vx.size != spec.ncells:
        raise ValueError("potential does not match lattice size")
    cells = np.arange(spec.ncells)
    A, B = 2 * cells, 2 * cells + 1
    onsite = spec.coordination // 2 * spec.t_z
    rows = [A, B]
    cols = [A, B]
    vals = [np.full(spec.ncells, onsite, dtype=complex), np.full(spec.ncells, -onsite, dtype=complex)]

    def hop(i, j, v):
        # add v at (i, j) and its conjugate at (j, i)
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([v, np.conj(v)])

    for dm, dn in ((1, 0), (0, 1)):
        if spec.is_1d and dn:
            continue
        nb = _neighbors(spec, dm, dn)
        has = nb >= 0
        c, c2 = cells[has], nb[has]
        t, tilt = (spec.t_x, vx) if dm else (spec.t_y, vy)
        vbar = 0.5 * (tilt[c] + tilt[c2])
        # t_z sigma_z (-cos) -> -t_z/2 on A, +t_z/2 on B
        hop(2 * c, 2 * c2, np.full(c.size, -spec.t_z / 2, dtype=complex) + 1j * t * vbar / 2)
        hop(2 * c + 1, 2 * c2 + 1, np.full(c.size, spec.t_z / 2, dtype=complex) + 1j * t * vbar / 2)
        if dm:
            # t_x sigma_x sin k_x
            hop(2 * c, 2 * c2 + 1, np.full(c.size, -1j * t / 2))
            hop(2 * c + 1, 2 * c2, np.full(c.size, -1j * t / 2))
        else:
            # t_y sigma_y sin k_y: sigma_y[A,B] = -i, sigma_y[B,A] = +i
            hop(2 * c, 2 * c2 + 1, np.full(c.size, -t / 2, dtype=complex))
            hop(2 * c + 1, 2 * c2, np.full(c.size, t / 2, dtype=complex))

    n = spec.nsites
    H = sps.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(n, n)).tocsr()
    H.sum_duplicates()
    resid = abs(H - H.getH()).max() if H.nnz else 0.0
    if resid > 1e-12:
        raise RuntimeError(f"Hamiltonian not Hermitian (residual {resid:.2e})")
    return H


def operator_norm(H) -> float:
    """Spectral norm of a Hermitian sparse operator."""
    if H.shape[0] <= 64:
        return float(np.max(np.abs(np.linalg.eigvalsh(H.toarray()))))
    return float(abs(eigsh(H, k=1, which="LM", return_eigenvectors=False, tol=1e-6)[0]))


def _rk4(H, psi, dt):
    k1 = -1j * (H @ psi)
    k2 = -1j * (H @ (psi + 0.5 * dt * k1))
    k3 = -1j * (H @ (psi + 0.5 * dt * k2))
    k4 = -1j * (H @ (psi + dt * k3))
    return psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def schrodinger_evolve(H, psi0, dt: float, t_end: float, *, t0: float = 0.0,
                       max_norm_drift: float = 1e-8, norm_bound: float | None = None,
                       monitor=None, monitor_every: int = 1) -> QuantumState:
    """Integrate ``i dpsi/dt = H psi`` with classical RK4.

    ``monitor(state)`` is called every ``monitor_every`` steps; a truthy
    return stops the run early.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    hn = operator_norm(H) if norm_bound is None else norm_bound
    if dt * hn > 0.1 + 1e-12:
        raise ValueError(f"dt*|H| = {dt * hn:.3f} exceeds 0.1")
    psi = np.array(psi0.psi if isinstance(psi0, QuantumState) else psi0, dtype=complex)
    n0 = np.linalg.norm(psi)
    nsteps = int(round((t_end - t0) / dt))
    state = QuantumState(psi, t0)
    for step in range(1, nsteps + 1):
        psi = _rk4(H, psi, dt)
        state = QuantumState(psi, t0 + step * dt)
        if monitor is not None and step % monitor_every == 0:
            if monitor(state):
                break
    if n0 > 0:
        drift = abs(np.linalg.norm(psi) - n0) / n0
        if drift > max_norm_drift:
            raise NormDriftError(f"norm drift {drift:.2e} over t={state.t:.1f}")
    return state


def init_wavepacket_quantum(spec: LatticeSpec, field, wp):
    """Gaussian envelope times ``exp(i k0.r)`` times the local band spinor.

    Returns ``(state, energy)``; ``wp.branch`` counts bands from the bottom.
    """
    x, y = spec.cell_coords()
    cx, cy = wp.center
    cell = int(np.argmin((x - cx) ** 2 + (y - cy) ** 2))
    V = (float(np.ravel(field.vx)[cell]), float(np.ravel(field.vy)[cell]))
    k0 = _pair(wp.k0, "k0")
    energies, vecs = band_energies(spec, V, k0)
    if abs(energies[1] - energies[0]) < 1e-8:
        raise ValueError(f"bands degenerate at k0={tuple(k0)}")
    spinor = vecs[:, wp.branch]
    _warn_boundary(spec, wp)
    env = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * wp.sigma ** 2)
                 + 1j * (k0[0] * x + k0[1] * y))
    psi = np.empty(spec.nsites, dtype=complex)
    psi[0::2] = env * spinor[0]
    psi[1::2] = env * spinor[1]
    psi *= wp.amplitude / np.linalg.norm(psi)
    return QuantumState(psi, 0.0), float(energies[wp.branch])


def _warn_boundary(spec, wp):
    cx, cy = wp.center
    gaps = [cx, (spec.nx - 1) * spec.a - cx]
    if not spec.is_1d:
        gaps += [cy, (spec.ny - 1) * spec.a - cy]
    if min(gaps) < 3 * wp.sigma:
        warnings.warn(f"wavepacket center {wp.center} within 3 sigma of the boundary",
                      stacklevel=3)
