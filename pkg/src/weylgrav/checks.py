"""Plane-wave fitting oracles and the ``validate`` check suite.

The fitting routines recover the Bloch matrices purely from real-space
operators, so they are independent of the closed forms they check.
"""
from __future__ import annotations

import time

import numpy as np

from .lattice import FieldState, LatticeSpec, acceleration, bloch_matrices, build_lattice, stability_scan
from .potentials import uniform_field

__all__ = [
    "plane_wave",
    "fit_classical_pencil",
    "fit_quantum_bloch",
    "commensurate_kpoints",
    "validate_suite",
]


def plane_wave(spec: LatticeSpec, k, sublattice: int) -> np.ndarray:
    """Complex per-site field ``exp(i k.r)`` on one sublattice, zero on the other."""
    x, y = spec.cell_coords()
    phase = np.exp(1j * (k[0] * x + k[1] * y))
    out = np.zeros(spec.nsites, dtype=complex)
    out[sublattice::2] = phase
    return out


def _apply_real(op, z: np.ndarray) -> np.ndarray:
    # real operator applied to Re and Im separately
    return op(z.real) + 1j * op(z.imag)


def _project(spec, k, field_: np.ndarray) -> np.ndarray:
    """Bloch amplitudes (A, B) of a response, checking it is a pure plane wave."""
    x, y = spec.cell_coords()
    phase = np.exp(1j * (k[0] * x + k[1] * y))
    amps = np.array([field_[0::2] / phase, field_[1::2] / phase])
    mean = amps.mean(axis=1)
    spread = np.max(np.abs(amps - mean[:, None]))
    if spread > 1e-10 * max(1.0, np.max(np.abs(mean))):
        raise AssertionError(f"response is not a plane wave at k={k} (spread {spread:.2e})")
    return mean


def fit_classical_pencil(model, k):
    """Recover ``(M0, M1)`` by driving ``acceleration()`` with plane waves.

    With ``u = e exp(i(k.r - Omega t))`` the equations of motion give
    ``accel = -M0 u`` for ``v = 0`` and ``accel = -i M1 v`` for ``u = 0``
    (using ``M1 = i G(k)``).
    """
    spec = model.spec
    M0 = np.zeros((2, 2), dtype=complex)
    G = np.zeros((2, 2), dtype=complex)
    zero = np.zeros(spec.nsites)
    for s in (0, 1):
        pw = plane_wave(spec, k, s)
        a_u = _apply_real(lambda r: acceleration(model, FieldState(r, zero)), pw)
        a_v = _apply_real(lambda r: acceleration(model, FieldState(zero, r)), pw)
        M0[:, s] = -_project(spec, k, a_u)
        G[:, s] = _project(spec, k, a_v)
    return M0, 1j * G


def fit_quantum_bloch(spec: LatticeSpec, H, k) -> np.ndarray:
    """Recover the 2x2 Bloch Hamiltonian from a real-space operator ``H``."""
    out = np.zeros((2, 2), dtype=complex)
    for s in (0, 1):
        out[:, s] = _project(spec, k, H @ plane_wave(spec, k, s))
    return out


def commensurate_kpoints(spec: LatticeSpec, count: int, seed: int = 0):
    """``count`` distinct momenta that are allowed on the periodic lattice."""
    rng = np.random.default_rng(seed)
    picks = {(0, 0)}
    while len(picks) < count:
        picks.add((int(rng.integers(spec.nx)), 0 if spec.is_1d else int(rng.integers(spec.ny))))
    ks = []
    for jx, jy in sorted(picks):
        kx = 2 * np.pi * jx / (spec.nx * spec.a)
        ky = 0.0 if spec.is_1d else 2 * np.pi * jy / (spec.ny * spec.a)
        ks.append((np.angle(np.exp(1j * kx)), np.angle(np.exp(1j * ky))))
    return ks


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


def validate_suite(n: int = 16, n_k: int = 25):
    """Stability scan and Bloch-oracle checks; returns ``(name, passed, detail)`` rows."""
    from .quantum import bloch_hamiltonian, build_hamiltonian

    rows = []
    spec = LatticeSpec(n, n, boundary="periodic")
    ks = commensurate_kpoints(spec, n_k)
    for V in ((0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (2.0, 0.0)):
        t0 = time.perf_counter()
        field_ = uniform_field(spec, V)
        model = build_lattice(spec, field_)
        H = build_hamiltonian(spec, field_)
        err_c = err_q = 0.0
        for k in ks:
            M0, M1 = fit_classical_pencil(model, k)
            R0, R1 = bloch_matrices(spec, V, k)
            err_c = max(err_c, _rel(M0, R0), _rel(M1, R1))
            err_q = max(err_q, _rel(fit_quantum_bloch(spec, H, k), bloch_hamiltonian(spec, V, k)))
        dt = time.perf_counter() - t0
        rows.append((f"bloch_classical V={V}", err_c < 1e-10, f"max rel err {err_c:.2e} ({dt:.2f}s)"))
        rows.append((f"bloch_quantum V={V}", err_q < 1e-12, f"max rel err {err_q:.2e}"))

    im, m0 = stability_scan(LatticeSpec(2, 2), (0.0, 0.0), 64)
    rows.append(("stability beta=-8t_z", im < 1e-9 and m0 >= -1e-12,
                 f"max|Im|={im:.2e} min eig M0={m0:.2e}"))
    im6, m06 = stability_scan(LatticeSpec(2, 2, beta=-6.0), (0.0, 0.0), 64)
    rows.append(("instability beta=-6t_z", m06 < 0, f"max|Im|={im6:.2e} min eig M0={m06:.2e}"))
    return rows
