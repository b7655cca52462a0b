"""Quadratic eigenvalue problem of the Bloch pencil and derived band data."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .lattice import LatticeSpec, bloch_matrices, _pair

__all__ = [
    "BlochPencil",
    "SpectrumSample",
    "ConeParams",
    "quadratic_eigensolve",
    "positive_branches",
    "band_path",
    "cone_params",
    "classify_tilt",
    "crossing_frequency",
    "write_band_csv",
]

RESIDUAL_TOL = 1e-9
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class BlochPencil:
    M0: np.ndarray
    M1: np.ndarray
    k: tuple = (0.0, 0.0)
    V: tuple = (0.0, 0.0)

    @classmethod
    def at(cls, spec: LatticeSpec, V, k) -> "BlochPencil":
        M0, M1 = bloch_matrices(spec, V, k)
        return cls(M0, M1, tuple(_pair(k, "k")), tuple(_pair(V, "V")))


@dataclass
class SpectrumSample:
    k: tuple
    omegas: np.ndarray             # 4 complex values, sorted by (Re, Im)
    positive: np.ndarray           # 2 positive branches, continued along the path
    group_velocity: np.ndarray     # shape (2, 2): branch x direction
    tilt_class: str


@dataclass
class ConeParams:
    slopes_x: np.ndarray
    slopes_y: np.ndarray
    slopes_along: np.ndarray
    direction: tuple
    tilt_class: str


def quadratic_eigensolve(p: BlochPencil):
    """Roots of ``det(Omega^2 - Omega M1 - M0) = 0`` via companion linearization.

    Returns ``(omegas, modes)`` with ``modes[:, j]`` the unit-norm vector for
    ``omegas[j]``; eigenvalues are sorted by real part, ties by imaginary part.
    """
    M0 = np.asarray(p.M0, dtype=complex)
    M1 = np.asarray(p.M1, dtype=complex)
    for name, M in (("M0", M0), ("M1", M1)):
        if np.max(np.abs(M - M.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(M))):
            raise ValueError(f"{name} is not Hermitian")
    n = M0.shape[0]
    L = np.block([[np.zeros((n, n)), np.eye(n)], [M0, M1]])
    w, vecs = np.linalg.eig(L)
    # round before sorting so that numerically equal real parts tie-break on Im
    order = np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)))
    w = w[order]
    modes = vecs[:n, order]
    modes = modes / np.linalg.norm(modes, axis=0)
    scale = 1.0 + np.abs(w) ** 2 + np.abs(w) * np.linalg.norm(M1, 2) + np.linalg.norm(M0, 2)
    for j in range(2 * n):
        e = modes[:, j]
        res = np.linalg.norm((w[j] ** 2) * e - w[j] * (M1 @ e) - M0 @ e)
        if res > RESIDUAL_TOL * scale[j]:
            raise RuntimeError(f"eigenpair {j} residual {res:.3e} exceeds tolerance")
    return w, modes


def positive_branches(p: BlochPencil):
    """The two eigenpairs with largest real part (the positive-frequency bands)."""
    w, modes = quadratic_eigensolve(p)
    return w[2:], modes[:, 2:]


def _paired(ref, wb, mb):
    """Reorder ``(wb, mb)`` so column j continues column j of ``ref``."""
    ov = np.abs(ref.conj().T @ mb)
    if ov[0, 0] * ov[1, 1] >= ov[0, 1] * ov[1, 0]:
        return wb, mb
    return wb[::-1], mb[:, ::-1]


def classify_tilt(slopes, tol: float = 1e-3) -> str:
    s = np.sort(np.asarray(slopes, dtype=float))
    if s[0] < 0 < s[1] and abs(s[0] + s[1]) < tol:
        return "untilted"
    small = np.abs(s) < tol
    if small.sum() == 1:
        return "critical"
    if np.all(s > 0) or np.all(s < 0):
        return "over"
    return "under"


def _slopes(spec, V, k0, direction, dk):
    e = np.asarray(direction, dtype=float)
    k0 = np.asarray(k0, dtype=float)
    wp, mp = positive_branches(BlochPencil.at(spec, V, k0 + dk * e))
    wm, mm = positive_branches(BlochPencil.at(spec, V, k0 - dk * e))
    wm, mm = _paired(mp, wm, mm)
    return (wp.real - wm.real) / (2 * dk)


def cone_params(spec: LatticeSpec, V, dk: float = 1e-4, tol: float = 1e-3) -> ConeParams:
    """Slopes of the positive branches through the node at ``k = 0``.

    Branches on either side of the node are paired by mode overlap, so a
    tilted cone is not folded back onto itself by value sorting.
    """
    V = _pair(V, "V")
    sx = _slopes(spec, V, (0.0, 0.0), (1.0, 0.0), dk)
    sy = np.zeros(2) if spec.is_1d else _slopes(spec, V, (0.0, 0.0), (0.0, 1.0), dk)
    if np.hypot(*V) > 0 and not spec.is_1d:
        direction = tuple(V / np.hypot(*V))
    else:
        direction = (1.0, 0.0)
    along = sx if direction == (1.0, 0.0) else _slopes(spec, V, (0.0, 0.0), direction, dk)
    return ConeParams(sx, sy, along, direction, classify_tilt(along, tol))


def band_path(spec: LatticeSpec, V, k_path, dk: float = 1e-4) -> list[SpectrumSample]:
    """Spectrum along ``k_path`` with positive branches continued by overlap."""
    V = _pair(V, "V")
    cls = cone_params(spec, V).tilt_class
    out = []
    prev = None
    for k in k_path:
        k = _pair(k, "k")
        pencil = BlochPencil.at(spec, V, k)
        w, modes = quadratic_eigensolve(pencil)
        wp, mp = w[2:], modes[:, 2:]
        if prev is not None:
            wp, mp = _paired(prev, wp, mp)
        if abs(wp[1] - wp[0]) > 1e-8:
            # a degenerate node has no preferred basis; keep the last good one
            prev = mp
        vg = np.zeros((2, 2))
        for d, e in enumerate(((1.0, 0.0), (0.0, 1.0))):
            if spec.is_1d and d == 1:
                continue
            a, ma = positive_branches(BlochPencil.at(spec, V, k + dk * np.array(e)))
            b, mb = positive_branches(BlochPencil.at(spec, V, k - dk * np.array(e)))
            a, ma = _paired(mp, a, ma)
            # pair across k so a node in the middle does not scramble branches
            b, mb = _paired(ma, b, mb)
            vg[:, d] = (a.real - b.real) / (2 * dk)
        out.append(SpectrumSample(tuple(k), w, wp, vg, cls))
    return out


def crossing_frequency(spec: LatticeSpec, V=0.0, n_scan: int = 2001,
                       gap_tol: float = 1e-6) -> float:
    """Frequency where the two positive branches touch, scanned along k_x."""
    V = _pair(V, "V")

    def gap(kx):
        w, _ = positive_branches(BlochPencil.at(spec, V, (kx, 0.0)))
        return float(w[1].real - w[0].real)

    ks = np.linspace(-np.pi / spec.a, np.pi / spec.a, n_scan)
    gaps = np.array([gap(k) for k in ks])
    i = int(np.argmin(gaps))
    lo, hi = ks[max(i - 1, 0)], ks[min(i + 1, n_scan - 1)]
    res = minimize_scalar(gap, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    kbest = res.x if res.fun < gaps[i] else ks[i]
    if min(res.fun, gaps[i]) > gap_tol:
        raise RuntimeError(f"no band crossing found (minimum gap {min(res.fun, gaps[i]):.3e})")
    w, _ = positive_branches(BlochPencil.at(spec, V, (kbest, 0.0)))
    return float(w.real.mean())


def write_band_csv(samples: list[SpectrumSample], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k_x", "k_y"] + [f"ReOmega_{i}" for i in range(1, 5)]
                   + [f"ImOmega_{i}" for i in range(1, 5)] + ["class"])
        for s in samples:
            w.writerow([f"{s.k[0]:.17g}", f"{s.k[1]:.17g}"]
                       + [f"{x:.17g}" for x in s.omegas.real]
                       + [f"{x:.17g}" for x in s.omegas.imag] + [s.tilt_class])
