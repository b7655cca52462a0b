"""Two-sublattice square network with active feedback couplings.

Sites are indexed ``2 * (m * ny + n) + s`` with ``s = 0`` for the A mass and
``s = 1`` for the B mass of cell ``(m, n)``.  Masses are normalized to 1, so the
closed-loop equations of motion read::

    du/dt = v
    dv/dt = -K u + G v

with ``K`` collecting the passive host springs and every displacement gain, and
``G`` collecting the velocity gains of the controller.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sps

__all__ = [
    "LatticeSpec",
    "SiteId",
    "FieldState",
    "GainTable",
    "HostTable",
    "LatticeModel",
    "build_lattice",
    "acceleration",
    "bloch_matrices",
    "stability_scan",
    "site_index",
    "site_of",
]

SIGMA0 = np.eye(2, dtype=complex)
SIGMAX = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMAY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMAZ = np.array([[1, 0], [0, -1]], dtype=complex)

# (dm, dn) in the order used for neighbor tables
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry and coupling constants of the network.

    ``beta`` defaults to ``-8 * t_z``.  ``tilt_eval`` selects where the tilt
    gains sample the potential: ``"bond"`` uses the mean of the two cells
    joined by the measurement (energy conserving), ``"cell"`` uses the
    actuated cell only.
    """

    nx: int
    ny: int = 1
    a: float = 1.0
    t_x: float = 1.0
    t_y: float = 1.0
    t_z: float = 1.0
    beta: float | None = None
    boundary: str = "fixed"
    dimensionality: str = "grid2d"
    tilt_eval: str = "bond"

    def __post_init__(self):
        if self.beta is None:
            object.__setattr__(self, "beta", -8.0 * self.t_z)
        if self.dimensionality not in ("chain1d", "grid2d"):
            raise ValueError(f"unknown dimensionality {self.dimensionality!r}")
        if self.boundary not in ("fixed", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.tilt_eval not in ("bond", "cell"):
            raise ValueError(f"unknown tilt_eval {self.tilt_eval!r}")
        if int(self.nx) < 1 or int(self.ny) < 1:
            raise ValueError("nx and ny must be positive")
        if self.dimensionality == "chain1d" and self.ny != 1:
            raise ValueError("chain1d requires ny == 1")
        if not self.t_z > 0:
            raise ValueError("t_z must be positive")
        for name in ("a", "t_x", "t_y", "t_z", "beta"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def is_1d(self) -> bool:
        return self.dimensionality == "chain1d"

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def nsites(self) -> int:
        return 2 * self.nx * self.ny

    @property
    def coordination(self) -> int:
        return 2 if self.is_1d else 4

    @property
    def directions(self):
        return DIRECTIONS[:2] if self.is_1d else DIRECTIONS

    @property
    def stability_beta(self) -> float:
        """Largest self-gain for which the static stiffness stays semidefinite."""
        return -2.0 * self.coordination * self.t_z

    def cell_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical (x, y) of every cell, flattened in cell order."""
        m, n = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        return (m.ravel() * self.a).astype(float), (n.ravel() * self.a).astype(float)


@dataclass(frozen=True)
class SiteId:
    m: int
    n: int
    sublattice: str  # "A" or "B"


def site_index(spec: LatticeSpec, site: SiteId) -> int:
    if not (0 <= site.m < spec.nx and 0 <= site.n < spec.ny):
        raise IndexError(f"{site} outside {spec.nx}x{spec.ny} lattice")
    return 2 * (site.m * spec.ny + site.n) + (0 if site.sublattice == "A" else 1)


def site_of(spec: LatticeSpec, index: int) -> SiteId:
    cell, s = divmod(int(index), 2)
    m, n = divmod(cell, spec.ny)
    return SiteId(m, n, "AB"[s])


@dataclass
class FieldState:
    """Displacement and velocity of every site at time ``t``."""

    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape or self.u.ndim != 1:
            raise ValueError("u and v must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("state contains non-finite values")

    @classmethod
    def zeros(cls, spec: LatticeSpec, t: float = 0.0) -> "FieldState":
        return cls(np.zeros(spec.nsites), np.zeros(spec.nsites), t)

    def copy(self) -> "FieldState":
        return FieldState(self.u.copy(), self.v.copy(), self.t)


@dataclass
class GainTable:
    """Controller gains: acceleration of ``actuated`` += ``gain`` * signal.

    ``quantity`` is 0 for a displacement measurement and 1 for a velocity one.
    ``direction`` is the index into ``DIRECTIONS`` of the measured neighbor, or
    -1 for a self measurement.
    """

    actuated: np.ndarray
    measured: np.ndarray
    quantity: np.ndarray
    gain: np.ndarray
    direction: np.ndarray

    def __len__(self):
        return len(self.gain)

    def entries(self):
        for i in range(len(self)):
            yield (int(self.actuated[i]), int(self.measured[i]),
                   "uv"[self.quantity[i]], float(self.gain[i]))


@dataclass
class HostTable:
    """Passive springs, one row per bond."""

    site: np.ndarray
    neighbor: np.ndarray
    stiffness: np.ndarray
    # fixed-boundary wall springs tie a site to a clamped virtual neighbor
    wall_site: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    wall_stiffness: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.stiffness)


@dataclass
class LatticeModel:
    spec: LatticeSpec
    potential: "object"
    host_table: HostTable
    gain_table: GainTable
    K: sps.csr_matrix
    G: sps.csr_matrix

    @cached_property
    def first_order(self) -> sps.csr_matrix:
        """Operator acting on the stacked state ``[u; v]``."""
        n = self.spec.nsites
        eye = sps.identity(n, format="csr")
        return sps.bmat([[None, eye], [-self.K, self.G]], format="csr")

    def energy(self, state: FieldState) -> float:
        """Kinetic plus static-stiffness energy; conserved when G is skew."""
        return 0.5 * float(state.v @ state.v) + 0.5 * float(state.u @ (self.K @ state.u))


def _neighbors(spec: LatticeSpec, dm: int, dn: int) -> np.ndarray:
    """Neighbor cell index for every cell, -1 where the neighbor is missing."""
    m, n = np.meshgrid(np.arange(spec.nx), np.arange(spec.ny), indexing="ij")
    m2, n2 = m + dm, n + dn
    if spec.boundary == "periodic":
        m2 %= spec.nx
        n2 %= spec.ny
        return (m2 * spec.ny + n2).ravel()
    ok = (m2 >= 0) & (m2 < spec.nx) & (n2 >= 0) & (n2 < spec.ny)
    out = np.where(ok, m2 * spec.ny + n2, -1)
    return out.ravel()


def build_lattice(spec: LatticeSpec, field) -> LatticeModel:
    """Assemble host springs and controller gains for ``spec`` and ``field``.

    ``field`` is a :class:`~weylgrav.potentials.PotentialField` (anything with
    ``vx``/``vy`` arrays of shape ``(nx, ny)`` works).
    """
    vx = np.asarray(field.vx, dtype=float)
    vy = np.asarray(field.vy, dtype=float)
    if vx.shape != (spec.nx, spec.ny) or vy.shape != (spec.nx, spec.ny):
        raise ValueError(
            f"potential shape {vx.shape} does not match lattice {(spec.nx, spec.ny)}")
    vx, vy = vx.ravel(), vy.ravel()
    if spec.is_1d and np.any(vy != 0):
        raise ValueError("chain1d lattice requires Vy == 0")

    cells = np.arange(spec.ncells)
    A, B = 2 * cells, 2 * cells + 1
    tx, ty, tz, beta = spec.t_x, spec.t_y, spec.t_z, spec.beta
    z = spec.coordination

    act, meas, qty, gain, dirs = [], [], [], [], []

    def add(a_sites, m_sites, q, g, d):
        g = np.broadcast_to(np.asarray(g, dtype=float), a_sites.shape)
        keep = g != 0.0
        act.append(a_sites[keep])
        meas.append(m_sites[keep])
        qty.append(np.full(keep.sum(), q, dtype=np.int8))
        gain.append(g[keep])
        dirs.append(np.full(keep.sum(), d, dtype=np.int8))

    # self-displacement gains
    add(A, A, 0, beta / 2.0, -1)
    add(B, B, 0, (beta + 2.0 * z * tz) / 2.0, -1)

    host_site, host_nb, wall_site = [], [], []
    for d, (dm, dn) in enumerate(spec.directions):
        nb = _neighbors(spec, dm, dn)
        has = nb >= 0
        c, c2 = cells[has], nb[has]
        if dm:
            tilt = vx
            sgn = dm
        else:
            tilt = vy
            sgn = dn
        if spec.tilt_eval == "bond":
            vbar = 0.5 * (tilt[c] + tilt[c2])
        else:
            vbar = tilt[c]

        # host springs, counted once per bond
        if sgn > 0:
            for s in (0, 1):
                host_site.append(2 * c + s)
                host_nb.append(2 * c2 + s)
        missing = cells[~has]
        for s in (0, 1):
            wall_site.append(2 * missing + s)

        # B: -t_z from every active same-sublattice neighbor
        add(2 * c + 1, 2 * c2 + 1, 0, -tz, d)
        # tilt gains on both sublattices: -sgn * V / 2
        add(2 * c, 2 * c2, 1, -sgn * vbar / 2.0, d)
        add(2 * c + 1, 2 * c2 + 1, 1, -sgn * vbar / 2.0, d)
        if dm:
            # t_x velocity cross gains A <- B and B <- A
            add(2 * c, 2 * c2 + 1, 1, sgn * tx / 2.0, d)
            add(2 * c + 1, 2 * c2, 1, sgn * tx / 2.0, d)
        else:
            # t_y displacement cross gains, opposite signs on A and B
            add(2 * c, 2 * c2 + 1, 0, sgn * ty / 2.0, d)
            add(2 * c + 1, 2 * c2, 0, -sgn * ty / 2.0, d)

    table = GainTable(
        actuated=np.concatenate(act), measured=np.concatenate(meas),
        quantity=np.concatenate(qty), gain=np.concatenate(gain),
        direction=np.concatenate(dirs))
    if not np.all(np.isfinite(table.gain)):
        raise ValueError("non-finite controller gain")

    kappa = tz / 2.0
    hs = np.concatenate(host_site) if host_site else np.zeros(0, dtype=int)
    hn = np.concatenate(host_nb) if host_nb else np.zeros(0, dtype=int)
    ws = np.concatenate(wall_site) if wall_site else np.zeros(0, dtype=int)
    host = HostTable(hs, hn, np.full(len(hs), kappa), ws, np.full(len(ws), kappa))

    n = spec.nsites
    # host Laplacian: K[i,i] += k, K[j,j] += k, K[i,j] -= k, K[j,i] -= k
    rows = np.concatenate([hs, hn, hs, hn, ws])
    cols = np.concatenate([hs, hn, hn, hs, ws])
    vals = np.concatenate([host.stiffness, host.stiffness, -host.stiffness,
                           -host.stiffness, host.wall_stiffness])
    K_host = sps.coo_matrix((vals, (rows, cols)), shape=(n, n))
    isu = table.quantity == 0
    Gu = sps.coo_matrix((table.gain[isu], (table.actuated[isu], table.measured[isu])),
                        shape=(n, n))
    K = (K_host - Gu).tocsr()
    K.sum_duplicates()
    isv = ~isu
    G = sps.coo_matrix((table.gain[isv], (table.actuated[isv], table.measured[isv])),
                       shape=(n, n)).tocsr()
    G.sum_duplicates()
    return LatticeModel(spec, field, host, table, K, G)


def acceleration(model: LatticeModel, state: FieldState) -> np.ndarray:
    """Per-site acceleration: spring forces plus feedback forces."""
    if state.u.shape != (model.spec.nsites,):
        raise ValueError(
            f"state has {state.u.shape[0]} sites, model has {model.spec.nsites}")
    return -(model.K @ state.u) + model.G @ state.v


def bloch_matrices(spec: LatticeSpec, V, k) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form pencil ``(M0, M1)`` with ``Omega^2 e = (M0 + Omega M1) e``.

    Plane waves are ``e * exp(i (k.r - Omega t))``.
    """
    V = _pair(V, "V")
    kx, ky = _pair(k, "k")
    a = spec.a
    sx, cx = np.sin(kx * a), np.cos(kx * a)
    if spec.is_1d:
        M0 = -(spec.beta / 2) * SIGMA0 + spec.t_z * (1 - cx) * SIGMAZ
        M1 = V[0] * sx * SIGMA0 - spec.t_x * sx * SIGMAX
        return M0, M1
    sy, cy = np.sin(ky * a), np.cos(ky * a)
    M0 = (-(spec.beta / 2) * SIGMA0 + spec.t_z * (2 - cx - cy) * SIGMAZ
          + spec.t_y * sy * SIGMAY)
    M1 = (V[0] * sx + V[1] * sy) * SIGMA0 - spec.t_x * sx * SIGMAX
    return M0, M1


def _pair(x, name) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 1:
        arr = np.array([arr[0], 0.0])
    if arr.size != 2:
        raise ValueError(f"{name} must be a scalar or a uniform pair, got shape {np.shape(x)}")
    return arr


def stability_scan(spec: LatticeSpec, V=(0.0, 0.0), resolution: int = 64):
    """Worst imaginary eigenfrequency and smallest ``M0`` eigenvalue on a k-grid.

    Returns ``(max |Im Omega|, min eig M0)``.
    """
    from .spectra import BlochPencil, quadratic_eigensolve

    ks = -np.pi / spec.a + 2 * np.pi / spec.a * np.arange(resolution) / resolution
    grid = [(kx, 0.0) for kx in ks] if spec.is_1d else [(kx, ky) for kx in ks for ky in ks]
    worst_im, min_m0 = 0.0, np.inf
    for k in grid:
        M0, M1 = bloch_matrices(spec, V, k)
        min_m0 = min(min_m0, float(np.linalg.eigvalsh(M0)[0]))
        omegas, _ = quadratic_eigensolve(BlochPencil(M0, M1, k, tuple(_pair(V, 'V'))))
        worst_im = max(worst_im, float(np.max(np.abs(omegas.imag))))
    return worst_im, min_m0
