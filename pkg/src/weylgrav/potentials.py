"""Spatial tilt profiles: funnel (2D lensing) and tanh interface (1D horizon)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import LatticeSpec

__all__ = ["PotentialField", "zero_field", "uniform_field", "funnel", "tanh_interface", "write_potential_csv"]


@dataclass(frozen=True)
class PotentialField:
    """Per-cell tilt components, arrays of shape ``(nx, ny)``.

    ``magnitude`` is the tilt strength |V_t| before projection; it differs
    from ``hypot(vx, vy)`` only at a funnel center where the direction is
    undefined.
    """

    vx: np.ndarray
    vy: np.ndarray
    generator: str = "zero"
    params: dict = field(default_factory=dict)
    magnitude: np.ndarray | None = None
    flags: tuple = ()

    @property
    def shape(self):
        return self.vx.shape

    def scaled(self, factor: float) -> "PotentialField":
        """Same profile with every component multiplied by ``factor``."""
        mag = None if self.magnitude is None else abs(factor) * self.magnitude
        params = dict(self.params, scale=self.params.get("scale", 1.0) * factor)
        return replace(self, vx=factor * self.vx, vy=factor * self.vy,
                       magnitude=mag, params=params)

    def uniform_value(self, tol: float = 0.0):
        """(Vx, Vy) if the field is uniform within ``tol``, else None."""
        vx0, vy0 = float(self.vx.flat[0]), float(self.vy.flat[0])
        if np.all(np.abs(self.vx - vx0) <= tol) and np.all(np.abs(self.vy - vy0) <= tol):
            return vx0, vy0
        return None


def zero_field(spec: LatticeSpec) -> PotentialField:
    z = np.zeros((spec.nx, spec.ny))
    return PotentialField(z, z.copy(), "zero", {}, z.copy())


def uniform_field(spec: LatticeSpec, V) -> PotentialField:
    Vx, Vy = (float(V), 0.0) if np.ndim(V) == 0 else (float(V[0]), float(V[1]))
    ones = np.ones((spec.nx, spec.ny))
    return PotentialField(Vx * ones, Vy * ones, "uniform", {"V": (Vx, Vy)},
                          np.hypot(Vx, Vy) * ones)


def funnel(spec: LatticeSpec, gamma: float, center=None, r_cap: float = 2.0,
           v_max: float | None = None) -> PotentialField:
    """Funnel tilt ``V_t(r) = min(gamma / r, v_max)`` pointing at ``center``.

    The horizon (``V_t = 1``) sits at ``r_s = gamma``.  ``v_max`` defaults to
    ``gamma / r_cap``.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if r_cap <= 0:
        raise ValueError("r_cap must be positive")
    x, y = spec.cell_coords()
    if center is None:
        center = ((spec.nx - 1) * spec.a / 2.0, (spec.ny - 1) * spec.a / 2.0)
    cx, cy = float(center[0]), float(center[1])
    flags = []
    if not (0 <= cx <= (spec.nx - 1) * spec.a and 0 <= cy <= (spec.ny - 1) * spec.a):
        flags.append("center_outside_grid")
    if gamma > 0.5 * min(spec.nx, spec.ny) * spec.a:
        raise ValueError(
            f"horizon radius {gamma} does not fit in a {spec.nx}x{spec.ny} grid")
    if v_max is None:
        v_max = gamma / r_cap

    dx, dy = cx - x, cy - y
    r = np.hypot(dx, dy)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = np.where(r >= r_cap, gamma / np.where(r > 0, r, 1.0), v_max)
        mag = np.minimum(mag, v_max) if gamma > 0 else np.zeros_like(r)
        ux = np.where(r > 0, dx / np.where(r > 0, r, 1.0), 0.0)
        uy = np.where(r > 0, dy / np.where(r > 0, r, 1.0), 0.0)
    shape = (spec.nx, spec.ny)
    return PotentialField(
        (mag * ux).reshape(shape), (mag * uy).reshape(shape), "funnel",
        {"gamma": float(gamma), "center": (cx, cy), "r_cap": float(r_cap),
         "v_max": float(v_max), "r_s": float(gamma)},
        mag.reshape(shape), tuple(flags))


def tanh_interface(spec: LatticeSpec, gamma_t: float, x_h: float,
                   depth: float = 2.0, orientation: float = -1.0) -> PotentialField:
    """Horizon profile ``Vx = orientation * depth/2 * (1 + tanh(gamma_t (x - x_h)))``.

    With the default ``depth`` the tilt magnitude runs from 0 on the flat side
    to 2 on the over-tilted side and equals 1 at ``x_h``.
    """
    if not spec.is_1d:
        raise ValueError("tanh_interface needs a chain1d lattice")
    if not gamma_t > 0:
        raise ValueError("gamma_t must be positive")
    if not 0 < x_h < spec.nx * spec.a:
        raise ValueError("horizon position must lie inside the chain")
    if orientation not in (1, -1, 1.0, -1.0):
        raise ValueError("orientation must be +1 or -1")
    x, _ = spec.cell_coords()
    mag = 0.5 * depth * (1.0 + np.tanh(gamma_t * (x - x_h)))
    shape = (spec.nx, 1)
    return PotentialField(
        (orientation * mag).reshape(shape), np.zeros(shape), "tanh",
        {"gamma_t": float(gamma_t), "x_h": float(x_h), "depth": float(depth),
         "orientation": float(orientation)},
        mag.reshape(shape))


def write_potential_csv(field_: PotentialField, path) -> None:
    nx, ny = field_.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "n", "Vx", "Vy"])
        for m in range(nx):
            for n in range(ny):
                w.writerow([m, n, f"{field_.vx[m, n]:.17g}", f"{field_.vy[m, n]:.17g}"])
