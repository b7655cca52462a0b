"""Report figures written to files with the non-interactive Agg backend."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_bands", "plot_rates", "plot_tunneling", "plot_lensing", "plot_deflection"]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bands(curves: dict, path) -> None:
    """``curves`` maps a label to ``(k, omegas)`` with ``omegas`` of shape (n, 4)."""
    fig, axes = plt.subplots(1, len(curves), figsize=(3.2 * len(curves), 3.4), squeeze=False)
    for ax, (label, (k, w)) in zip(axes[0], curves.items()):
        ax.plot(k, np.real(w)[:, 2:], color="k", lw=1.2)
        ax.set_title(label, fontsize=9)
        ax.set_xlabel("$k_x a$")
    axes[0, 0].set_ylabel(r"$\Omega$")
    _save(fig, path)


def plot_rates(result, path) -> None:
    om = np.array([r.omega for r in result.records])
    fine = np.linspace(0, om.max() * 1.1, 200)
    from .hawking import rates

    gH, gs = rates(fine, result.config.gamma_t)
    fig, ax = plt.subplots(figsize=(4.2, 3.4))
    ax.semilogy(fine, gH, "k-", lw=1, label=r"$\Gamma_H$")
    ax.semilogy(fine, gs, "k--", lw=1, label=r"$\Gamma_s$")
    ax.semilogy(om, [r.chi_c for r in result.records], "o", mfc="none", label=r"$\chi_c$")
    ax.semilogy(om, [r.chi_q for r in result.records], "s", mfc="none", label=r"$\chi_q$")
    ax.set_xlabel(r"$\omega$")
    ax.set_ylabel("rate")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_tunneling(channels, config, path) -> None:
    """Cell density at each snapshot time, one row per channel."""
    channels = [c for c in channels if c is not None]
    fig, axes = plt.subplots(len(channels), 1, figsize=(6, 2.4 * len(channels)), squeeze=False)
    x = np.arange(config.n_cells) * config.a
    for ax, ch in zip(axes[:, 0], channels):
        for t, d in sorted(ch.snapshots.items()):
            ax.plot(x, d, lw=0.8, label=f"t={t:g}")
        ax.axvspan(config.n_left * config.a, (config.n_left + config.n_interface) * config.a,
                   color="0.9", zorder=0)
        ax.axvline(config.x_h, color="0.5", lw=0.6, ls=":")
        ax.set_yscale("symlog", linthresh=1e-6)
        ax.set_title(f"{ch.kind}, omega={ch.omega_target:g}", fontsize=9)
        ax.legend(fontsize=7, loc="upper left")
    axes[-1, 0].set_xlabel("x / a")
    _save(fig, path)


def plot_lensing(track, config, path) -> None:
    """Density maps at the snapshot times with the horizon and centroid track."""
    snaps = sorted(track.snapshots.items())
    fig, axes = plt.subplots(1, len(snaps) + 1, figsize=(3.2 * (len(snaps) + 1), 3.2),
                             squeeze=False)
    cx, cy = config.hole
    for ax, (t, d) in zip(axes[0], snaps):
        img = np.sqrt(d.reshape(config.nx, config.ny)).T
        ax.imshow(img, origin="lower", cmap="magma", extent=(0, config.nx, 0, config.ny))
        ax.set_title(f"t={t:g}", fontsize=9)
    for ax in axes[0]:
        if config.gamma > 0:
            ax.add_patch(plt.Circle((cx, cy), config.gamma, fill=False, color="w", lw=0.8))
        ax.set_xlim(0, config.nx)
        ax.set_ylim(0, config.ny)
        ax.set_aspect("equal")
    ax = axes[0, -1]
    ax.plot(track.x, track.y, "k-", lw=1)
    if config.gamma > 0:
        ax.add_patch(plt.Circle((cx, cy), config.gamma, fill=False, color="k", lw=0.8))
    ax.set_title("centroid", fontsize=9)
    _save(fig, path)


def plot_deflection(rows, path) -> None:
    """``rows`` of (label, x track, y track, hole center, gamma)."""
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    for label, x, y, center, gamma in rows:
        line, = ax.plot(np.asarray(x) - center[0], np.asarray(y) - center[1], lw=1, label=label)
        if gamma > 0:
            ax.add_patch(plt.Circle((0, 0), gamma, fill=False, color=line.get_color(),
                                    lw=0.6, ls=":"))
    ax.plot(0, 0, "k+")
    ax.set_aspect("equal")
    ax.set_xlabel("x - x_c")
    ax.set_ylabel("y - y_c")
    ax.legend(fontsize=7)
    _save(fig, path)
