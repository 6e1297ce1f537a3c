"""PNG figures for a convergence study (matplotlib, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _reference_line(ax, x, y, slope, label):
    x = np.asarray(x, float)
    x0, y0 = x[0], y[0]
    ax.loglog(x, 0.8 * y0 * (x / x0) ** slope, "k--", lw=0.8, label=label)


def plot_convergence(history, path, title: str = "") -> Path:
    """eta_tot (and the DG error when known) against the number of DoFs."""
    plt = _pyplot()
    dofs = history.column("dofs")
    eta = history.column("eta_tot")
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(dofs, eta, "o-", ms=3, label=r"$\eta_{tot}$")
    err = history.column("dg_error")
    if np.all(np.isfinite(err)):
        ax.loglog(dofs, err, "s-", ms=3, label="DG error")
    _reference_line(ax, dofs, eta, -0.5, r"DoFs$^{-1/2}$")
    ax.set_xlabel("DoFs")
    ax.set_ylabel("error / estimate")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_estimators(history, path, title: str = "") -> Path:
    """The individual estimators eta1..eta6 against the number of DoFs."""
    plt = _pyplot()
    dofs = history.column("dofs")
    fig, ax = plt.subplots(figsize=(5, 4))
    for i in range(1, 7):
        v = history.column(f"eta{i}")
        if np.any(v > 0):
            ax.loglog(dofs, np.where(v > 0, v, np.nan), ".-", label=rf"$\eta_{i}$")
    ax.set_xlabel("DoFs")
    ax.set_ylabel("estimator")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_mesh(mesh, path, indicators=None, title: str = "") -> Path:
    """Triangulation with crease edges highlighted, optionally coloured by indicator."""
    plt = _pyplot()
    from .mesh import EdgeTag

    fig, ax = plt.subplots(figsize=(5, 5))
    x, y = mesh.vertices.T
    if indicators is not None:
        tpc = ax.tripcolor(x, y, mesh.triangles, facecolors=np.log10(np.maximum(indicators, 1e-16)),
                           cmap="viridis")
        fig.colorbar(tpc, ax=ax, shrink=0.8, label=r"$\log_{10}$ indicator")
    ax.triplot(x, y, mesh.triangles, color="k", lw=0.2)
    for e in mesh.edges_with(EdgeTag.CREASE):
        a, b = mesh.edges[e]
        ax.plot(*mesh.vertices[[a, b]].T, color="r", lw=1.2)
    ax.set_aspect("equal")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
