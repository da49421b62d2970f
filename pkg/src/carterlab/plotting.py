"""PNG figures written next to CLI outputs (``--plot``); needs matplotlib."""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"font.size": 9, "axes.grid": True, "grid.alpha": 0.3})
    return plt


def plot_series(path: str, x, series: dict, xlabel: str) -> None:
    """One panel per named series, sharing the x axis."""
    plt = _pyplot()
    n = len(series)
    fig, axes = plt.subplots(n, 1, figsize=(6, 1.8 * n), sharex=True, squeeze=False)
    for ax, (name, y) in zip(axes[:, 0], series.items()):
        ax.plot(x, np.real(np.asarray(y)), lw=1.0)
        ax.set_ylabel(name)
    axes[-1, 0].set_xlabel(xlabel)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_spectrum(path: str, eigenvalues) -> None:
    plt = _pyplot()
    lam = np.asarray(eigenvalues, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(np.arange(len(lam)), lam, "o", ms=4)
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_scan(path: str, rows) -> None:
    """Angular eigenvalue branches lambda_j(Omega) from (Omega, m, j, lambda) rows."""
    plt = _pyplot()
    arr = np.array([(r[0], r[2], r[3]) for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for j in np.unique(arr[:, 1]):
        sel = arr[:, 1] == j
        ax.plot(arr[sel, 0], arr[sel, 2], ".-", lw=1.0, label=f"j={int(j)}")
    ax.set_xlabel("Omega")
    ax.set_ylabel("lambda")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
