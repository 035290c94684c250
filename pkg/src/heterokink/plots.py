"""Figure rendering for the reporting paths (file output only).

The data pipeline never depends on this module; commands call in here
only when asked to render figures next to their delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_distance_profile",
    "save_branch_plane",
    "save_profile",
    "save_width_fit",
]

_DPI = 150


def save_distance_profile(path, profile, title: str = "") -> Path:
    """Semilog plot of the distance function d(A)."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    d = np.maximum(profile.d_values, 1e-300)
    ax.semilogy(profile.A_values, d, lw=0.8)
    ax.set_xlabel("A")
    ax.set_ylabel("d(A)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_branch_plane(path, table, title: str = "") -> Path:
    """Branch locations in the (A, delta) plane, one marker set per k."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    ks = sorted({r.k for r in table})
    for k in ks:
        pts = [(r.A, r.delta) for r in table if r.k == k]
        A, d = zip(*pts)
        ax.plot(A, d, "o-", ms=3, lw=0.8, label=f"het_{k}")
    ax.set_xlabel("A")
    ax.set_ylabel("delta")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_profile(path, x, states, title: str = "") -> Path:
    """Profile plot: c = U1 against x (and U2 faintly for shape context)."""
    path = Path(path)
    x = np.asarray(x)
    states = np.asarray(states)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(x, states[:, 0], lw=1.2, label="U1")
    if states.shape[1] > 1:
        ax.plot(x, states[:, 1], lw=0.7, alpha=0.5, label="U2")
    ax.axhline(0.0, color="k", lw=0.5, alpha=0.4)
    ax.set_xlabel("x")
    ax.set_ylabel("U")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_width_fit(path, table, fit=None, predictor=None, title: str = "") -> Path:
    """First-gap widths against delta (log x), with fit/prediction overlays."""
    path = Path(path)
    rows = [r for r in table if r.root_distances]
    fig, ax = plt.subplots(figsize=(7, 4))
    if rows:
        d = np.array([r.delta for r in rows])
        K = np.array([r.first_gap for r in rows])
        ax.semilogx(d, K, "o", ms=4, label="measured")
        dd = np.geomspace(d.min(), d.max(), 200)
        if fit is not None and fit.model == "LogWidth":
            eta1, eta2 = fit.parameters
            ax.semilogx(dd, eta1 * np.log(eta2 * dd), "-", lw=1.0, label="fit")
        if predictor is not None:
            ax.semilogx(dd, [predictor(v) for v in dd], "--", lw=1.0, label="asymptotic")
    ax.set_xlabel("delta")
    ax.set_ylabel("first gap")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
