"""PNG figures written next to the CSV artifacts (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps in the files so repeated runs give identical bytes
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_META)
    plt.close(fig)
    return path


def norms_figure(times, norms, path, p: float, label: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(times, np.maximum(norms, 1e-300), lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel(f"L^{p:g} norm")
    if label:
        ax.set_title(label)
    return _save(fig, Path(path))


def profile_figure(x, fields, path, title: str = "") -> Path:
    """Overlay of 1D fields (2D grids are drawn as an image of the first)."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    fields = np.atleast_2d(fields)
    if not isinstance(x, tuple):
        for v in fields[:50]:
            ax.plot(x, v, lw=0.8)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        im = ax.imshow(fields[0].reshape(x).T, origin="lower", aspect="auto")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        fig.colorbar(im, ax=ax)
    if title:
        ax.set_title(title)
    return _save(fig, Path(path))


def envelope_figure(rows: np.ndarray, path, delta: float) -> Path:
    """``rows`` columns: member, t, norm, radius, envelope, outside."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    members = np.unique(rows[:, 0]).astype(int)
    for k in members[:: max(1, len(members) // 10)]:
        sel = rows[:, 0] == k
        line, = ax.semilogy(rows[sel, 1], rows[sel, 2], lw=1.0)
        ax.semilogy(rows[sel, 1], rows[sel, 4], lw=0.6, ls="--", color=line.get_color())
    ax.semilogy(rows[rows[:, 0] == members[0], 1], rows[rows[:, 0] == members[0], 3],
                color="k", lw=1.0, label="R_delta")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.set_title(f"decay envelope, delta={delta:g}")
    ax.legend(loc="upper right")
    return _save(fig, Path(path))


def continuity_figure(curves: dict, path) -> Path:
    """``curves``: level -> (times, gap, majorant)."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for level, (t, g, m) in curves.items():
        line, = ax.semilogy(t, np.maximum(g, 1e-300), label=f"gap, eta={level:g}")
        ax.semilogy(t, m, ls="--", color=line.get_color(), lw=0.8)
    ax.set_xlabel("t")
    ax.legend()
    return _save(fig, Path(path))


def curve_figure(xs, ys, path, xlabel: str, ylabel: str, loglog: bool = True) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if loglog and np.all(np.asarray(xs) > 0) and np.all(np.asarray(ys) > 0):
        ax.loglog(xs, ys, "o-")
    else:
        ax.plot(xs, ys, "o-")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, Path(path))
