"""Static SVG figures for trajectories, return maps and training curves.

Every figure is rendered with the Agg backend and a fixed SVG hash salt, so
identical inputs give identical bytes.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .ode import Trajectory  # noqa: E402

__all__ = ["axis_index", "plot_overlay", "plot_projection", "plot_return_map",
           "plot_training_curve", "plot_matrix", "save_svg"]

_ALIASES = {"x": 0, "y": 1, "z": 2}
_STYLE = {
    "svg.hashsalt": "osnet",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.0,
}


def axis_index(name: str, dim: int) -> int:
    """Map ``"t"``, ``"x0".."x{n-1}"`` or ``"x"/"y"/"z"`` to a column.

    Returns -1 for time. Raises ValueError for names that do not exist.
    """
    if name == "t":
        return -1
    if name in _ALIASES and _ALIASES[name] < dim:
        return _ALIASES[name]
    if name.startswith("x") and name[1:].isdigit() and int(name[1:]) < dim:
        return int(name[1:])
    raise ValueError(f"unknown axis {name!r} for a {dim}-dimensional trajectory")


def _column(traj: Trajectory, idx: int) -> np.ndarray:
    return traj.times if idx < 0 else traj.states[:, idx]


def _require(trajs):
    for tr in trajs:
        if tr is None or len(tr) == 0:
            raise ValueError("cannot plot an empty trajectory")
    if len({tr.dim for tr in trajs}) > 1:
        raise ValueError("trajectories do not share a dimension")


def save_svg(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_overlay(path, trajs, labels, component: str = "y") -> None:
    """Component-vs-time curves for several trajectories on one axis."""
    _require(trajs)
    idx = axis_index(component, trajs[0].dim)
    if idx < 0:
        raise ValueError("overlay component must be a state axis")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 2.8))
        for tr, lab in zip(trajs, labels):
            ax.plot(tr.times, tr.states[:, idx], label=lab)
        ax.set_xlabel("t")
        ax.set_ylabel(component)
        ax.legend(frameon=False)
        fig.tight_layout()
        save_svg(fig, path)


def plot_projection(path, traj: Trajectory, axes=("x", "z"), label: str | None = None) -> None:
    """2-D projection of an orbit as a single path."""
    _require([traj])
    i, j = (axis_index(a, traj.dim) for a in axes)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 4.0))
        ax.plot(_column(traj, i), _column(traj, j), lw=0.5, color="k")
        ax.set_xlabel(axes[0])
        ax.set_ylabel(axes[1])
        if label:
            ax.set_title(label)
        fig.tight_layout()
        save_svg(fig, path)


def plot_return_map(path, values) -> None:
    """Successive section values s_k against s_{k+1}."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("a return map needs at least two crossings")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 4.0))
        ax.plot(v[:-1], v[1:], ".", ms=2, color="k")
        lo, hi = float(v.min()), float(v.max())
        ax.plot([lo, hi], [lo, hi], lw=0.5, color="0.6")
        ax.set_xlabel("$s_k$")
        ax.set_ylabel("$s_{k+1}$")
        fig.tight_layout()
        save_svg(fig, path)


def plot_training_curve(path, epochs) -> None:
    """Data loss and regularizer per epoch on a log scale."""
    if not epochs:
        raise ValueError("no epochs to plot")
    e = [r["epoch"] for r in epochs]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        ax.semilogy(e, [r["data_loss"] for r in epochs], "o-", ms=3, label="data loss")
        ax.semilogy(e, [r["reg_value"] for r in epochs], "s--", ms=3, label="$\\|J_a\\|_2^2$")
        ax.set_xlabel("epoch")
        ax.legend(frameon=False)
        fig.tight_layout()
        save_svg(fig, path)


def plot_matrix(path, mat, title: str = "") -> None:
    """Heatmap with a symmetric color scale (used for Omega)."""
    m = np.asarray(mat, dtype=float)
    lim = float(np.abs(m).max()) or 1.0
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.4))
        im = ax.imshow(m, cmap="RdBu_r", vmin=-lim, vmax=lim, interpolation="nearest")
        fig.colorbar(im, ax=ax)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        save_svg(fig, path)
