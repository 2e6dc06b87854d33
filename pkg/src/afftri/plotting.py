"""Static SVG figures for optimization and refinement runs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp, so reruns give identical files
_RC = {
    "svg.hashsalt": "afftri",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_SVG_META, bbox_inches="tight")
    plt.close(fig)


def _draw_mesh(ax, mesh, **kw):
    if mesh.dim == 1:
        x = mesh.vertices[:, 0]
        for a, b in mesh.cells:
            ax.plot([x[a], x[b]], [0, 0], color=kw.get("color", "k"), lw=1)
        ax.plot(x[mesh.free_mask], np.zeros(mesh.free_mask.sum()), "o", ms=4, color="C1")
        ax.plot(x[~mesh.free_mask], np.zeros((~mesh.free_mask).sum()), "s", ms=4, color="k")
        ax.set_yticks([])
    else:
        ax.triplot(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.cells, color=kw.get("color", "k"), lw=0.7)
        ax.plot(*mesh.vertices[mesh.free_mask].T, "o", ms=3, color="C1")
        ax.set_aspect("equal")


def plot_mesh(before, after, path, title=None):
    """Wireframes of the initial and final meshes side by side."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(8, 4 if before.dim == 2 else 1.6))
        for ax, mesh, label in zip(axes, (before, after), ("initial", "optimized")):
            _draw_mesh(ax, mesh)
            ax.set_title(label)
        if title:
            fig.suptitle(title)
        _save(fig, path)


def plot_convergence(trace, path, title=None):
    """Energy and gradient norm against iteration, log scale."""
    it = [r.iter for r in trace]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        phis = np.array([r.phi for r in trace])
        gs = np.array([r.grad_inf for r in trace])
        # zero values cannot sit on a log axis
        ax.semilogy(it, np.where(phis > 0, phis, np.nan), "-o", ms=2, label="phi")
        ax.semilogy(it, np.where(gs > 0, gs, np.nan), "--", label="max |grad|")
        ax.set_xlabel("iteration")
        ax.legend()
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_rates(rows, path, title=None):
    """Log-log errors against mesh size."""
    h = np.array([r.h for r in rows])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for attr, label in (("err_l2", "L2"), ("err_h1", "H1 seminorm")):
            e = np.array([getattr(r, attr) for r in rows])
            if np.all(e > 0):
                ax.loglog(h, e, "-o", ms=3, label=label)
        ax.set_xlabel("h")
        ax.set_ylabel("interpolation error")
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
        if title:
            ax.set_title(title)
        _save(fig, path)
