"""Figure rendering for solver reports.

Every function writes a figure to a path and closes it; nothing is shown
interactively (the Agg backend is forced so headless runs work).
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .grids import make_uniform_grid
from .models import eval_curve


def save_gmix_figure(path, model, result=None, n_points=401):
    """Mixing-energy curve with the equilibrium tie line, if split."""
    grid = make_uniform_grid(n_points)
    x = grid.points
    g = eval_curve(model, grid).values
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, g, lw=1.5, label=r"$\Delta g_\mathrm{mix}$")
    if result is not None:
        ax.axvline(result.z, color="0.6", ls=":", lw=1, label="feed")
        if result.is_split:
            xs = np.array([result.x_hard_lo, result.x_hard_hi])
            gs = np.array([model.gmix(xs[0]), model.gmix(xs[1])])
            ax.plot(xs, gs, "o-", color="crimson", lw=1.2, ms=5,
                    label="equilibrium")
    ax.set_xlabel(r"$x_1$")
    ax.set_ylabel(r"$\Delta g_\mathrm{mix}\,/\,RT$")
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_distribution_figure(path, x, series, z=None, logscale=True):
    """State-probability series over composition; ``series`` maps labels to
    probability arrays on the same x."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, p in series.items():
        ax.plot(x, p, lw=1.2, label=label)
    if z is not None:
        ax.axvline(z, color="0.6", ls=":", lw=1, label="feed")
    if logscale:
        ax.set_yscale("log")
        ax.set_ylim(bottom=1e-16)
    ax.set_xlabel(r"$x_1$")
    ax.set_ylabel("probability")
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_fit_figure(path, report):
    """Loss trace of a fit run (log scale)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    trace = np.asarray(report.loss_trace, dtype=float)
    ax.semilogy(np.arange(1, trace.size + 1), np.maximum(trace, 1e-16), lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("total loss")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _ternary_xy(points):
    # equilateral-triangle projection of (x1, x2, x3)
    x = points[:, 1] + 0.5 * points[:, 2]
    y = (np.sqrt(3.0) / 2.0) * points[:, 2]
    return x, y


def save_ternary_figure(path, grid, probs, phases=None, z=None):
    """Simplex state distribution as a colored scatter with phase markers."""
    fig, ax = plt.subplots(figsize=(5.5, 5))
    px, py = _ternary_xy(grid.points)
    p = np.asarray(probs, dtype=float)
    logp = np.log10(np.clip(p, 1e-300, None))
    sc = ax.scatter(px, py, c=np.maximum(logp, -16), s=6, cmap="viridis",
                    vmin=-16)
    fig.colorbar(sc, ax=ax, label=r"$\log_{10} p$", shrink=0.8)
    tri = np.array([[0, 0], [1, 0], [0.5, np.sqrt(3) / 2], [0, 0]])
    ax.plot(tri[:, 0], tri[:, 1], color="0.3", lw=1)
    if phases:
        comp = np.array([c for c, _ in phases])
        cx, cy = _ternary_xy(comp)
        ax.plot(cx, cy, "o", color="white", mec="black", ms=8, label="phases")
    if z is not None:
        zz = np.atleast_2d(np.asarray(z, dtype=float))
        zx, zy = _ternary_xy(zz)
        ax.plot(zx, zy, "s", color="crimson", ms=7, label="feed")
    ax.set_aspect("equal")
    ax.axis("off")
    ax.legend(frameon=False, fontsize=9, loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_helmholtz_figure(path, model, result, v_range=(0.4, 60.0),
                          n_points=400):
    """Reduced Helmholtz curve with the double tangent found by the solver."""
    v = np.geomspace(v_range[0], v_range[1], n_points)
    a = model.helmholtz(v)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(v, a, lw=1.5, label=r"$a(v)$")
    if result.is_split:
        vv = np.array([result.v_liquid, result.v_vapor])
        aa = model.helmholtz(vv)
        ax.plot(vv, aa, "o-", color="crimson", lw=1.2, ms=5,
                label="double tangent")
    ax.set_xscale("log")
    ax.set_xlabel(r"$v / v_c$")
    ax.set_ylabel(r"$a / (R T_c)$")
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
