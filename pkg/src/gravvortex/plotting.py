"""PNG figures for profiles, continuation runs and estimate margins.

Uses the non-interactive Agg canvas so it works headless.
"""

import math

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
import matplotlib

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linestyle": "--",
    "savefig.dpi": 150,
}


def _figure(nrows, ncols, size):
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=size, layout="constrained")
        FigureCanvasAgg(fig)
        axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def _save(fig, path):
    with matplotlib.rc_context(STYLE):
        fig.savefig(path)
    return path


def plot_profile(cols, path, title=None):
    """Four panels of ``Phi``, ``S_g``, ``b``, ``S_k`` against colatitude.

    ``cols`` is a dict of arrays as returned by
    :func:`gravvortex.profile.read_csv`; grid tables are drawn as scatter.
    """
    fig, ax = _figure(2, 2, (7.0, 4.6))
    grid_table = np.any(cols["weight"] > 0)
    th = np.degrees(cols["theta"])
    for a, key, lab in zip(
        ax.flat, ("Phi", "S_g", "b", "S_k"), (r"$\Phi$", r"$S_g$", r"$b = |\nabla\Phi|^2_g/\Phi$", r"$S_k$")
    ):
        if grid_table:
            a.plot(th, cols[key], ".", ms=1.5, alpha=0.5)
        else:
            a.plot(th, cols[key])
        a.set_ylabel(lab)
        a.set_xlim(0, 180)
    for a in ax[1]:
        a.set_xlabel(r"colatitude $\theta$ [deg]")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_continuation(report, path, title=None):
    """Residuals, smallest singular value and curvature margin along the path."""
    steps = report.steps if hasattr(report, "steps") else report["steps"]
    a = np.array([s["alpha"] for s in steps])
    fig, ax = _figure(1, 3, (9.0, 2.8))
    r1 = np.array([s["residual_R1"] for s in steps])
    r2 = np.array([s["residual_R2"] for s in steps])
    ax[0, 0].semilogy(a, np.maximum(r1, 1e-17), "o-", ms=3, label=r"$R_1$")
    ax[0, 0].semilogy(a, np.maximum(r2, 1e-17), "s-", ms=3, label=r"$R_2$")
    ax[0, 0].set_ylabel("sup residual")
    ax[0, 0].legend()
    sig = np.array([np.nan if s.get("sigma_min") is None else s["sigma_min"] for s in steps])
    ax[0, 1].semilogy(a, sig, "o-", ms=3)
    ax[0, 1].set_ylabel(r"$\sigma_{\min}$ (compressed)")
    marg = [s.get("estimates", {}).get("S_g_min", {}).get("margin", math.nan) for s in steps]
    ax[0, 2].plot(a, marg, "o-", ms=3)
    ax[0, 2].set_ylabel(r"$\min S_g - c$")
    rej = report.rejected if hasattr(report, "rejected") else report.get("rejected", [])
    for r in rej:
        ax[0, 1].axvline(r["alpha"], color="C3", lw=0.6, alpha=0.6)
    for x in ax[0]:
        x.set_xlabel(r"$\alpha$")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_margins(report, path, title=None):
    """Horizontal bars of signed estimate margins (positive is inside the bound)."""
    recs = [r for r in report.records if math.isfinite(r.bound)]
    fig, ax = _figure(1, 1, (6.0, 0.25 * len(recs) + 1.0))
    a = ax[0, 0]
    m = np.array([r.margin for r in recs])
    y = np.arange(len(recs))
    a.barh(y, np.sign(m) * np.log10(1.0 + np.abs(m)), color=["C2" if r.passed else "C3" for r in recs])
    a.set_yticks(y, [r.name for r in recs])
    a.set_xlabel(r"sign(margin) $\log_{10}(1 + |\mathrm{margin}|)$")
    a.axvline(0.0, color="k", lw=0.6)
    if title:
        a.set_title(title)
    return _save(fig, path)
