"""Matplotlib figures for CLI reports (file output only, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .field import ScalarField, total_t_integral  # noqa: E402
from .io import slice_2d  # noqa: E402


def _xt_slice(f: ScalarField):
    """(image, extent) of the x1-t plane through the middle of the other axes."""
    m = f.spatial_dim
    fixed = {ax: f.grid.counts[ax] // 2 for ax in range(1, m)}
    img = slice_2d(f, fixed)
    g = f.grid
    extent = (g.origin[m], g.upper(m), g.origin[0], g.upper(0))
    return img, extent


def _show(ax, f: ScalarField, title: str):
    img, extent = _xt_slice(f)
    lim = float(np.abs(img).max()) or 1.0
    im = ax.imshow(img, origin="lower", extent=extent, aspect="auto", cmap="RdBu_r",
                   vmin=-lim, vmax=lim)
    ax.set_xlabel("t")
    ax.set_ylabel("x1")
    ax.set_title(title)
    return im


def field_figure(f: ScalarField, path, title: str = "field") -> None:
    """x1-t slice of a field."""
    fig, ax = plt.subplots(figsize=(5, 4))
    fig.colorbar(_show(ax, f, title), ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def range_figure(g: ScalarField, filtered: ScalarField, report, path) -> None:
    """Data, filtered data and the per-x t-integral used by condition (2)."""
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    fig.colorbar(_show(axes[0], g, "data g"), ax=axes[0])
    fig.colorbar(_show(axes[1], filtered, "filtered (box power)"), ax=axes[1])
    integral = total_t_integral(filtered)
    integral = integral[(slice(None),) + tuple(n // 2 for n in integral.shape[1:])]
    x = g.grid.axis(0)
    axes[2].plot(x, integral, lw=1.2)
    axes[2].axhline(0.0, color="0.6", lw=0.8)
    axes[2].set_xlabel("x1")
    axes[2].set_title(f"t-integral, residual {report.cond2_residual:.2e}")
    verdict = "in range" if report.passed else "NOT in range"
    fig.suptitle(f"{report.parity} total dimension, k={report.k}: {verdict}")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
