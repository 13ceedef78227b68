"""SVG figures for sweep results: curves against intensity and P-R diagrams.

One curve per landscape, coloured from blue (fragmented, low aggregation
index) to red (aggregated).  Relative losses across the ensemble are drawn as
a dotted black line on a secondary axis.  Output is byte-stable for a given
result: the SVG hash salt is pinned and no date is embedded.
"""
from __future__ import annotations

import os
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import Normalize  # noqa: E402

from .sweep import SweepResult, pr_diagram  # noqa: E402

CMAP = "coolwarm"

LABELS = {
    "P": "total population P(t)",
    "R": "annual yield R(t)",
    "flux": "reserve boundary flux (ind./year)",
}

_RC = {
    "svg.hashsalt": "fragrd",
    "svg.fonttype": "path",
    "font.size": 10,
    "axes.spines.top": False,
}


def _intensity_label(result: SweepResult) -> str:
    kind = result.metadata.get("config", {}).get("kind")
    if kind == "constant":
        return "quota δ (ind./km²/year)"
    if kind == "proportional":
        return "effort E (1/year)"
    return "harvesting intensity"


def _colour_scale(s_values):
    lo, hi = min(s_values), max(s_values)
    norm = Normalize(vmin=lo, vmax=hi if hi > lo else lo + 1)
    return norm, plt.get_cmap(CMAP)


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def intensity_figure(result: SweepResult, quantity: str, path: str, t: float = 5.0,
                     show_loss: bool = True) -> str:
    """``quantity`` against intensity, one line per landscape."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.5, 4.5))
        values = result.grid(quantity, t)
        x = np.asarray(result.intensities)
        norm, cmap = _colour_scale(result.s_values)
        for k, s in enumerate(result.s_values):
            ax.plot(x, values[k], color=cmap(norm(s)), lw=1.2)
        ax.set_xlabel(_intensity_label(result))
        ax.set_ylabel(f"{LABELS.get(quantity, quantity)} at t={t:g}")
        if show_loss and quantity in ("P", "R"):
            loss = result.losses(quantity, t)
            twin = ax.twinx()
            twin.plot(x, loss, "k:", lw=1.2)
            twin.set_ylim(0, 100)
            twin.set_ylabel("relative loss (%)")
        sm = plt.cm.ScalarMappable(norm=norm, cmap=cmap)
        fig.colorbar(sm, ax=ax, pad=0.12 if show_loss else 0.02, label="aggregation index s")
        fig.tight_layout()
        return _save(fig, path)


def pr_figure(result: SweepResult, path: str, t: float = 5.0) -> str:
    """Population against yield for each landscape, traced along the intensity grid."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.5, 4.5))
        norm, cmap = _colour_scale(result.s_values)
        for curve in pr_diagram(result, t):
            ax.plot(curve.R, curve.P, color=cmap(norm(curve.s)), lw=1.2)
        ax.set_xlabel(f"annual yield R({t:g})")
        ax.set_ylabel(f"total population P({t:g})")
        fig.colorbar(plt.cm.ScalarMappable(norm=norm, cmap=cmap), ax=ax,
                     label="aggregation index s")
        fig.tight_layout()
        return _save(fig, path)


def correlation_figure(result: SweepResult, path: str, quantity: str = "P") -> str:
    """Rank correlation between s and ``quantity`` against intensity, one line per time."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.5, 4.0))
        x = np.asarray(result.intensities)
        greys = plt.get_cmap("viridis")
        for i, t in enumerate(result.times):
            if quantity == "R" and t < 1:
                continue
            ax.plot(x, result.correlations(quantity, t), marker=".",
                    color=greys(i / max(len(result.times) - 1, 1)), label=f"t = {t:g}")
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_ylim(-1.05, 1.05)
        ax.set_xlabel(_intensity_label(result))
        ax.set_ylabel(f"Spearman correlation (s, {quantity})")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def landscape_figure(landscape, path: str) -> str:
    """Protected cells in black, harvested in white."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(3.5, 3.5))
        ax.imshow(landscape.cells, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
        ax.set_title(f"s = {landscape.s}")
        ax.set_xticks([])
        ax.set_yticks([])
        return _save(fig, path)


def render_sweep(result: SweepResult, out_dir: str, prefix: str = "sweep",
                 t: Optional[float] = None) -> List[str]:
    """Write the standard set of figures for ``result`` and return their paths."""
    os.makedirs(out_dir, exist_ok=True)
    if t is None:
        t = 5.0 if 5.0 in result.times else result.times[-1]
    paths = [intensity_figure(result, "P", os.path.join(out_dir, f"{prefix}_P.svg"), t)]
    if t >= 1:
        paths.append(intensity_figure(result, "R", os.path.join(out_dir, f"{prefix}_R.svg"), t))
        paths.append(pr_figure(result, os.path.join(out_dir, f"{prefix}_PR.svg"), t))
    if len(result.times) > 1:
        paths.append(correlation_figure(result, os.path.join(out_dir, f"{prefix}_corr.svg")))
    return paths
