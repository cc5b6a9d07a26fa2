"""Flow diagrams and convergence plots.

Crossings are detected from sign changes of the linearly interpolated
curves against a reference level just below zero.  The reference avoids
the levels that sit exactly at zero at the endpoints (they have not
crossed anything yet).  Discrepancies between annotated sums and the
flow file are reported, never patched.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.collections import LineCollection

from .io import SpectrumTable

#: endpoint eigenvalues below this are treated as "at zero"
ZERO_TOL = 1e-8

#: a crossing belongs to a valley when its interpolated weight dominates
VALLEY_WEIGHT_MIN = 0.5

COLOR_L = "#1f6fb4"
COLOR_LPRIME = "#c23b22"
COLOR_NEUTRAL = "#9a9a9a"


@dataclass(frozen=True)
class Crossing:
    t: float
    sign: int          # +1 rising through the reference, -1 falling
    valley: str        # "L", "Lprime", or "neutral"


def reference_level(table: SpectrumTable, delta: float) -> float:
    """Level the crossings are counted against: minus half the smallest
    nonzero in-window endpoint eigenvalue, or -delta/2 when the only
    in-window endpoint levels are the zeros themselves."""
    ends = np.concatenate([table.eigenvalues[0], table.eigenvalues[-1]])
    in_window = np.abs(ends) < delta
    nonzero = np.abs(ends[in_window & (np.abs(ends) > ZERO_TOL)])
    if nonzero.size:
        return -float(np.min(nonzero)) / 2.0
    return -delta / 2.0


def detect_crossings(table: SpectrumTable, gamma: float) -> list[Crossing]:
    out = []
    t = table.t
    for j in range(table.n_curves):
        lam = table.eigenvalues[:, j] - gamma
        # indices where the curve is strictly off the reference; samples
        # exactly on it are bridged so a touch-and-pass still counts once
        nz = [i for i in range(len(t)) if lam[i] != 0.0]
        for i, k in zip(nz, nz[1:]):
            a, b = lam[i], lam[k]
            if a * b >= 0.0:
                continue
            frac = a / (a - b)
            tc = t[i] + frac * (t[k] - t[i])
            wl = (1 - frac) * table.weight_l[i, j] + frac * table.weight_l[k, j]
            wlp = (1 - frac) * table.weight_lprime[i, j] \
                + frac * table.weight_lprime[k, j]
            if wl >= VALLEY_WEIGHT_MIN:
                valley = "L"
            elif wlp >= VALLEY_WEIGHT_MIN:
                valley = "Lprime"
            else:
                valley = "neutral"
            out.append(Crossing(t=float(tc), sign=1 if b > a else -1,
                                valley=valley))
    out.sort(key=lambda c: c.t)
    return out


def _segment_colors(table: SpectrumTable, j: int) -> list[str]:
    colors = []
    for i in range(len(table.t) - 1):
        wl = 0.5 * (table.weight_l[i, j] + table.weight_l[i + 1, j])
        wlp = 0.5 * (table.weight_lprime[i, j] + table.weight_lprime[i + 1, j])
        if wl >= VALLEY_WEIGHT_MIN:
            colors.append(COLOR_L)
        elif wlp >= VALLEY_WEIGHT_MIN:
            colors.append(COLOR_LPRIME)
        else:
            colors.append(COLOR_NEUTRAL)
    return colors


def _write_both(fig, out: str | Path) -> list[Path]:
    fig.tight_layout()
    out = Path(out)
    paths = [out, out.with_suffix(".svg")]
    for p in paths:
        fig.savefig(p, dpi=150)
    plt.close(fig)
    return paths


def plot_flow_diagram(table: SpectrumTable, flow: dict,
                      out: str | Path) -> dict:
    """Render the in-window eigenvalue curves and annotate crossings.

    Returns a summary with per-valley annotated sums and whether they
    match the flow file (sf_L, sf_Lprime, and the total against
    sf_L + sf_Lprime + sf_perp).
    """
    delta = float(flow["delta"])
    gamma = reference_level(table, delta)
    crossings = detect_crossings(table, gamma)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for j in range(table.n_curves):
        lam = table.eigenvalues[:, j]
        if np.all(lam > delta) or np.all(lam < -delta):
            continue
        pts = np.column_stack([table.t, lam])
        segs = np.stack([pts[:-1], pts[1:]], axis=1)
        ax.add_collection(LineCollection(segs, colors=_segment_colors(table, j),
                                         linewidths=1.2))
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.axhline(gamma, color="black", linewidth=0.8, linestyle="--")
    for c in crossings:
        ax.annotate(f"{c.sign:+d}", (c.t, gamma), textcoords="offset points",
                    xytext=(0, 8 if c.sign > 0 else -16), ha="center",
                    fontsize=11, color={"L": COLOR_L, "Lprime": COLOR_LPRIME,
                                        "neutral": "black"}[c.valley])
        ax.plot([c.t], [gamma], marker="o", markersize=4, color="black")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(-delta, delta)
    ax.set_xlabel("t")
    ax.set_ylabel("eigenvalue")
    ax.set_title("eigenvalue flow (window +-{:.3g})".format(delta))
    _write_both(fig, out)

    sum_l = sum(c.sign for c in crossings if c.valley == "L")
    sum_lp = sum(c.sign for c in crossings if c.valley == "Lprime")
    sum_total = sum(c.sign for c in crossings)
    expected_total = int(flow["sf_L"]) + int(flow["sf_Lprime"]) \
        + int(flow["sf_perp"])
    summary = {
        "n_crossings": len(crossings),
        "reference_level": gamma,
        "sum_L": sum_l,
        "sum_Lprime": sum_lp,
        "sum_total": sum_total,
        "matches": (sum_l == int(flow["sf_L"])
                    and sum_lp == int(flow["sf_Lprime"])
                    and sum_total == expected_total),
        "crossings": [(c.t, c.sign, c.valley) for c in crossings],
    }
    return summary


def plot_convergence(rows: list[dict], out: str | Path) -> float:
    """Log-log norm vs a with a slope-1 reference line through the first
    point; returns the fitted slope."""
    a = np.array([r["a"] for r in rows])
    norm = np.array([r["max_t_norm"] for r in rows])
    slope = float(np.polyfit(np.log(a), np.log(norm), 1)[0])

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    ax.loglog(a, norm, "o-", label="max-t operator norm")
    ax.loglog(a, norm[0] * (a / a[0]), "--", color="gray",
              label="slope 1 reference")
    ax.set_xlabel("lattice constant a")
    ax.set_ylabel("norm")
    ax.set_title(f"fitted slope {slope:.3f}")
    ax.legend()
    _write_both(fig, out)
    return slope
