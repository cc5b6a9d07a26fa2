"""Parsers for the sflab output files, with invariant checks."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SPECTRUM_HEADER = ["t", "eig_index", "eigenvalue", "weight_L", "weight_Lprime"]
CONVERGENCE_HEADER = ["M", "N", "a", "max_t_norm", "ratio"]

FLOW_KEYS = ("sf_L", "sf_Lprime", "sf_perp", "sf_total", "delta")


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class SpectrumTable:
    """Eigenvalue curves on a shared t grid.

    Arrays are (n_t, n_curves): column j is the curve with eig_index j.
    """

    t: np.ndarray
    eigenvalues: np.ndarray
    weight_l: np.ndarray
    weight_lprime: np.ndarray

    @property
    def n_curves(self) -> int:
        return self.eigenvalues.shape[1]


def load_spectrum(path: str | Path) -> SpectrumTable:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SPECTRUM_HEADER:
            raise InputError(f"unexpected spectrum header: {header}")
        rows = [(float(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4]))
                for r in reader]
    if not rows:
        raise InputError("spectrum file has no data rows")

    by_t: dict[float, list] = {}
    for t, idx, lam, wl, wlp in rows:
        by_t.setdefault(t, []).append((idx, lam, wl, wlp))
    t_vals = np.array(sorted(by_t), dtype=float)
    n_curves = len(by_t[t_vals[0]])
    eig = np.empty((len(t_vals), n_curves))
    wl_arr = np.empty_like(eig)
    wlp_arr = np.empty_like(eig)
    for i, t in enumerate(t_vals):
        block = sorted(by_t[t])
        if [b[0] for b in block] != list(range(n_curves)):
            raise InputError(f"t={t}: eig_index values are not 0..{n_curves - 1}")
        for j, (_, lam, wl, wlp) in enumerate(block):
            if not (0.0 <= wl <= 1.0 and 0.0 <= wlp <= 1.0):
                raise InputError(f"t={t}, curve {j}: weight outside [0, 1]")
            eig[i, j] = lam
            wl_arr[i, j] = wl
            wlp_arr[i, j] = wlp
    return SpectrumTable(t=t_vals, eigenvalues=eig, weight_l=wl_arr,
                         weight_lprime=wlp_arr)


def load_flow(path: str | Path) -> dict:
    with open(path, encoding="ascii") as fh:
        payload = json.load(fh)
    if payload.get("tameness_failed"):
        raise InputError("flow file records a tameness failure, nothing to plot")
    missing = [k for k in FLOW_KEYS if k not in payload]
    if missing:
        raise InputError(f"flow file missing keys: {missing}")
    return payload


def load_convergence(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CONVERGENCE_HEADER:
            raise InputError(f"unexpected convergence header: {header}")
        rows = []
        for r in reader:
            rows.append({
                "M": int(r[0]), "N": int(r[1]), "a": float(r[2]),
                "max_t_norm": float(r[3]),
                "ratio": float(r[4]) if r[4] else None,
            })
    if len(rows) < 2:
        raise InputError(f"convergence plot needs at least 2 rows, got {len(rows)}")
    return rows
