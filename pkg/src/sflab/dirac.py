"""Truncated Dirac operators on the finite mode space.

Each valley carries a plane-wave mode basis u_mn on the disk
m^2 + n^2 <= d^2.  The reduced operator maps u_mn to mu0(m, n, t) u_{-m, n}
with

    K valley:   mu0 =  2 pi (n - q(t))/l + i pi m / L
    K' valley:  mu0 = -2 pi (n - q(t))/l + i pi m / L

(the K' coefficient follows from the p1 - i p2 symbol; see the symbolic
oracle in the tests).  The intertwiner W embeds the disk into the
lattice valley subspace: u_mn -> phi_{m_bar + m, +-n_bar + n}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import ModeIndex, in_g0, phi
from .flux import FluxSchedule
from .hamiltonian import build_h0
from .lattice import Lattice, TubeGeometry

VALLEYS = ("K", "Kprime")

#: fine grid for the crossing-count oracle
ORACLE_SAMPLES = 4001


@dataclass(frozen=True)
class DiracModeSpace:
    d: int
    modes: tuple[tuple[int, int], ...]
    column: dict[tuple[int, int], int]

    @property
    def dim(self) -> int:
        return len(self.modes)


def dirac_modes(d: int) -> DiracModeSpace:
    """All integer (m, n) with m^2 + n^2 <= d^2, ordered by (n, m)."""
    if d < 1:
        raise ValueError("mode radius d must be >= 1")
    modes = [
        (m, n)
        for n in range(-d, d + 1)
        for m in range(-d, d + 1)
        if m * m + n * n <= d * d
    ]
    column = {mn: c for c, mn in enumerate(modes)}
    # closure under (m, n) -> (-m, n) is automatic for the symmetric range
    return DiracModeSpace(d=d, modes=tuple(modes), column=column)


def mu0(valley: str, m: int, n: int, t: float, geom: TubeGeometry,
        schedule: FluxSchedule) -> complex:
    if valley not in VALLEYS:
        raise ValueError(f"valley must be one of {VALLEYS}, got {valley!r}")
    circ = 2.0 * math.pi * (n - float(schedule.q(t))) / geom.l
    axial = math.pi * m / geom.L
    if valley == "K":
        return complex(circ, axial)
    return complex(-circ, axial)


@dataclass(frozen=True)
class TruncatedDiracOperator:
    valley: str
    space: DiracModeSpace
    matrix: np.ndarray
    t: float


def build_dirac(valley: str, d: int, geom: TubeGeometry, schedule: FluxSchedule,
                t: float) -> TruncatedDiracOperator:
    """Assemble the operator on the disk; only u_mn <-> u_{-m,n} couple."""
    space = dirac_modes(d)
    mat = np.zeros((space.dim, space.dim), dtype=complex)
    for (m, n), col in space.column.items():
        row = space.column[(-m, n)]
        mat[row, col] = mu0(valley, m, n, t, geom, schedule)
    return TruncatedDiracOperator(valley=valley, space=space, matrix=mat, t=t)


def crossing_count_flow(valley: str, d: int, geom: TubeGeometry,
                        schedule: FluxSchedule) -> int:
    """Signed crossings of the m = 0 levels through a reference fence.

    The m > 0 blocks have |eigenvalue| >= pi/L for all t, so a fence at
    -pi/(2L) is only ever crossed by the one-dimensional m = 0 levels
    mu0(0, n, t).  Down-crossings count -1, up-crossings +1, matching
    the convention that an eigenvalue leaving zero downward at t = 0 is
    a loss and one arriving at zero at t = 1 is not yet a crossing.
    """
    if not schedule.is_closed:
        raise ValueError("spectral flow needs an integer final flux")
    fence = -math.pi / (2.0 * geom.L)
    grid = np.linspace(0.0, 1.0, ORACLE_SAMPLES)
    total = 0
    for n in range(-d, d + 1):
        lam = np.array([mu0(valley, 0, n, float(t), geom, schedule).real
                        for t in grid])
        side = lam > fence
        total += int(np.sum(side[1:].astype(int) - side[:-1].astype(int)))
    return total


def dirac_spectral_flow(valley: str, d: int, geom: TubeGeometry,
                        schedule: FluxSchedule, method: str = "both",
                        grid_samples: int = 64) -> int:
    """Spectral flow of the truncated family, computed one or two ways.

    method "oracle": crossing count; "engine": the generic flow engine
    with the identity projector; "both": run both and require agreement.
    """
    if method in ("oracle", "both"):
        oracle = crossing_count_flow(valley, d, geom, schedule)
        if method == "oracle":
            return oracle
    from .specflow import HermitianFamily, spectral_flow  # local: avoid cycle

    family = HermitianFamily(
        evaluator=lambda t: build_dirac(valley, d, geom, schedule, t).matrix,
        grid=np.linspace(0.0, 1.0, grid_samples + 1),
        name=f"dirac-{valley}-d{d}",
    )
    engine = spectral_flow(family, delta=math.pi / (2.0 * geom.L))
    if method == "both" and engine != oracle:
        raise AssertionError(
            f"flow mismatch for {valley}, d={d}: oracle {oracle}, engine {engine}"
        )
    return engine


def intertwiner(valley: str, d: int, lattice: Lattice) -> np.ndarray:
    """Unitary embedding of the disk modes into the lattice valley span.

    Columns are the plain-orthonormal phi_{m_bar + m, +-n_bar + n} in disk
    mode order.  Requires d < n_bar so every image index is canonical
    (checked; no extra canonicalization phases are ever needed).
    """
    geom = lattice.geom
    if valley not in VALLEYS:
        raise ValueError(f"valley must be one of {VALLEYS}, got {valley!r}")
    if not d < geom.n_bar:
        raise ValueError(f"need d < n_bar = {geom.n_bar}, got d={d}")
    center_n = geom.n_bar if valley == "K" else -geom.n_bar
    space = dirac_modes(d)
    cols = np.empty((lattice.n_sites, space.dim), dtype=complex)
    for c, (m, n) in enumerate(space.modes):
        tm, tn = geom.m_bar + m, center_n + n
        if not in_g0(tm, tn, geom):
            raise AssertionError(f"intertwiner image ({tm},{tn}) not canonical")
        cols[:, c] = phi(ModeIndex(tm, tn), lattice)
    return cols / math.sqrt(lattice.n_sites)


def restricted_tb(valley: str, d: int, lattice: Lattice, schedule: FluxSchedule,
                  t: float, sparse: bool = False) -> np.ndarray:
    """R(t) = W^dagger H0(t) W on the disk modes (same basis as build_dirac)."""
    w = intertwiner(valley, d, lattice)
    op = build_h0(lattice, schedule, t, sparse=sparse)
    hw = op.matrix @ w if sp.issparse(op.matrix) else op.matrix @ w
    return w.conj().T @ hw


def convergence_check(d: int, schedule: FluxSchedule,
                      geoms: list[TubeGeometry],
                      t_grid: np.ndarray | None = None,
                      valley: str = "K") -> list[dict]:
    """Max-over-t operator norm of R(t) - D0(t) per geometry, with ratios.

    Geometries should share L and l (a scales inversely with M); the
    norm is O(a), so each doubling should roughly halve it.  Sparse
    assembly is used above the dense cap.
    """
    from .lattice import build_lattice  # local import to keep module heads light
    from .hamiltonian import DENSE_SITE_CAP

    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 9)
    rows = []
    prev = None
    for geom in geoms:
        lattice = build_lattice(geom)
        use_sparse = lattice.n_sites > DENSE_SITE_CAP
        worst = 0.0
        for t in t_grid:
            r = restricted_tb(valley, d, lattice, schedule, float(t),
                              sparse=use_sparse)
            d0 = build_dirac(valley, d, geom, schedule, float(t)).matrix
            worst = max(worst, float(np.linalg.norm(r - d0, 2)))
        ratio = None if prev is None else worst / prev
        rows.append({
            "M": geom.M, "N": geom.N, "a": geom.a,
            "max_t_norm": worst, "ratio": ratio,
        })
        prev = worst
    return rows
