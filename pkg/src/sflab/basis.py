"""Momentum basis on the tube.

The plane-wave-like functions phi_mn (one sign convention per
sublattice) form an orthonormal basis of the 4MN-dimensional site space
with the uniform inner-product weight 1/(4MN), provided the labels run
over the index set G0.  Off-domain labels reduce to canonical ones up to
a cube root of unity via the shift vectors e1 = (2M, N), e2 = (2M, -N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Lattice, TubeGeometry

#: canonicalization searches shifts j,k in [-SEARCH_BOUND, SEARCH_BOUND];
#: sufficient for inputs within one fundamental-domain diameter
SEARCH_BOUND = 3


@dataclass(frozen=True)
class ModeIndex:
    m: int
    n: int


@dataclass(frozen=True)
class IndexSetG0:
    geom: TubeGeometry
    modes: tuple[ModeIndex, ...]
    column: dict[tuple[int, int], int]

    def __len__(self) -> int:
        return len(self.modes)


def in_g0(m: int, n: int, geom: TubeGeometry) -> bool:
    """Membership conditions for the canonical index set.

    Half-integer boundaries (N/2) are compared as 2n vs N so the strict /
    non-strict inequalities are exact for every parity of N.
    """
    N, M = geom.N, geom.M
    if not (-N <= n <= N - 1):
        return False
    if 2 * n > -N and 2 * n <= N:  # -N/2 < n <= N/2
        return M <= m <= 3 * M
    return M + 1 <= m <= 3 * M - 1


def shift_vectors(geom: TubeGeometry) -> tuple[tuple[int, int], tuple[int, int]]:
    return (2 * geom.M, geom.N), (2 * geom.M, -geom.N)


def enumerate_g0(geom: TubeGeometry) -> IndexSetG0:
    """All canonical (m, n), ordered lexicographically by (n, m)."""
    modes = []
    for n in range(-geom.N, geom.N):
        for m in range(geom.M, 3 * geom.M + 1):
            if in_g0(m, n, geom):
                modes.append(ModeIndex(m, n))
    column = {(mode.m, mode.n): c for c, mode in enumerate(modes)}
    if len(modes) != 4 * geom.M * geom.N:
        raise AssertionError(
            f"G0 enumeration produced {len(modes)} modes, expected {4 * geom.M * geom.N}"
        )
    return IndexSetG0(geom=geom, modes=tuple(modes), column=column)


def canonicalize(m: int, n: int, geom: TubeGeometry) -> tuple[ModeIndex, complex]:
    """Reduce (m, n) to its canonical representative.

    Returns (mode, phase) with phi_{m,n} = phase * phi_{mode} pointwise
    on the lattice, phase = exp(-2 pi i (j+k)/3) where
    (m, n) = (mode.m, mode.n) + j*e1 + k*e2.
    """
    e1, e2 = shift_vectors(geom)
    for j in range(-SEARCH_BOUND, SEARCH_BOUND + 1):
        for k in range(-SEARCH_BOUND, SEARCH_BOUND + 1):
            mt = m - j * e1[0] - k * e2[0]
            nt = n - j * e1[1] - k * e2[1]
            if in_g0(mt, nt, geom):
                phase = complex(np.exp(-2j * math.pi * (j + k) / 3.0))
                return ModeIndex(mt, nt), phase
    raise ValueError(
        f"no shift with |j|,|k| <= {SEARCH_BOUND} maps ({m},{n}) into G0; "
        "input too far from the fundamental domain"
    )


def rho(m: int, n: int, geom: TubeGeometry) -> float:
    """Distance from (m, n) to the nearest point of the shift lattice."""
    e1, e2 = shift_vectors(geom)
    best = math.inf
    for j in range(-SEARCH_BOUND, SEARCH_BOUND + 1):
        for k in range(-SEARCH_BOUND, SEARCH_BOUND + 1):
            dm = m + j * e1[0] + k * e2[0]
            dn = n + j * e1[1] + k * e2[1]
            best = min(best, math.hypot(dm, dn))
    return best


def phi(mode: ModeIndex, lattice: Lattice) -> np.ndarray:
    """Basis vector phi_mn as a complex site vector of modulus 1.

    Component exp(i pi m x1/L + 2 pi i n x2/l) on sublattice B and
    exp(-i pi m x1/L + 2 pi i n x2/l) on sublattice A.  Unit norm in the
    weighted inner product (weight 1/(4MN)).
    """
    geom = lattice.geom
    x1 = lattice.positions[:, 0]
    x2 = lattice.positions[:, 1]
    sign = np.where(lattice.is_b, 1.0, -1.0)
    angle = sign * (math.pi * mode.m / geom.L) * x1 + (2.0 * math.pi * mode.n / geom.l) * x2
    return np.exp(1j * angle)


def basis_matrix(lattice: Lattice, g0: IndexSetG0 | None = None) -> np.ndarray:
    """Columns = phi modes in G0 order, orthonormal in the plain l2 sense.

    The raw phi vectors are unit-norm in the 1/(4MN)-weighted inner
    product; dividing by sqrt(4MN) makes the matrix an ordinary unitary,
    so downstream projectors and restrictions are plain matrix algebra.
    """
    if g0 is None:
        g0 = enumerate_g0(lattice.geom)
    n = lattice.n_sites
    out = np.empty((n, len(g0)), dtype=complex)
    for c, mode in enumerate(g0.modes):
        out[:, c] = phi(mode, lattice)
    return out / math.sqrt(n)


@dataclass(frozen=True)
class ValleySubspace:
    kind: str  # "L" or "Lprime"
    d: int
    modes: tuple[ModeIndex, ...]
    columns: np.ndarray   # plain-orthonormal basis of the subspace, (4MN, k)
    projector: np.ndarray  # Hermitian idempotent, (4MN, 4MN)

    @property
    def rank(self) -> int:
        return len(self.modes)


def valley_modes(kind: str, d: int, geom: TubeGeometry) -> tuple[ModeIndex, ...]:
    if kind not in ("L", "Lprime"):
        raise ValueError(f"valley kind must be 'L' or 'Lprime', got {kind!r}")
    center_n = geom.n_bar if kind == "L" else -geom.n_bar
    g0 = enumerate_g0(geom)
    return tuple(
        mode
        for mode in g0.modes
        if (mode.m - geom.m_bar) ** 2 + (mode.n - center_n) ** 2 <= d * d
    )


def valley_projector(
    kind: str, d: int, lattice: Lattice, q_bar: float = 0.0
) -> ValleySubspace:
    """Projector onto the span of the phi modes in the disk of radius d.

    Feasibility: q_bar < d < n_bar (the disk must clear both the flux
    excursion and the opposite valley).
    """
    geom = lattice.geom
    if not d < geom.n_bar:
        raise ValueError(
            f"infeasible valley radius: need d < n_bar = {geom.n_bar}, got d={d}"
        )
    if not q_bar < d:
        raise ValueError(
            f"infeasible valley radius: need q_bar < d, got q_bar={q_bar}, d={d}"
        )
    modes = valley_modes(kind, d, geom)
    n = lattice.n_sites
    cols = np.empty((n, len(modes)), dtype=complex)
    for c, mode in enumerate(modes):
        cols[:, c] = phi(mode, lattice)
    cols /= math.sqrt(n)
    projector = cols @ cols.conj().T
    return ValleySubspace(kind=kind, d=d, modes=modes, columns=cols, projector=projector)


def valley_weights(
    vector: np.ndarray, subspaces: tuple[ValleySubspace, ...]
) -> tuple[float, ...]:
    """Relative weights <psi, P psi>/<psi, psi> for each subspace.

    Weight is insensitive to the inner-product scale, so the plain l2
    form is used.
    """
    norm_sq = float(np.real(np.vdot(vector, vector)))
    if norm_sq == 0.0:
        raise ValueError("zero vector has no valley weights")
    out = []
    for sub in subspaces:
        coeff = sub.columns.conj().T @ vector
        out.append(float(np.real(np.vdot(coeff, coeff))) / norm_sq)
    return tuple(out)
