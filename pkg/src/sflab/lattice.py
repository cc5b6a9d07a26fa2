"""Honeycomb tube geometry.

A tube of length L = 3aM and circumference l = sqrt(3)*a*N is tiled by
M x N rectangles of size 3a x sqrt(3)a, four sites per rectangle (two on
each sublattice).  The axial coordinate x1 lives on [0, L], the
circumferential coordinate x2 is periodic modulo l.  Zigzag edges: each
edge site is missing one neighbor along the tube axis; its value is
identified with the site itself (a SELF link carrying the hopping
amplitude on the diagonal).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SQRT3 = math.sqrt(3.0)

#: bond vectors from a B site to its three A neighbors, in units of a
DELTA_UNIT = np.array(
    [
        [0.5, SQRT3 / 2.0],
        [0.5, -SQRT3 / 2.0],
        [-1.0, 0.0],
    ]
)

# the same vectors in integer half-steps (a/2 axially, sqrt(3)a/2 around)
_DELTA_HALF = ((1, 1), (1, -1), (-2, 0))

# intra-rectangle slots in enumeration order: (u1, u2) offsets in
# half-steps from the rectangle origin, plus the sublattice
_SLOTS = (
    (1, 1, "B"),
    (2, 0, "A"),
    (4, 0, "B"),
    (5, 1, "A"),
)


@dataclass(frozen=True)
class TubeGeometry:
    """Lattice dimensions and the derived lengths.

    ``strict=False`` relaxes the divisibility and minimum-size checks;
    it exists only for raw site-count sanity checks, never for spectral
    runs (the Dirac-point index n_bar = N/3 would not be an integer).
    """

    M: int
    N: int
    a: float = 1.0
    strict: bool = field(default=True, compare=False)

    def __post_init__(self) -> None:
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be positive")
        if not self.a > 0:
            raise ValueError("lattice constant a must be positive")
        if self.strict:
            if self.N % 3 != 0:
                raise ValueError(f"N must be a multiple of 3, got N={self.N}")
            if self.M < 2 or self.N < 6:
                raise ValueError(
                    f"need M >= 2 and N >= 6 for the valley disks, got M={self.M}, N={self.N}"
                )

    @property
    def L(self) -> float:
        return 3.0 * self.a * self.M

    @property
    def l(self) -> float:
        return SQRT3 * self.a * self.N

    @property
    def m_bar(self) -> int:
        return 2 * self.M

    @property
    def n_bar(self) -> int:
        if self.N % 3 != 0:
            raise ValueError("n_bar undefined unless 3 | N")
        return self.N // 3

    @property
    def n_sites(self) -> int:
        return 4 * self.M * self.N


@dataclass(frozen=True)
class Site:
    index: int
    sublattice: str  # "A" or "B"
    position: tuple[float, float]


@dataclass(frozen=True)
class NeighborLink:
    """One of the three links of a site.

    ``boundary`` marks a fictitious-site identification: the geometric
    target would fall off a zigzag edge and is identified with the site
    itself (``target`` is then the source site).  ``bond_vector`` is
    always the geometric bond, even for boundary links.  ``wraps`` is
    set when the bond crosses the x2 = 0 seam.
    """

    target: Site
    bond_vector: tuple[float, float]
    boundary: bool
    wraps: bool


@dataclass(frozen=True)
class Lattice:
    """Immutable site table plus adjacency, array-backed."""

    geom: TubeGeometry
    positions: np.ndarray      # (n_sites, 2) float
    is_b: np.ndarray           # (n_sites,) bool
    neighbor_index: np.ndarray  # (n_sites, 3) int, self-index on boundary links
    bond_vectors: np.ndarray   # (n_sites, 3, 2) float
    is_self: np.ndarray        # (n_sites, 3) bool
    wraps: np.ndarray          # (n_sites, 3) bool

    @property
    def n_sites(self) -> int:
        return self.geom.n_sites

    def site(self, i: int) -> Site:
        return Site(
            index=i,
            sublattice="B" if self.is_b[i] else "A",
            position=(float(self.positions[i, 0]), float(self.positions[i, 1])),
        )

    def neighbors(self, i: int) -> list[NeighborLink]:
        out = []
        for k in range(3):
            j = int(self.neighbor_index[i, k])
            out.append(
                NeighborLink(
                    target=self.site(j),
                    bond_vector=(
                        float(self.bond_vectors[i, k, 0]),
                        float(self.bond_vectors[i, k, 1]),
                    ),
                    boundary=bool(self.is_self[i, k]),
                    wraps=bool(self.wraps[i, k]),
                )
            )
        return out


def neighbors(lattice: Lattice, site: Site) -> list[NeighborLink]:
    """The three links of ``site`` (B sites: +deltas, A sites: -deltas)."""
    return lattice.neighbors(site.index)


def build_lattice(geom: TubeGeometry) -> Lattice:
    """Enumerate all 4MN sites and resolve the three links per site.

    Enumeration is lexicographic by (rectangle row j, rectangle column i,
    intra-rectangle slot), so matrices built on top are reproducible
    bit-for-bit.
    """
    M, N, a = geom.M, geom.N, geom.a
    n_sites = geom.n_sites
    half_ax = a / 2.0
    half_circ = SQRT3 * a / 2.0

    positions = np.empty((n_sites, 2))
    is_b = np.empty(n_sites, dtype=bool)
    # integer half-step coordinates, used as exact lookup keys
    units = np.empty((n_sites, 2), dtype=np.int64)

    idx = 0
    key_to_index: dict[tuple[int, int], int] = {}
    for j in range(N):
        for i in range(M):
            for du1, du2, sub in _SLOTS:
                u1 = 6 * i + du1
                u2 = 2 * j + du2
                units[idx] = (u1, u2)
                positions[idx] = (u1 * half_ax, u2 * half_circ)
                is_b[idx] = sub == "B"
                key_to_index[(u1, u2 % (2 * N))] = idx
                idx += 1

    neighbor_index = np.empty((n_sites, 3), dtype=np.int64)
    bond_vectors = np.empty((n_sites, 3, 2))
    is_self = np.zeros((n_sites, 3), dtype=bool)
    wraps = np.zeros((n_sites, 3), dtype=bool)

    for s in range(n_sites):
        sign = 1 if is_b[s] else -1
        u1, u2 = int(units[s, 0]), int(units[s, 1])
        for k, (d1, d2) in enumerate(_DELTA_HALF):
            v1 = u1 + sign * d1
            v2 = u2 + sign * d2
            bond_vectors[s, k] = (sign * d1 * half_ax, sign * d2 * half_circ)
            wraps[s, k] = not (0 <= v2 < 2 * N)
            if 0 < v1 < 6 * M:
                neighbor_index[s, k] = key_to_index[(v1, v2 % (2 * N))]
            else:
                # fictitious site beyond a zigzag edge: identified with
                # the source site itself
                neighbor_index[s, k] = s
                is_self[s, k] = True

    return Lattice(
        geom=geom,
        positions=positions,
        is_b=is_b,
        neighbor_index=neighbor_index,
        bond_vectors=bond_vectors,
        is_self=is_self,
        wraps=wraps,
    )


def lattice_to_csv(lattice: Lattice, path: str) -> None:
    """Dump ``index,sublattice,x1,x2`` with 17 significant digits."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("index,sublattice,x1,x2\n")
        for i in range(lattice.n_sites):
            sub = "B" if lattice.is_b[i] else "A"
            x1, x2 = lattice.positions[i]
            fh.write(f"{i},{sub},{x1:.17g},{x2:.17g}\n")
