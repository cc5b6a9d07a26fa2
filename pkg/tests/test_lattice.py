import math

import numpy as np
import pytest

from sflab.lattice import SQRT3, TubeGeometry, build_lattice, lattice_to_csv

BOND_LENGTH_TOL = 1e-12


def test_relaxed_geometry_site_count():
    # N=4 violates divisibility; only the raw 4MN count is meaningful here
    geom = TubeGeometry(M=3, N=4, a=1.0, strict=False)
    assert build_lattice(geom).n_sites == 48


def test_site_count_and_link_count():
    geom = TubeGeometry(M=2, N=6, a=1.0)
    lat = build_lattice(geom)
    assert lat.n_sites == 48
    assert lat.neighbor_index.shape == (48, 3)
    for i in range(48):
        assert len(lat.neighbors(i)) == 3


def test_rejects_bad_geometries():
    with pytest.raises(ValueError):
        TubeGeometry(M=2, N=7, a=1.0)
    with pytest.raises(ValueError):
        TubeGeometry(M=1, N=6, a=1.0)
    with pytest.raises(ValueError):
        TubeGeometry(M=4, N=3, a=1.0)
    with pytest.raises(ValueError):
        TubeGeometry(M=2, N=6, a=-1.0)


def test_self_link_count_matches_edge_enumeration():
    """Independent oracle: a site is missing a neighbor iff no other site
    sits at geometric distance a in the declared bond direction."""
    geom = TubeGeometry(M=2, N=6, a=1.0)
    lat = build_lattice(geom)
    l = geom.l

    missing = 0
    for i in range(lat.n_sites):
        x = lat.positions[i]
        for k in range(3):
            target = x + lat.bond_vectors[i, k]
            target_wrapped = np.array([target[0], target[1] % l])
            dist = np.linalg.norm(lat.positions - target_wrapped, axis=1)
            if dist.min() > 1e-9:
                missing += 1
                assert lat.is_self[i, k]
            else:
                assert not lat.is_self[i, k]
    assert missing == 2 * geom.N
    assert int(lat.is_self.sum()) == 2 * geom.N


def test_self_links_sit_on_zigzag_edges():
    geom = TubeGeometry(M=2, N=6, a=1.0)
    lat = build_lattice(geom)
    a = geom.a
    for i in range(lat.n_sites):
        for link in lat.neighbors(i):
            if link.boundary:
                x1 = lat.positions[i, 0]
                if lat.is_b[i]:
                    assert x1 == pytest.approx(a / 2)
                else:
                    assert x1 == pytest.approx(geom.L - a / 2)
                # the missing neighbor is always along +-delta3
                assert link.bond_vector[1] == 0.0


def test_bond_lengths_and_bipartiteness():
    geom = TubeGeometry(M=3, N=6, a=0.5)
    lat = build_lattice(geom)
    for i in range(lat.n_sites):
        for k in range(3):
            assert math.hypot(*lat.bond_vectors[i, k]) == pytest.approx(
                geom.a, abs=BOND_LENGTH_TOL * geom.a
            )
            j = lat.neighbor_index[i, k]
            if not lat.is_self[i, k]:
                assert lat.is_b[i] != lat.is_b[j]


def test_adjacency_symmetric_on_physical_bonds():
    geom = TubeGeometry(M=2, N=6, a=1.0)
    lat = build_lattice(geom)
    pairs = set()
    for i in range(lat.n_sites):
        for k in range(3):
            if not lat.is_self[i, k]:
                pairs.add((i, int(lat.neighbor_index[i, k])))
    assert all((j, i) in pairs for i, j in pairs)
    # total physical half-bonds = 3 * 4MN - self links
    assert len(pairs) == 3 * lat.n_sites - 2 * geom.N


def test_sublattice_counts_equal():
    geom = TubeGeometry(M=2, N=9, a=1.0)
    lat = build_lattice(geom)
    assert int(lat.is_b.sum()) == 2 * geom.M * geom.N


def test_positions_in_range_and_wrap_flags():
    geom = TubeGeometry(M=2, N=6, a=1.0)
    lat = build_lattice(geom)
    assert np.all(lat.positions[:, 0] > 0)
    assert np.all(lat.positions[:, 0] < geom.L)
    assert np.all(lat.positions[:, 1] >= 0)
    assert np.all(lat.positions[:, 1] < geom.l)
    for i in range(lat.n_sites):
        for k in range(3):
            x2 = lat.positions[i, 1] + lat.bond_vectors[i, k, 1]
            assert lat.wraps[i, k] == (not 0 <= x2 < geom.l)


def test_derived_lengths():
    geom = TubeGeometry(M=4, N=12, a=0.25)
    assert geom.L == pytest.approx(3.0)
    assert geom.l == pytest.approx(SQRT3 * 3.0)
    assert geom.m_bar == 8
    assert geom.n_bar == 4


def test_csv_dump_round_trips(tmp_path):
    geom = TubeGeometry(M=2, N=6, a=1.0)
    lat = build_lattice(geom)
    path = tmp_path / "lattice.csv"
    lattice_to_csv(lat, str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "index,sublattice,x1,x2"
    assert len(lines) == 1 + lat.n_sites
    idx, sub, x1, x2 = lines[1].split(",")
    assert (int(idx), sub) == (0, "B")
    assert float(x1) == lat.positions[0, 0]
    assert float(x2) == lat.positions[0, 1]
