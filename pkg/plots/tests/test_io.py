from pathlib import Path

import pytest

from sflab_plots.io import (InputError, load_convergence, load_flow,
                            load_spectrum)

FIXTURES = Path(__file__).parent / "fixtures"


def test_load_spectrum_q1_fixture():
    table = load_spectrum(FIXTURES / "q1" / "spectrum.csv")
    assert len(table.t) == 33
    assert table.n_curves == 4 * 4 * 12
    assert table.t[0] == 0.0 and table.t[-1] == 1.0
    assert table.eigenvalues.shape == table.weight_l.shape
    assert float(table.weight_l.min()) >= 0.0
    assert float(table.weight_l.max()) <= 1.0
    # columns are sorted eigenvalue curves
    assert (table.eigenvalues[:, :-1] <= table.eigenvalues[:, 1:]).all()


def test_load_spectrum_rejects_bad_header(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,index,value\n0,0,1\n")
    with pytest.raises(InputError, match="header"):
        load_spectrum(p)


def test_load_spectrum_rejects_inconsistent_grid(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text(
        "t,eig_index,eigenvalue,weight_L,weight_Lprime\n"
        "0,0,1.0,0,0\n0,1,2.0,0,0\n1,0,1.0,0,0\n1,2,2.0,0,0\n"
    )
    with pytest.raises(InputError, match="eig_index"):
        load_spectrum(p)


def test_load_spectrum_rejects_out_of_range_weight(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text(
        "t,eig_index,eigenvalue,weight_L,weight_Lprime\n"
        "0,0,1.0,1.5,0\n"
    )
    with pytest.raises(InputError, match="weight"):
        load_spectrum(p)


def test_load_spectrum_rejects_empty(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,eig_index,eigenvalue,weight_L,weight_Lprime\n")
    with pytest.raises(InputError, match="no data"):
        load_spectrum(p)


def test_load_flow_fixture_and_errors(tmp_path):
    flow = load_flow(FIXTURES / "q1" / "flow.json")
    assert flow["sf_L"] == -1
    assert flow["sf_Lprime"] == 1
    assert flow["delta"] > 0

    p = tmp_path / "f.json"
    p.write_text('{"sf_L": 0}')
    with pytest.raises(InputError, match="missing keys"):
        load_flow(p)
    p.write_text('{"tameness_failed": true}')
    with pytest.raises(InputError, match="tameness"):
        load_flow(p)


def test_load_convergence_fixture():
    rows = load_convergence(FIXTURES / "convergence.csv")
    assert len(rows) == 3
    assert rows[0]["ratio"] is None
    assert rows[1]["ratio"] is not None
    assert rows[0]["max_t_norm"] > rows[1]["max_t_norm"] > rows[2]["max_t_norm"]


def test_load_convergence_needs_two_rows(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("M,N,a,max_t_norm,ratio\n3,9,0.1,1.0,\n")
    with pytest.raises(InputError, match="at least 2"):
        load_convergence(p)
    p.write_text("a,norm\n")
    with pytest.raises(InputError, match="header"):
        load_convergence(p)
