import math

import numpy as np
import pytest

from sflab import flux
from sflab.flux import FluxExperiment, FluxSchedule, GaugeFunction
from sflab.lattice import TubeGeometry, build_lattice

FLUX_QUAD_TOL = 1e-10
CURL_TOL = 1e-6

GEOM = TubeGeometry(M=3, N=6, a=1.0)


def _experiment(q_final=1.0, schedule="linear", gauge="sine", eps=0.3):
    return FluxExperiment(
        geom=GEOM,
        schedule=FluxSchedule(q_final=q_final, kind=schedule),
        gauge=GaugeFunction(geom=GEOM, kind=gauge, epsilon=eps),
    )


def test_schedule_endpoints_and_qbar():
    for kind in ("linear", "smoothstep"):
        s = FluxSchedule(q_final=2.0, kind=kind)
        assert s.q(0.0) == 0.0
        assert s.q(1.0) == pytest.approx(2.0)
        assert s.q_bar == pytest.approx(2.0)
        assert s.is_closed
    assert not FluxSchedule(q_final=1.5).is_closed
    with pytest.raises(ValueError):
        FluxSchedule(q_final=1.0, kind="bogus")


def test_smoothstep_has_flat_ends():
    s = FluxSchedule(q_final=1.0, kind="smoothstep")
    h = 1e-6
    assert abs(s.q(h) - s.q(0.0)) / h < 1e-5
    assert abs(s.q(1.0) - s.q(1.0 - h)) / h < 1e-5


def test_gauge_periodicity_and_zero_at_t0():
    g = GaugeFunction(geom=GEOM, kind="sine", epsilon=0.3)
    x1, x2 = 1.3, 0.7
    assert g.value(x1, x2, 0.0) == 0.0
    assert abs(g.value(x1, x2 + GEOM.l, 0.8) - g.value(x1, x2, 0.8)) < 1e-12


def test_zero_gauge_potential_is_constant():
    exp_ = _experiment(gauge="zero")
    a1, a2 = exp_.potential((0.5, 0.2), 0.7)
    assert a1 == 0.0
    assert a2 == pytest.approx(2 * math.pi * 0.7 / GEOM.l)


def test_circumference_flux_gauge_independent():
    for gauge in ("zero", "sine"):
        exp_ = _experiment(gauge=gauge)
        for x1 in (0.1, GEOM.L / 2):
            got = flux.circumference_flux(exp_, x1, 0.63)
            assert got == pytest.approx(2 * math.pi * 0.63, abs=FLUX_QUAD_TOL)


def test_custom_gauge_uses_finite_differences():
    custom = lambda x1, x2, t: t * 0.1 * np.sin(2 * math.pi * x2 / GEOM.l) * x1 / GEOM.L
    g_fd = GaugeFunction(geom=GEOM, kind="zero", custom=custom)
    g_exact = GaugeFunction(geom=GEOM, kind="sine", epsilon=0.1)
    d1f, d2f = g_fd.gradient(1.1, 2.3, 0.9)
    d1e, d2e = g_exact.gradient(1.1, 2.3, 0.9)
    assert d1f == pytest.approx(d1e, abs=1e-6)
    assert d2f == pytest.approx(d2e, abs=1e-6)


def test_zero_curl_on_a_grid():
    exp_ = _experiment(gauge="sine")
    t = 0.8
    h = GEOM.a / 50
    rng = np.random.default_rng(1)
    for _ in range(20):
        x1 = rng.uniform(0.2, GEOM.L - 0.2)
        x2 = rng.uniform(0.0, GEOM.l)
        da2_dx1 = (exp_.potential((x1 + h, x2), t)[1]
                   - exp_.potential((x1 - h, x2), t)[1]) / (2 * h)
        da1_dx2 = (exp_.potential((x1, x2 + h), t)[0]
                   - exp_.potential((x1, x2 - h), t)[0]) / (2 * h)
        assert abs(da2_dx1 - da1_dx2) < CURL_TOL


def test_bond_phase_axial_bond_under_a0():
    exp_ = _experiment(gauge="zero")
    ph = flux.bond_phase(exp_, (1.5, 0.5), (-GEOM.a, 0.0), 0.4)
    assert ph == pytest.approx(1.0)


def test_bond_phase_delta1_under_a0():
    exp_ = _experiment(gauge="zero", q_final=1.0)
    t = 0.7
    delta1 = (GEOM.a / 2, GEOM.a * math.sqrt(3) / 2)
    got = flux.bond_phase(exp_, (1.0, 0.0), delta1, t)
    want = np.exp(-1j * delta1[1] * 2 * math.pi * t / GEOM.l)
    assert got == pytest.approx(want)


def test_bond_phase_quadrature_oracle():
    """Exact line integral vs brute-force quadrature along the bond."""
    exp_ = _experiment(gauge="sine", eps=0.3)
    rng = np.random.default_rng(5)
    t = 0.43
    for _ in range(10):
        x = (rng.uniform(0.5, GEOM.L - 0.5), rng.uniform(0, GEOM.l))
        delta = rng.standard_normal(2)
        taus = np.linspace(0, 1, 20001)
        vals = np.array([
            np.dot(delta, exp_.potential((x[0] + tau * delta[0],
                                          x[1] + tau * delta[1]), t))
            for tau in taus
        ])
        integral = np.trapezoid(vals, taus)
        got = flux.bond_phase(exp_, x, tuple(delta), t)
        assert got == pytest.approx(np.exp(-1j * integral), abs=1e-8)


def test_bond_phase_conjugation_identity():
    """A0-phase * exp(iF(x)) = exp(iF(x+delta)) * full phase... i.e. the
    gradient part of the phase is exactly the F difference."""
    exp_ = _experiment(gauge="sine")
    t = 0.9
    x = (1.2, 0.8)
    delta = (GEOM.a / 2, -GEOM.a * math.sqrt(3) / 2)
    full = flux.bond_phase(exp_, x, delta, t)
    a0_only = np.exp(-1j * delta[1] * exp_.a0_circ(t))
    f_from = exp_.gauge.value(*x, t)
    f_to = exp_.gauge.value(x[0] + delta[0], x[1] + delta[1], t)
    assert full * np.exp(1j * f_to) == pytest.approx(a0_only * np.exp(1j * f_from))


def test_gauge_unitary_properties():
    lat = build_lattice(GEOM)
    exp_ = _experiment(gauge="sine")
    u0 = flux.gauge_unitary(exp_, 0.0, lat)
    assert np.allclose(u0, 1.0)
    u = flux.gauge_unitary(exp_, 0.77, lat)
    assert np.allclose(np.abs(u), 1.0, atol=1e-14)
    rng = np.random.default_rng(2)
    psi = rng.standard_normal(lat.n_sites) + 1j * rng.standard_normal(lat.n_sites)
    assert np.linalg.norm(u * psi) == pytest.approx(np.linalg.norm(psi))


def test_integer_flux_gauge_shift_single_valued():
    """The gauge function removing one flux quantum, S = 2 pi q x2 / l,
    gives a single-valued phase factor around the circumference."""
    q = 2
    s = lambda x1, x2: 2 * math.pi * q * x2 / GEOM.l
    x1 = 1.0
    assert abs(np.exp(1j * s(x1, 0.0)) - np.exp(1j * s(x1, GEOM.l))) < 1e-12
