"""Tight-binding operators on the tube.

Two assemblies share one code path: H0(t) uses the constant potential
A_0(t) alone (its action on the momentum basis has the closed form
mu(m, n, t)), and H(t) adds a gauge function F, which conjugates H0(t)
by the diagonal unitary exp(iF) exactly.

Normalization: "dirac_unit" sets the hopping amplitude gamma0 = 2/(3a)
so the low-energy slopes match the truncated Dirac operators with no
rescaling; "physical" takes gamma0 in energy units (display only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import ModeIndex, enumerate_g0, phi
from .flux import FluxExperiment, FluxSchedule
from .lattice import Lattice, TubeGeometry

#: dense assembly / diagonalization cap (matrix size 4MN)
DENSE_SITE_CAP = 4096

DEFAULT_PHYSICAL_GAMMA0 = 2.7  # eV, for display only


def gamma0(geom: TubeGeometry, normalization: str = "dirac_unit",
           physical_value: float = DEFAULT_PHYSICAL_GAMMA0) -> float:
    if normalization == "dirac_unit":
        return 2.0 / (3.0 * geom.a)
    if normalization == "physical":
        return physical_value
    raise ValueError(f"unknown normalization {normalization!r}")


@dataclass(frozen=True)
class TightBindingOperator:
    matrix: np.ndarray | sp.spmatrix
    geom: TubeGeometry
    t: float
    normalization: str = "dirac_unit"

    @property
    def dense(self) -> np.ndarray:
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return self.matrix


def mu(m: int, n: int, t: float, geom: TubeGeometry, schedule: FluxSchedule,
       normalization: str = "dirac_unit",
       physical_value: float = DEFAULT_PHYSICAL_GAMMA0) -> complex:
    """Closed-form coefficient of H0(t) on the momentum basis:

        H0(t) phi_mn = mu(m, n, t) phi_{2 m_bar - m, n}

    with mu = gamma0 * exp(-i alpha/3) (exp(i alpha) - 2 cos beta),
    alpha = pi (m - m_bar)/(2M), beta = pi (n - q(t))/N.  In dirac_unit
    normalization gamma0 = 2/(3a).
    """
    alpha = math.pi * (m - geom.m_bar) / (2.0 * geom.M)
    beta = math.pi * (n - float(schedule.q(t))) / geom.N
    base = np.exp(-1j * alpha / 3.0) * (np.exp(1j * alpha) - 2.0 * math.cos(beta))
    return complex(gamma0(geom, normalization, physical_value) * base)


def _assemble(lattice: Lattice, phases: np.ndarray, amplitude: float,
              sparse: bool) -> np.ndarray | sp.spmatrix:
    """Sum gamma0 * phase over all links; SELF links land on the diagonal."""
    n = lattice.n_sites
    rows = np.repeat(np.arange(n), 3)
    cols = lattice.neighbor_index.reshape(-1)
    vals = amplitude * phases.reshape(-1)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n), dtype=complex)
    if sparse:
        return mat.tocsr()
    return mat.toarray()


def build_h0(lattice: Lattice, schedule: FluxSchedule, t: float,
             normalization: str = "dirac_unit",
             physical_value: float = DEFAULT_PHYSICAL_GAMMA0,
             sparse: bool = False) -> TightBindingOperator:
    """Real-space assembly with the constant potential A_0(t) only.

    The Peierls phase of a bond is exp(-i * delta_2 * 2 pi q(t) / l);
    for SELF links the bond is +-delta3 (delta_2 = 0), so their phase is
    exactly 1 and they contribute gamma0 on the diagonal.
    """
    if not sparse and lattice.n_sites > DENSE_SITE_CAP:
        raise ValueError(
            f"dense assembly capped at {DENSE_SITE_CAP} sites; "
            f"got {lattice.n_sites} (pass sparse=True)"
        )
    a0 = 2.0 * math.pi * float(schedule.q(t)) / lattice.geom.l
    phases = np.exp(-1j * lattice.bond_vectors[:, :, 1] * a0)
    amp = gamma0(lattice.geom, normalization, physical_value)
    matrix = _assemble(lattice, phases, amp, sparse)
    return TightBindingOperator(matrix=matrix, geom=lattice.geom, t=t,
                                normalization=normalization)


def build_ht(lattice: Lattice, experiment: FluxExperiment, t: float,
             normalization: str = "dirac_unit",
             physical_value: float = DEFAULT_PHYSICAL_GAMMA0,
             sparse: bool = False) -> TightBindingOperator:
    """Assembly with the full potential A_0(t) + grad F.

    Equals U_t H0(t) U_t^{-1} entrywise up to rounding: the grad F part
    of each bond phase is the exact difference F(x+delta) - F(x), and a
    SELF link keeps phase 1 because the fictitious-value identification
    is gauge covariant (the diagonal entry conjugates to itself).
    """
    if not sparse and lattice.n_sites > DENSE_SITE_CAP:
        raise ValueError(
            f"dense assembly capped at {DENSE_SITE_CAP} sites; "
            f"got {lattice.n_sites} (pass sparse=True)"
        )
    geom = lattice.geom
    a0 = 2.0 * math.pi * float(experiment.schedule.q(t)) / geom.l
    line = lattice.bond_vectors[:, :, 1] * a0

    x1 = lattice.positions[:, 0][:, None]
    x2 = lattice.positions[:, 1][:, None]
    f_from = np.asarray(experiment.gauge.value(x1, x2, t), dtype=float)
    f_to = np.asarray(
        experiment.gauge.value(
            x1 + lattice.bond_vectors[:, :, 0], x2 + lattice.bond_vectors[:, :, 1], t
        ),
        dtype=float,
    )
    df = np.where(lattice.is_self, 0.0, f_to - f_from)
    phases = np.exp(-1j * (line + df))
    amp = gamma0(geom, normalization, physical_value)
    matrix = _assemble(lattice, phases, amp, sparse)
    return TightBindingOperator(matrix=matrix, geom=geom, t=t,
                                normalization=normalization)


def closed_form_spectrum(geom: TubeGeometry, schedule: FluxSchedule, t: float,
                         normalization: str = "dirac_unit") -> np.ndarray:
    """The full multiset of eigenvalues from the block structure.

    Two-dimensional blocks V_mn = span{phi_mn, phi_{2 m_bar - m, n}} for
    m > m_bar contribute +-|mu(m, n, t)|; one-dimensional blocks
    W_n = span{phi_{m_bar, n}} contribute the real value mu(m_bar, n, t).
    """
    g0 = enumerate_g0(geom)
    vals = []
    for mode in g0.modes:
        if mode.m == geom.m_bar:
            vals.append(float(np.real(mu(mode.m, mode.n, t, geom, schedule,
                                         normalization))))
        elif mode.m > geom.m_bar:
            r = abs(mu(mode.m, mode.n, t, geom, schedule, normalization))
            vals.extend((r, -r))
    return np.sort(np.asarray(vals))


def w_block_modes(geom: TubeGeometry, q_bar: float) -> tuple[ModeIndex, ...]:
    """The W_{j +- n_bar} modes with |j| <= q_bar (low-energy window)."""
    j_max = int(math.floor(q_bar + 1e-12))
    modes = []
    for j in range(-j_max, j_max + 1):
        for n in (j + geom.n_bar, j - geom.n_bar):
            modes.append(ModeIndex(geom.m_bar, n))
    return tuple(dict.fromkeys(modes))


def default_delta(geom: TubeGeometry) -> float:
    """Spectral window half-width min{pi/(2L), pi/l}."""
    return min(math.pi / (2.0 * geom.L), math.pi / geom.l)


def low_energy_window_check(lattice: Lattice, schedule: FluxSchedule,
                            delta: float | None = None,
                            q_bar: float | None = None,
                            t_grid: np.ndarray | None = None,
                            normalization: str = "dirac_unit") -> dict:
    """Verify that every H0(t) eigenvalue in (-delta, delta) lives in the
    allowed W blocks.

    Diagonalizes densely per t sample and measures the squared weight of
    each in-window eigenvector on span{phi_{m_bar, j +- n_bar}: |j| <= q_bar}.
    Also reports the two coarseness margins: the V-block floor
    (2/3a) sin(3 pi a / 2L) must exceed pi/(2L), and out-of-window W
    levels must stay at or above pi/l.
    """
    geom = lattice.geom
    if delta is None:
        delta = default_delta(geom)
    if q_bar is None:
        q_bar = schedule.q_bar
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 17)

    allowed = w_block_modes(geom, q_bar)
    cols = np.stack([phi(mode, lattice) for mode in allowed], axis=1)
    cols = cols / math.sqrt(lattice.n_sites)

    v_floor = (2.0 / (3.0 * geom.a)) * math.sin(3.0 * math.pi * geom.a / (2.0 * geom.L))
    coarse = v_floor <= math.pi / (2.0 * geom.L)

    min_weight = 1.0
    worst = None
    n_in_window = 0
    for t in t_grid:
        op = build_h0(lattice, schedule, float(t), normalization)
        evals, evecs = np.linalg.eigh(op.dense)
        idx = np.nonzero((evals > -delta) & (evals < delta))[0]
        for i in idx:
            v = evecs[:, i]
            w = float(np.real(np.vdot(cols.conj().T @ v, cols.conj().T @ v)))
            n_in_window += 1
            if w < min_weight:
                min_weight = w
                worst = {"t": float(t), "eigenvalue": float(evals[i]), "weight": w}
    return {
        "delta": float(delta),
        "q_bar": float(q_bar),
        "allowed_modes": [(mo.m, mo.n) for mo in allowed],
        "n_in_window": n_in_window,
        "min_weight": float(min_weight),
        "worst": worst,
        "v_block_floor": float(v_floor),
        "v_block_floor_ok": not coarse,
        "too_coarse": bool(coarse),
    }
