"""Adiabatic flux switching and gauge freedom.

The magnetic potential on the tube is parameterized as
A(x, t) = A_0(t) + grad F(x, t) with A_0(t) = (0, 2 pi q(t)/l): every
admissible tangential field with zero normal component has this form,
which makes the zero-curl condition automatic and bond line integrals
exact (gradient theorem, no quadrature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lattice import Lattice, TubeGeometry

SCHEDULE_KINDS = ("linear", "smoothstep")
GAUGE_KINDS = ("zero", "sine")

#: finite-difference step for gradients of user-supplied gauge functions,
#: in units of the lattice constant
FD_STEP_FACTOR = 0.01


@dataclass(frozen=True)
class FluxSchedule:
    """q(t): number of flux quanta through the tube at parameter t."""

    q_final: float
    kind: str = "linear"

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def q(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear":
            val = self.q_final * t
        else:  # smoothstep
            val = self.q_final * (3.0 * t * t - 2.0 * t * t * t)
        return val if val.ndim else float(val)

    @property
    def q_bar(self) -> float:
        """max_t |q(t)| on [0, 1], by dense sampling."""
        grid = np.linspace(0.0, 1.0, 1001)
        return float(np.max(np.abs(self.q(grid))))

    @property
    def is_closed(self) -> bool:
        """True when q_final is an integer (flux returns to a quantum)."""
        return abs(self.q_final - round(self.q_final)) < 1e-12


@dataclass(frozen=True)
class GaugeFunction:
    """A smooth, l-periodic-in-x2 scalar F(x1, x2, t) with F(.,.,0) = 0.

    Built-in kinds: "zero" and "sine" (F = t*eps*sin(2 pi x2/l)*x1/L).
    A custom callable may be supplied; its gradient then falls back to
    central differences with step a/100.
    """

    geom: TubeGeometry
    kind: str = "zero"
    epsilon: float = 0.3
    custom: Callable[[float, float, float], float] | None = field(
        default=None, compare=False
    )

    def __post_init__(self) -> None:
        if self.custom is None and self.kind not in GAUGE_KINDS:
            raise ValueError(f"unknown gauge kind {self.kind!r}")

    def value(self, x1, x2, t):
        if self.custom is not None:
            return self.custom(x1, x2, t)
        if self.kind == "zero":
            return np.zeros_like(np.asarray(x1, dtype=float)) + 0.0
        L, l = self.geom.L, self.geom.l
        return t * self.epsilon * np.sin(2.0 * math.pi * np.asarray(x2) / l) * (
            np.asarray(x1) / L
        )

    def gradient(self, x1, x2, t):
        """(dF/dx1, dF/dx2); analytic for the built-in kinds."""
        if self.custom is not None:
            h = FD_STEP_FACTOR * self.geom.a
            d1 = (self.value(x1 + h, x2, t) - self.value(x1 - h, x2, t)) / (2 * h)
            d2 = (self.value(x1, x2 + h, t) - self.value(x1, x2 - h, t)) / (2 * h)
            return d1, d2
        if self.kind == "zero":
            z = np.zeros_like(np.asarray(x1, dtype=float))
            return z, z.copy()
        L, l = self.geom.L, self.geom.l
        w = 2.0 * math.pi / l
        d1 = t * self.epsilon * np.sin(w * np.asarray(x2)) / L
        d2 = t * self.epsilon * w * np.cos(w * np.asarray(x2)) * (np.asarray(x1) / L)
        return d1, d2


@dataclass(frozen=True)
class FluxExperiment:
    """Schedule + gauge on a fixed geometry; the potential is derived."""

    geom: TubeGeometry
    schedule: FluxSchedule
    gauge: GaugeFunction

    def a0_circ(self, t: float) -> float:
        """Constant circumferential component 2 pi q(t)/l."""
        return 2.0 * math.pi * float(self.schedule.q(t)) / self.geom.l

    def potential(self, x: tuple[float, float], t: float) -> tuple[float, float]:
        d1, d2 = self.gauge.gradient(x[0], x[1], t)
        return float(d1), float(self.a0_circ(t) + d2)


# spec-level aliases: the potential object IS the experiment
PotentialOnTube = FluxExperiment


def potential(experiment: FluxExperiment, x: tuple[float, float], t: float):
    return experiment.potential(x, t)


def bond_phase(
    experiment: FluxExperiment,
    x_from: tuple[float, float],
    delta: tuple[float, float],
    t: float,
) -> complex:
    """exp(-i * integral of <delta, A> along the straight bond).

    The A_0 part integrates to delta_2 * 2 pi q(t)/l exactly; the grad F
    part telescopes to F(x+delta) - F(x) by the gradient theorem.  The
    un-wrapped straight segment is used, which is consistent because F
    is l-periodic in x2 and A_0 is constant.
    """
    x1, x2 = x_from
    d1, d2 = delta
    line = d2 * experiment.a0_circ(t)
    f_to = experiment.gauge.value(x1 + d1, x2 + d2, t)
    f_from = experiment.gauge.value(x1, x2, t)
    return complex(np.exp(-1j * (line + (f_to - f_from))))


def gauge_unitary(experiment: FluxExperiment, t: float, lattice: Lattice) -> np.ndarray:
    """Diagonal of the multiplication operator exp(i F(x, t))."""
    x1 = lattice.positions[:, 0]
    x2 = lattice.positions[:, 1]
    return np.exp(1j * np.asarray(experiment.gauge.value(x1, x2, t), dtype=float))


def circumference_flux(
    experiment: FluxExperiment, x1: float, t: float, n_quad: int = 4096
) -> float:
    """Loop integral of A_2 around the circumference at fixed x1.

    Trapezoid rule on the periodic interval; should equal 2 pi q(t)
    independently of x1 and the gauge.
    """
    l = experiment.geom.l
    x2 = np.linspace(0.0, l, n_quad, endpoint=False)
    _, a2 = experiment.gauge.gradient(np.full_like(x2, x1), x2, t)
    integrand = experiment.a0_circ(t) + np.asarray(a2, dtype=float)
    return float(np.sum(integrand) * (l / n_quad))
