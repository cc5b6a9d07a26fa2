"""Experiment runner.

Commands: spectrum | flow | dirac | convergence | tameness, each driven
by a JSON config (see ExperimentConfig).  All outputs are deterministic:
fixed float formatting (17 significant digits), stable orderings, no
timestamps.

Exit codes: 0 success, 2 infeasible config, 3 tameness failure,
4 convergence anomaly.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import basis, dirac, flux, hamiltonian, specflow
from .lattice import TubeGeometry, build_lattice

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_TAMENESS = 3
EXIT_CONVERGENCE = 4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    geom: TubeGeometry
    schedule: flux.FluxSchedule
    gauge_kind: str
    gauge_epsilon: float
    d: int | str            # integer or "auto"
    delta: float | str      # number or "auto"
    margin_target: float | None
    t_samples: int
    out_dir: str
    formats: tuple[str, ...]

    def resolved_delta(self) -> float:
        if self.delta == "auto":
            return hamiltonian.default_delta(self.geom)
        return float(self.delta)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)

    g = raw.get("geometry", {})
    m = int(g.get("M", 12))
    n = int(g.get("N", 18))
    a = g.get("a")
    if a is None:
        a = 1.0 / (3.0 * m)  # tube length L = 1
    try:
        geom = TubeGeometry(M=m, N=n, a=float(a))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    f = raw.get("flux", {})
    schedule = flux.FluxSchedule(
        q_final=float(f.get("q_final", 1)),
        kind=str(f.get("schedule", "linear")),
    )
    gauge = f.get("gauge", {})
    gauge_kind = str(gauge.get("kind", "zero"))
    gauge_epsilon = float(gauge.get("epsilon", 0.3))
    if gauge_kind not in flux.GAUGE_KINDS:
        raise ConfigError(f"unknown gauge kind {gauge_kind!r}")

    v = raw.get("valley", {})
    d = v.get("d", "auto")
    if d != "auto":
        d = int(d)
        q_bar = schedule.q_bar
        if not q_bar < d:
            raise ConfigError(f"infeasible valley radius: need q_bar < d, "
                              f"got q_bar={q_bar}, d={d}")
        if not d < geom.n_bar:
            raise ConfigError(f"infeasible valley radius: need d < n_bar = "
                              f"{geom.n_bar}, got d={d}")
    else:
        if math.floor(schedule.q_bar) + 1 >= geom.n_bar:
            raise ConfigError(
                f"no feasible valley radius: q_bar={schedule.q_bar} leaves no "
                f"integer d with q_bar < d < n_bar = {geom.n_bar}"
            )

    e = raw.get("engine", {})
    delta = e.get("delta", "auto")
    if delta != "auto":
        delta = float(delta)
        if delta <= 0:
            raise ConfigError("engine.delta must be positive")
    margin_target = e.get("margin_target")
    if margin_target is not None:
        margin_target = float(margin_target)
    t_samples = int(e.get("t_samples", 64))
    if t_samples < 2:
        raise ConfigError("engine.t_samples must be at least 2")

    o = raw.get("output", {})
    return ExperimentConfig(
        geom=geom,
        schedule=schedule,
        gauge_kind=gauge_kind,
        gauge_epsilon=gauge_epsilon,
        d=d,
        delta=delta,
        margin_target=margin_target,
        t_samples=t_samples,
        out_dir=str(o.get("directory", ".")),
        formats=tuple(o.get("formats", ("csv", "json"))),
    )


# ---------------------------------------------------------------- helpers

def _fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _json_value(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        return _fmt_float(v)
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_json_value(v)}"
                          for k, v in x.items())
        return "{" + items + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x)}")


def write_json(path: Path, payload: dict) -> None:
    path.write_text(_json_value(payload) + "\n", encoding="ascii")


def _experiment(config: ExperimentConfig) -> flux.FluxExperiment:
    gauge = flux.GaugeFunction(geom=config.geom, kind=config.gauge_kind,
                               epsilon=config.gauge_epsilon)
    return flux.FluxExperiment(geom=config.geom, schedule=config.schedule,
                               gauge=gauge)


def resolve_d(config: ExperimentConfig, lattice=None) -> int:
    """Pinned d, or the smallest integer > q_bar whose tameness passes."""
    if config.d != "auto":
        return int(config.d)
    if lattice is None:
        lattice = build_lattice(config.geom)
    q_bar = config.schedule.q_bar
    delta = config.resolved_delta()
    experiment = _experiment(config)
    family = _ht_family(lattice, experiment, config.t_samples)
    for d in range(math.floor(q_bar) + 1, config.geom.n_bar):
        ok = True
        for kind in ("L", "Lprime"):
            sub = basis.valley_projector(kind, d, lattice, q_bar=q_bar)
            p = specflow.SubspaceProjector.from_basis(sub.columns)
            if not specflow.certify_tameness(family, p, delta).passed:
                ok = False
                break
        if ok:
            return d
    raise ConfigError(
        f"auto d: no radius in ({q_bar}, {config.geom.n_bar}) passes tameness"
    )


def _ht_family(lattice, experiment, t_samples: int) -> specflow.HermitianFamily:
    return specflow.HermitianFamily(
        evaluator=lambda t: hamiltonian.build_ht(lattice, experiment, t).matrix,
        grid=np.linspace(0.0, 1.0, t_samples),
        name="graphene-Ht",
    )


# ---------------------------------------------------------------- commands

def cmd_spectrum(config: ExperimentConfig, out_dir: Path) -> int:
    lattice = build_lattice(config.geom)
    experiment = _experiment(config)
    d = resolve_d(config, lattice)
    q_bar = config.schedule.q_bar
    sub_l = basis.valley_projector("L", d, lattice, q_bar=q_bar)
    sub_lp = basis.valley_projector("Lprime", d, lattice, q_bar=q_bar)

    lines = ["t,eig_index,eigenvalue,weight_L,weight_Lprime"]
    for t in np.linspace(0.0, 1.0, config.t_samples):
        op = hamiltonian.build_ht(lattice, experiment, float(t))
        evals, evecs = np.linalg.eigh(op.dense)
        wl = np.sum(np.abs(sub_l.columns.conj().T @ evecs) ** 2, axis=0)
        wlp = np.sum(np.abs(sub_lp.columns.conj().T @ evecs) ** 2, axis=0)
        # rounding can push a full-weight state a few ulp past 1
        wl = np.clip(wl, 0.0, 1.0)
        wlp = np.clip(wlp, 0.0, 1.0)
        for i, lam in enumerate(evals):
            lines.append(
                f"{_fmt_float(t)},{i},{_fmt_float(lam)},"
                f"{_fmt_float(wl[i])},{_fmt_float(wlp[i])}"
            )
    (out_dir / "spectrum.csv").write_text("\n".join(lines) + "\n", encoding="ascii")
    return EXIT_OK


def compute_flows(config: ExperimentConfig, lattice=None) -> dict:
    """Partial flows along L, L', their joint complement, and the total.

    Returns a payload dict ready for serialization; raises TamenessError
    if any of the four subspaces fails certification.
    """
    if lattice is None:
        lattice = build_lattice(config.geom)
    experiment = _experiment(config)
    d = resolve_d(config, lattice)
    q_bar = config.schedule.q_bar
    delta = config.resolved_delta()
    family = _ht_family(lattice, experiment, config.t_samples)

    sub_l = basis.valley_projector("L", d, lattice, q_bar=q_bar)
    sub_lp = basis.valley_projector("Lprime", d, lattice, q_bar=q_bar)
    p_l = specflow.SubspaceProjector.from_basis(sub_l.columns)
    p_lp = specflow.SubspaceProjector.from_basis(sub_lp.columns)
    p_both = specflow.SubspaceProjector.from_basis(
        np.concatenate([sub_l.columns, sub_lp.columns], axis=1)
    )
    p_perp = p_both.complement()
    p_total = specflow.SubspaceProjector.identity(lattice.n_sites)

    plan = specflow.plan_partition(family, delta, config.margin_target)
    certs = {}
    for key, proj in (("L", p_l), ("Lprime", p_lp), ("perp", p_perp),
                      ("total", p_total)):
        certs[key] = specflow.partial_spectral_flow(family, proj, delta,
                                                    plan=plan)
    q_final = int(round(config.schedule.q_final))
    payload = {
        "q_final": q_final,
        "d": d,
        "delta": delta,
        "sf_total": certs["total"].flow,
        "sf_L": certs["L"].flow,
        "sf_Lprime": certs["Lprime"].flow,
        "sf_perp": certs["perp"].flow,
        "pairs_created": certs["Lprime"].flow,
        "certificates": {k: c.to_dict() for k, c in certs.items()},
    }
    expected = {
        "sf_total": 0, "sf_perp": 0,
        "sf_L": -q_final, "sf_Lprime": q_final,
    }
    mismatches = {k: payload[k] for k, v in expected.items() if payload[k] != v}
    if mismatches:
        raise RuntimeError(f"flow values contradict the expected pair-creation "
                           f"pattern: {mismatches}")
    return payload


def cmd_flow(config: ExperimentConfig, out_dir: Path) -> int:
    try:
        payload = compute_flows(config)
    except specflow.TamenessError as exc:
        write_json(out_dir / "flow.json", {
            "tameness_failed": True,
            "report": exc.report.to_dict(),
        })
        print(f"tameness failure: {exc}", file=sys.stderr)
        return EXIT_TAMENESS
    write_json(out_dir / "flow.json", payload)
    return EXIT_OK


def cmd_dirac(config: ExperimentConfig, out_dir: Path) -> int:
    if not config.schedule.is_closed:
        raise ConfigError("dirac flow needs an integer q_final")
    d = int(config.d) if config.d != "auto" else (
        int(round(abs(config.schedule.q_final))) + 2
    )
    geom = config.geom
    payload: dict = {"q_final": int(round(config.schedule.q_final)), "d": d}
    for valley, key in (("K", "K"), ("Kprime", "Kprime")):
        oracle = dirac.crossing_count_flow(valley, d, geom, config.schedule)
        engine = dirac.dirac_spectral_flow(valley, d, geom, config.schedule,
                                           method="engine",
                                           grid_samples=config.t_samples)
        payload[key] = {
            "oracle": oracle,
            "engine": engine,
            "agree": oracle == engine,
            "flow": engine,
        }
    write_json(out_dir / "dirac.json", payload)
    if not (payload["K"]["agree"] and payload["Kprime"]["agree"]):
        print("crossing-count oracle and engine disagree", file=sys.stderr)
        return 1
    return EXIT_OK


def cmd_convergence(config: ExperimentConfig, out_dir: Path,
                    levels: int = 3) -> int:
    if levels < 2:
        raise ConfigError("convergence needs at least 2 levels")
    base = config.geom
    length = base.L  # held fixed while a halves
    geoms = []
    for k in range(levels):
        m, n = base.M * 2 ** k, base.N * 2 ** k
        geoms.append(TubeGeometry(M=m, N=n, a=length / (3 * m)))
    d = int(config.d) if config.d != "auto" else (
        int(round(abs(config.schedule.q_final))) + 2
    )
    rows = dirac.convergence_check(d, config.schedule, geoms)

    lines = ["M,N,a,max_t_norm,ratio"]
    for r in rows:
        ratio = "" if r["ratio"] is None else _fmt_float(r["ratio"])
        lines.append(f"{r['M']},{r['N']},{_fmt_float(r['a'])},"
                     f"{_fmt_float(r['max_t_norm'])},{ratio}")
    (out_dir / "convergence.csv").write_text("\n".join(lines) + "\n",
                                             encoding="ascii")
    norms = [r["max_t_norm"] for r in rows]
    if any(b >= a for a, b in zip(norms, norms[1:])):
        print(f"convergence anomaly: norms not decreasing: {norms}",
              file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_tameness(config: ExperimentConfig, out_dir: Path) -> int:
    lattice = build_lattice(config.geom)
    experiment = _experiment(config)
    d = resolve_d(config, lattice)
    q_bar = config.schedule.q_bar
    delta = config.resolved_delta()
    family = _ht_family(lattice, experiment, config.t_samples)

    sub_l = basis.valley_projector("L", d, lattice, q_bar=q_bar)
    sub_lp = basis.valley_projector("Lprime", d, lattice, q_bar=q_bar)
    p_l = specflow.SubspaceProjector.from_basis(sub_l.columns)
    p_lp = specflow.SubspaceProjector.from_basis(sub_lp.columns)
    p_both = specflow.SubspaceProjector.from_basis(
        np.concatenate([sub_l.columns, sub_lp.columns], axis=1)
    )
    subspaces = {
        "L": p_l,
        "Lprime": p_lp,
        "LplusLprime": p_both,
        "L_complement": p_l.complement(),
        "Lprime_complement": p_lp.complement(),
        "LplusLprime_complement": p_both.complement(),
    }
    per_block_target = 1.0 / (4.0 * (4.0 * q_bar + 2.0))
    payload: dict = {
        "d": d, "delta": delta, "q_bar": q_bar,
        "bound": specflow.TAME_BOUND,
        "per_block_target": per_block_target,
        "subspaces": {},
    }
    all_pass = True
    for key, proj in subspaces.items():
        report = specflow.certify_tameness(family, proj, delta)
        all_pass = all_pass and report.passed
        payload["subspaces"][key] = {
            "passed": report.passed,
            "worst_epsilon": report.worst_epsilon,
            "meets_per_block_target": report.worst_epsilon < per_block_target,
            "n_projections": report.n_projections,
            "continuity_constant": report.continuity_constant,
        }
    write_json(out_dir / "tameness.json", payload)
    return EXIT_OK if all_pass else EXIT_TAMENESS


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sflab",
        description="Flux-threaded graphene tube: spectra and partial "
                    "spectral flows",
    )
    parser.add_argument("command",
                        choices=["spectrum", "flow", "dirac", "convergence",
                                 "tameness"])
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default=None,
                        help="output directory (default: config output.directory)")
    parser.add_argument("--levels", type=int, default=3,
                        help="geometry doublings for the convergence command")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"infeasible config: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    out_dir = Path(args.out if args.out is not None else config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "spectrum":
            return cmd_spectrum(config, out_dir)
        if args.command == "flow":
            return cmd_flow(config, out_dir)
        if args.command == "dirac":
            return cmd_dirac(config, out_dir)
        if args.command == "convergence":
            return cmd_convergence(config, out_dir, levels=args.levels)
        return cmd_tameness(config, out_dir)
    except ConfigError as exc:
        print(f"infeasible config: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
