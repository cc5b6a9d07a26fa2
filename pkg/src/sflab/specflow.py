"""Partial spectral flow of Hermitian families.

The flow of a family t -> B_t along a subspace L is computed from a
partition 0 = t_0 < ... < t_{n+1} = 1 with fence levels gamma_j kept out
of the spectrum over segment j.  At each interior breakpoint the
eigenvectors of B_{t_j} between the adjacent fences span a small space
V_j; the number of positive eigenvalues of V^dagger (2 P_L - 1) V
(the positive inertia index) weights the fence move:

    flow = sum_j m_{j+} * sign(gamma_j - gamma_{j+1}).

Well-definedness needs tameness: spectral projections of B_t inside the
window (-delta, delta) must nearly commute with P_L (norm < 1/4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: tameness threshold from the flow definition
TAME_BOUND = 0.25

#: inertia eigenvalues below this magnitude mean the certificate is void
INERTIA_FLOOR = 0.4

#: relative tolerance for clustering near-degenerate eigenvalues when
#: enumerating spectral projections
CLUSTER_REL_TOL = 1e-6

DEFAULT_GRID_SAMPLES = 64
MAX_REFINE_DEPTH = 20


class TamenessError(RuntimeError):
    """Raised when a flow is requested for a family that fails tameness."""

    def __init__(self, report: "TamenessReport"):
        super().__init__(
            f"family not tame: worst commutator {report.worst_epsilon:.6g} >= {TAME_BOUND}"
        )
        self.report = report


class PlanningError(RuntimeError):
    pass


class InertiaError(RuntimeError):
    pass


class HermitianFamily:
    """A deterministic evaluator t -> Hermitian matrix, with caching.

    Eigenvalues are cached per t; eigenvectors are cached only for the
    spectral window requested (full eigenbases at hundreds of samples
    would not fit in memory at desk scale).
    """

    def __init__(self, evaluator, grid=None, name: str = "", herm_tol: float = 1e-12):
        self.evaluator = evaluator
        if grid is None:
            grid = np.linspace(0.0, 1.0, DEFAULT_GRID_SAMPLES + 1)
        grid = np.asarray(grid, dtype=float)
        if grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValueError("family grid must start at 0 and end at 1")
        self.grid = grid
        self.name = name
        self.herm_tol = herm_tol
        self._dim: int | None = None
        self._evals: dict[float, np.ndarray] = {}
        self._window: dict[tuple[float, float, float], tuple] = {}

    @property
    def dim(self) -> int:
        if self._dim is None:
            self._dim = self.matrix(0.0).shape[0]
        return self._dim

    def matrix(self, t: float) -> np.ndarray:
        m = np.asarray(self.evaluator(float(t)), dtype=complex)
        dev = np.max(np.abs(m - m.conj().T))
        scale = max(1.0, float(np.max(np.abs(m))))
        if dev > self.herm_tol * scale:
            raise ValueError(
                f"evaluator output not Hermitian at t={t}: deviation {dev:.3g}"
            )
        return 0.5 * (m + m.conj().T)

    def eigenvalues(self, t: float) -> np.ndarray:
        t = float(t)
        if t not in self._evals:
            self._evals[t] = np.linalg.eigvalsh(self.matrix(t))
        return self._evals[t]

    def window_eig(self, t: float, lo: float, hi: float):
        """(all eigenvalues, indices in (lo, hi), eigenvectors for them)."""
        t = float(t)
        key = (t, float(lo), float(hi))
        if key not in self._window:
            evals, evecs = np.linalg.eigh(self.matrix(t))
            self._evals[t] = evals
            idx = np.nonzero((evals > lo) & (evals < hi))[0]
            self._window[key] = (evals, idx, evecs[:, idx].copy())
        return self._window[key]


@dataclass(frozen=True)
class SubspaceProjector:
    """Orthogonal projector, stored both as a matrix and as a basis."""

    matrix: np.ndarray
    basis: np.ndarray  # orthonormal columns spanning the range
    rank: int

    @classmethod
    def from_matrix(cls, p: np.ndarray, tol: float = 1e-10) -> "SubspaceProjector":
        p = np.asarray(p, dtype=complex)
        if np.max(np.abs(p - p.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(p))):
            raise ValueError("projector is not Hermitian")
        if np.linalg.norm(p @ p - p, 2) > tol:
            raise ValueError("matrix is not idempotent within tolerance")
        evals, evecs = np.linalg.eigh(p)
        keep = evals > 0.5
        return cls(matrix=p, basis=evecs[:, keep].copy(), rank=int(np.sum(keep)))

    @classmethod
    def from_basis(cls, cols: np.ndarray) -> "SubspaceProjector":
        cols = np.asarray(cols, dtype=complex)
        gram = cols.conj().T @ cols
        if np.max(np.abs(gram - np.eye(cols.shape[1]))) > 1e-10:
            raise ValueError("basis columns are not orthonormal")
        return cls(matrix=cols @ cols.conj().T, basis=cols, rank=cols.shape[1])

    @classmethod
    def identity(cls, dim: int) -> "SubspaceProjector":
        eye = np.eye(dim, dtype=complex)
        return cls(matrix=eye, basis=eye, rank=dim)

    @classmethod
    def zero(cls, dim: int) -> "SubspaceProjector":
        return cls(
            matrix=np.zeros((dim, dim), dtype=complex),
            basis=np.zeros((dim, 0), dtype=complex),
            rank=0,
        )

    def complement(self) -> "SubspaceProjector":
        eye = np.eye(self.matrix.shape[0], dtype=complex)
        return SubspaceProjector.from_matrix(eye - self.matrix)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.conj().T @ v)


def commutator_norm(p: np.ndarray | SubspaceProjector,
                    q: np.ndarray | SubspaceProjector) -> float:
    """Spectral norm of PQ - QP."""
    pm = p.matrix if isinstance(p, SubspaceProjector) else np.asarray(p)
    qm = q.matrix if isinstance(q, SubspaceProjector) else np.asarray(q)
    if pm.shape != qm.shape:
        raise ValueError(f"dimension mismatch: {pm.shape} vs {qm.shape}")
    return float(np.linalg.norm(pm @ qm - qm @ pm, 2))


def _span_commutator_norm(p: SubspaceProjector, v: np.ndarray) -> float:
    """||[P, VV^dagger]|| for orthonormal columns V, without n x n products.

    For orthogonal projections P, E the commutator norm equals
    ||P E (1 - P)||; with E = VV^dagger that is the top singular value of
    (PV)((1-P)V)^dagger, computable from two thin QRs.
    """
    if v.shape[1] == 0:
        return 0.0
    pv = p.apply(v)
    x = pv
    y = v - pv
    rx = np.linalg.qr(x, mode="r")
    ry = np.linalg.qr(y, mode="r")
    s = np.linalg.svd(rx @ ry.conj().T, compute_uv=False)
    return float(s[0]) if s.size else 0.0


def _cluster_runs(values: np.ndarray, tol: float) -> list[tuple[int, int]]:
    """Split sorted values into clusters of near-degenerate entries;
    return (start, stop) index pairs, stop exclusive."""
    clusters = []
    start = 0
    for i in range(1, len(values)):
        if values[i] - values[i - 1] > tol:
            clusters.append((start, i))
            start = i
    if len(values):
        clusters.append((start, len(values)))
    return clusters


@dataclass
class TamenessReport:
    passed: bool
    worst_epsilon: float
    delta: float
    witness: dict | None
    n_projections: int
    continuity_constant: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_epsilon": self.worst_epsilon,
            "delta": self.delta,
            "n_projections": self.n_projections,
            "continuity_constant": self.continuity_constant,
            "witness": self.witness,
        }


def _norm_estimate(a: np.ndarray, iters: int = 60) -> float:
    """Spectral norm of a Hermitian matrix; power iteration at scale."""
    n = a.shape[0]
    if n <= 256:
        return float(np.linalg.norm(a, 2))
    rng = np.random.default_rng(7)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = a @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
    return lam


def certify_tameness(family: HermitianFamily, p: SubspaceProjector,
                     delta: float) -> TamenessReport:
    """Check ||[P, E(B_t, J)]|| < 1/4 over the family grid.

    Every spectral projection for an interval J inside (-delta, delta)
    is generated by a contiguous run of in-window eigenvalues, so runs
    are what gets enumerated.  Near-degenerate eigenvalues are clustered
    first: an interval cannot separate them, and their individual
    eigenvectors are numerically arbitrary.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    worst = 0.0
    witness = None
    n_proj = 0
    cont = 0.0
    prev_t = None
    prev_m = None
    for t in family.grid:
        evals, idx, vecs = family.window_eig(t, -delta, delta)
        diam = float(evals[-1] - evals[0]) if len(evals) else 1.0
        tol = CLUSTER_REL_TOL * max(diam, 1.0)
        clusters = _cluster_runs(evals[idx], tol)
        for ci in range(len(clusters)):
            for cj in range(ci, len(clusters)):
                lo = clusters[ci][0]
                hi = clusters[cj][1]
                eps = _span_commutator_norm(p, vecs[:, lo:hi])
                n_proj += 1
                if eps > worst:
                    worst = eps
                    witness = {
                        "t": float(t),
                        "eigenvalues": [float(x) for x in evals[idx][lo:hi]],
                        "epsilon": eps,
                    }
        m = family.matrix(t)
        if prev_m is not None:
            h = float(t) - prev_t
            if h > 0:
                cont = max(cont, _norm_estimate(m - prev_m) / h)
        prev_t, prev_m = float(t), m
    return TamenessReport(
        passed=worst < TAME_BOUND,
        worst_epsilon=worst,
        delta=float(delta),
        witness=witness,
        n_projections=n_proj,
        continuity_constant=cont,
    )


@dataclass
class PartitionPlan:
    breakpoints: list[float]      # t_0 = 0 < ... < t_{n+1} = 1
    fences: list[float]           # one per segment; first == last
    delta: float
    margin_target: float
    margin: float                 # min observed fence-to-spectrum distance

    @property
    def n_segments(self) -> int:
        return len(self.fences)

    def validate(self) -> None:
        if len(self.breakpoints) != len(self.fences) + 1:
            raise PlanningError("breakpoint/fence count mismatch")
        if self.breakpoints[0] != 0.0 or self.breakpoints[-1] != 1.0:
            raise PlanningError("plan must span [0, 1]")
        if any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
            raise PlanningError("breakpoints must be strictly increasing")
        if self.fences[0] != self.fences[-1] or self.fences[0] > 0:
            raise PlanningError("endpoint fences must be equal and <= 0")
        if any(not (-self.delta < g < self.delta) for g in self.fences):
            raise PlanningError("fences must lie inside the window")
        if not self.margin > 0:
            raise PlanningError("margin must be positive")


def _interval_ok(la: np.ndarray, lb: np.ndarray, gamma: float, margin: float) -> bool:
    """Fence gamma is safe over one sample interval: every (sorted-matched)
    eigenvalue clears it by more than both the margin and its own motion,
    so no curve can touch the fence between the samples."""
    ca = np.abs(la - gamma)
    cb = np.abs(lb - gamma)
    motion = np.abs(lb - la)
    return bool(np.all(np.minimum(ca, cb) > np.maximum(motion, margin)))


def _end_fence(ev0: np.ndarray, ev1: np.ndarray, delta: float, margin: float) -> float:
    both = np.concatenate([ev0, ev1])
    clear0 = float(np.min(np.abs(both))) if both.size else math.inf
    if clear0 > 2.0 * margin:
        return 0.0
    neg = both[(both < -2.0 * margin) & (both > -delta)]
    if neg.size:
        return float(np.max(neg)) / 2.0
    return -delta / 2.0


def _gap_midpoints(evals: np.ndarray, delta: float, margin: float) -> list[float]:
    """Candidate fences at one sample: midpoints of in-window gaps,
    ordered by width (descending), then proximity of the gap to 0."""
    w = np.sort(evals[(evals > -delta) & (evals < delta)])
    pts = [-delta, *[float(x) for x in w], delta]
    gaps = [
        (lo, hi)
        for lo, hi in zip(pts, pts[1:])
        if hi - lo > 2.0 * margin
    ]
    gaps.sort(key=lambda g: (-(g[1] - g[0]), abs((g[0] + g[1]) / 2.0), (g[0] + g[1]) / 2.0))
    return [(lo + hi) / 2.0 for lo, hi in gaps]


def plan_partition(family: HermitianFamily, delta: float,
                   margin_target: float | None = None) -> PartitionPlan:
    """Construct a valid partition-with-fences for the family.

    Greedy forward pass: keep the current fence while it is safe, and at
    each hand-off sample pick the candidate gap midpoint with maximal
    forward reach (ties: wider gap, then gap nearest 0).  The first and
    last segments use the endpoint fence gamma_end.  Sample intervals
    where no candidate works are bisected, up to depth 20.
    """
    ts = [float(t) for t in family.grid]
    if len(ts) < 2:
        raise PlanningError("need at least the two endpoint samples")
    depths = [0] * (len(ts) - 1)
    ev = {t: family.eigenvalues(t) for t in ts}

    all_vals = np.concatenate([ev[ts[0]], ev[ts[-1]]])
    diam = float(np.max(all_vals) - np.min(all_vals))
    if margin_target is None:
        margin_target = 1e-6 * max(diam, 1.0)
    gamma_end = _end_fence(ev[ts[0]], ev[ts[-1]], delta, margin_target)

    def reach(gamma: float, i0: int) -> int:
        j = i0
        while j + 1 < len(ts) and _interval_ok(
            ev[ts[j]], ev[ts[j + 1]], gamma, margin_target
        ):
            j += 1
        return j

    def refine(i: int) -> None:
        if depths[i] >= MAX_REFINE_DEPTH:
            raise PlanningError(
                f"refinement depth {MAX_REFINE_DEPTH} exceeded in "
                f"[{ts[i]}, {ts[i + 1]}]: spectral gap collapse near a fence"
            )
        mid = 0.5 * (ts[i] + ts[i + 1])
        ev[mid] = family.eigenvalues(mid)
        d = depths[i] + 1
        ts.insert(i + 1, mid)
        depths[i] = d
        depths.insert(i + 1, d)

    fences = [gamma_end]
    seg_breaks = [0.0]
    i0 = 0
    last = len(ts) - 1
    guard = 0
    while True:
        guard += 1
        if guard > 100000:
            raise PlanningError("planner failed to make progress")
        last = len(ts) - 1
        cur = fences[-1]
        r = reach(cur, i0)
        if r == last:
            if cur == gamma_end:
                break  # done: final segment already uses the endpoint fence
            # hand back to gamma_end at an interior sample in (i0, r)
            handed = False
            for j in range(i0 + 1, min(r + 1, last)):
                if reach(gamma_end, j) == last:
                    seg_breaks.append(ts[j])
                    fences.append(gamma_end)
                    handed = True
                    break
            if handed:
                break
            refine(last - 1)
            continue
        if r == i0:
            refine(i0)
            continue
        # hand off at sample r: next fence must be valid from r onward
        cands = _gap_midpoints(ev[ts[r]], delta, margin_target)
        if gamma_end not in cands:
            cands.append(gamma_end)
        best, best_reach = None, r
        for g in cands:
            rr = reach(g, r)
            if rr == last and g == gamma_end:
                best, best_reach = g, rr  # finishing fence always preferred
                break
            if rr > best_reach:
                best, best_reach = g, rr
        if best is None:
            refine(r)
            continue
        seg_breaks.append(ts[r])
        fences.append(best)
        i0 = r

    seg_breaks.append(1.0)

    # observed margin: min fence clearance over each segment's samples
    margin = math.inf
    for s, gamma in enumerate(fences):
        lo, hi = seg_breaks[s], seg_breaks[s + 1]
        for t in ts:
            if lo <= t <= hi:
                margin = min(margin, float(np.min(np.abs(ev[t] - gamma))))
    plan = PartitionPlan(
        breakpoints=seg_breaks,
        fences=fences,
        delta=float(delta),
        margin_target=float(margin_target),
        margin=float(margin),
    )
    plan.validate()
    return plan


def eigenspace_span(b: np.ndarray, gamma_lo: float, gamma_hi: float,
                    margin: float = 0.0) -> np.ndarray:
    """Orthonormal basis of the eigenvectors with eigenvalues strictly
    between the two fences (either order); may be empty."""
    evals, evecs = np.linalg.eigh(np.asarray(b, dtype=complex))
    lo, hi = sorted((gamma_lo, gamma_hi))
    for gamma in (gamma_lo, gamma_hi):
        close = np.abs(evals - gamma)
        if margin > 0 and np.any(close < margin):
            bad = float(evals[int(np.argmin(close))])
            raise PlanningError(
                f"eigenvalue {bad:.12g} within margin {margin:.3g} of fence {gamma:.12g}"
            )
    sel = (evals > lo) & (evals < hi)
    return evecs[:, sel].copy()


def inertia_along(v: np.ndarray, p: SubspaceProjector) -> tuple[int, int, float]:
    """Inertia of the form (u, (2 P - 1) u) restricted to span(V).

    Returns (m_plus, m_minus, min |eigenvalue|).  The form must be
    nonsingular with a real margin for the count to certify anything;
    below INERTIA_FLOOR the tameness assumption is effectively violated.
    """
    k = v.shape[1]
    if k == 0:
        return 0, 0, math.inf
    gram = v.conj().T @ v
    if np.max(np.abs(gram - np.eye(k))) > 1e-10:
        raise ValueError("V columns are not orthonormal")
    pv = p.apply(v)
    c = 2.0 * (v.conj().T @ pv) - np.eye(k)
    w = np.linalg.eigvalsh(0.5 * (c + c.conj().T))
    min_abs = float(np.min(np.abs(w)))
    if min_abs < INERTIA_FLOOR:
        raise InertiaError(
            f"inertia margin violated: |eigenvalue| = {min_abs:.6g} < {INERTIA_FLOOR}"
        )
    m_plus = int(np.sum(w > 0.0))
    return m_plus, k - m_plus, min_abs


def dim_along(v: np.ndarray, p: SubspaceProjector) -> int:
    """Dimension of span(V) along the subspace of P (positive inertia)."""
    return inertia_along(v, p)[0]


@dataclass
class SegmentRecord:
    t_lo: float
    t_hi: float
    gamma_lo: float
    gamma_hi: float
    dim_v: int
    m_plus: int
    epsilon: float
    inertia_margin: float

    def to_dict(self) -> dict:
        return {
            "t_lo": self.t_lo,
            "t_hi": self.t_hi,
            "gamma_lo": self.gamma_lo,
            "gamma_hi": self.gamma_hi,
            "dim_V": self.dim_v,
            "m_plus": self.m_plus,
            "epsilon": self.epsilon,
            "inertia_margin": self.inertia_margin,
        }


@dataclass
class FlowCertificate:
    flow: int
    segments: list[SegmentRecord]
    tameness: TamenessReport
    plan: PartitionPlan

    def to_dict(self) -> dict:
        return {
            "flow": self.flow,
            "segments": [s.to_dict() for s in self.segments],
            "tameness": {
                "delta": self.tameness.delta,
                "worst_epsilon": self.tameness.worst_epsilon,
            },
        }


def partial_spectral_flow(family: HermitianFamily, p: SubspaceProjector,
                          delta: float, margin_target: float | None = None,
                          plan: PartitionPlan | None = None,
                          tameness: TamenessReport | None = None) -> FlowCertificate:
    """Flow of the family along the subspace of P inside (-delta, delta)."""
    if tameness is None:
        tameness = certify_tameness(family, p, delta)
    if not tameness.passed:
        raise TamenessError(tameness)
    if plan is None:
        plan = plan_partition(family, delta, margin_target)
    else:
        plan.validate()

    records = []
    flow = 0
    for b in range(1, plan.n_segments):
        g_lo = plan.fences[b - 1]
        g_hi = plan.fences[b]
        t_b = plan.breakpoints[b]
        if g_lo == g_hi:
            records.append(SegmentRecord(plan.breakpoints[b - 1], t_b, g_lo, g_hi,
                                         0, 0, 0.0, math.inf))
            continue
        lo, hi = sorted((g_lo, g_hi))
        evals, idx, vecs = family.window_eig(t_b, -plan.delta, plan.delta)
        for gamma in (g_lo, g_hi):
            close = float(np.min(np.abs(evals - gamma)))
            if close < plan.margin_target:
                raise PlanningError(
                    f"eigenvalue within margin of fence {gamma:.12g} at t={t_b}"
                )
        win = evals[idx]
        sel = (win > lo) & (win < hi)
        v = vecs[:, sel]
        m_plus, _, min_abs = inertia_along(v, p)
        eps = _span_commutator_norm(p, v)
        flow += m_plus * int(np.sign(g_lo - g_hi))
        records.append(SegmentRecord(plan.breakpoints[b - 1], t_b, g_lo, g_hi,
                                     v.shape[1], m_plus, eps, min_abs))
    return FlowCertificate(flow=flow, segments=records, tameness=tameness, plan=plan)


def spectral_flow(family: HermitianFamily, delta: float,
                  margin_target: float | None = None,
                  plan: PartitionPlan | None = None) -> int:
    """Ordinary spectral flow: the partial flow along the whole space."""
    p = SubspaceProjector.identity(family.dim)
    return partial_spectral_flow(family, p, delta, margin_target, plan).flow


def refine_plan(plan: PartitionPlan, family: HermitianFamily) -> PartitionPlan:
    """Split every segment at its midpoint, keeping its fence.

    Used to confirm partition independence: the refined plan is a valid
    plan for the same family and must give the same flow.
    """
    breaks = [plan.breakpoints[0]]
    fences = []
    for s, gamma in enumerate(plan.fences):
        lo, hi = plan.breakpoints[s], plan.breakpoints[s + 1]
        mid = 0.5 * (lo + hi)
        breaks.extend([mid, hi])
        fences.extend([gamma, gamma])
    refined = PartitionPlan(
        breakpoints=breaks,
        fences=fences,
        delta=plan.delta,
        margin_target=plan.margin_target,
        margin=plan.margin,
    )
    refined.validate()
    return refined
