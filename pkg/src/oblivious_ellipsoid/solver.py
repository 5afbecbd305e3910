"""The ellipsoid update procedure and the main oblivious ellipsoid loop.

One private driver, :func:`_run`, serves the full algorithm and both of its
memory variants so that they share control flow bit for bit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
import numpy.typing as npt

from .certificates import (
    TypeLCertificate,
    TypeQShortcut,
    lambda_hat,
    lift,
    procedure_1,
    type_l_from_bound_violation,
    type_q_steps,
)
from .ellipsoid import (
    REFRESH_EVERY,
    EllipsoidState,
    derive_state,
    gamma,
    log_rel_volume,
    mu_vector,
    rescale_unit_f,
    shift_d,
    shift_l,
)
from .errors import InvariantViolation, NumericalBreakdown, OEAError, PreconditionViolation
from .problem import CertifiedBounds, Instance, ProblemData, verify_certified_bounds

Array = npt.NDArray[np.float64]
log = logging.getLogger(__name__)

TAU_FLOOR = 1e-9
MAX_ITER_CAP = 10 ** 6
GAMMA_BAND = 1e-10

FEASIBLE = "feasible"
TYPE_L = "infeasible-type-l"
DECLARED = "infeasible-declared"
ITER_LIMIT = "iter-limit"

EXIT_CODES = {FEASIBLE: 0, TYPE_L: 1, DECLARED: 2, ITER_LIMIT: 3}


@dataclass(frozen=True)
class SolverConfig:
    tol_feas: float = 1e-9
    tol_f: float = 1e-12
    max_iter: Optional[int] = None
    trace_every: int = 1
    tau: Optional[float] = None
    debug: bool = False
    refresh_every: int = REFRESH_EVERY
    observer: Optional[Callable[["UpdateRecord"], None]] = None
    mm_cap: Optional[int] = None

    def __post_init__(self):
        if self.tol_feas <= 0 or self.tol_f <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")


def infeasible_bound(m: int, u_minus_l: float, tau: float) -> int:
    """Iteration bound for the infeasible case."""
    return math.floor(2 * m * (m + 1) * math.log((m + 1) * u_minus_l / (2 * m * tau)))


def feasible_box_bound(n: int, m: int, m_hat: int, box_diam: float, tau: float) -> int:
    """Iteration bound for a feasible system with box constraints."""
    return math.floor(2 * n * (m + 1) * math.log(math.sqrt(m_hat + 2) * box_diam / (2 * tau)))


def default_max_iter(m: int, u_minus_l: float) -> int:
    if u_minus_l <= 0:
        return 1
    k = infeasible_bound(m, u_minus_l, TAU_FLOOR)
    return int(min(max(k, 1), MAX_ITER_CAP))


@dataclass(frozen=True)
class IterationTrace:
    iter: int
    f: float
    log_rel_volume: Optional[float]
    phi: Optional[float]
    j: int
    max_violation: float
    l_cert_updated: bool
    event: str = "none"


@dataclass
class Outcome:
    kind: str
    iterations: int
    x: Optional[Array] = None
    certificate: Optional[TypeLCertificate] = None
    trace: list = field(default_factory=list)
    seq: object = None
    side: Optional[str] = None
    counters: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.kind]


@dataclass(frozen=True)
class UpdateRecord:
    """Instrumentation captured by one completed ellipsoid update."""

    iteration: int
    j: int
    before: EllipsoidState
    shifted: EllipsoidState  # (d1, l1): center on the hyperplane, f = 1
    after: EllipsoidState    # (d3, l2)
    f_shift: float           # f(d, l1) before rescaling
    f_d2_l2: float
    alpha: float
    alpha_spread: float
    l2_j: float
    max_l_L: float
    sqrt_f_over_dj: float
    bounds: Optional[CertifiedBounds] = None


# -------------------------------------------------------------- procedure 2

@dataclass(frozen=True)
class Updated:
    state: EllipsoidState
    record: UpdateRecord


@dataclass(frozen=True)
class FeasiblePoint:
    x: Array


@dataclass(frozen=True)
class TypeQ:
    """``f <= 0`` after the first shift; hand over to the type-Q construction."""

    state: EllipsoidState


def most_violated(s: EllipsoidState, p: Optional[ProblemData] = None) -> tuple[int, float]:
    viol = s.violations() if p is None else p.A.T @ s.y - p.u
    j = int(np.argmax(viol))
    return j, float(viol[j])


def _f_zero_band(s: EllipsoidState, tol_f: float) -> float:
    return tol_f * max(s.vDv(), np.finfo(float).tiny)


def _update(s: EllipsoidState, j: int, cfg: SolverConfig, iteration: int = 0,
            L_j: Optional[float] = None) -> Union[Updated, FeasiblePoint, TypeQ]:
    p = s.problem
    m = p.m
    if abs(s.f - 1.0) > 1e-8:
        raise PreconditionViolation(f"update needs f = 1, got {s.f!r}")
    viol = float(p.A[:, j] @ s.y - p.u[j])
    g = gamma(s, j)
    if not (0 < viol <= g + GAMMA_BAND):
        raise PreconditionViolation(f"violation {viol!r} outside (0, gamma_j = {g!r}]")
    if L_j is None:
        L_j = float(p.A[:, j] @ s.y - g)
    re = cfg.refresh_every

    beta1 = -2.0 * (s.t[j] - s.v[j]) / (s.d[j] * g * g)
    s1 = shift_l(s, j, beta1, re)
    if np.all(s1.violations() <= cfg.tol_feas):
        return FeasiblePoint(s1.y.copy())
    f1 = s1.f
    if f1 <= _f_zero_band(s1, cfg.tol_f):
        return TypeQ(s1)

    s1 = rescale_unit_f(s1)
    g1 = gamma(s1, j)
    beta2 = 2.0 * (2.0 * s1.v[j] - g1) / ((m - 1) * s1.d[j] * g1 * g1 + 2.0)
    delta = 2.0 / ((m - 1) * g1 * g1)
    s2 = shift_l(shift_d(s1, j, delta, re), j, beta2, re)
    f2 = s2.f
    s3 = rescale_unit_f(s2)

    target = s.d.copy()
    target[j] += 2.0 / ((m - 1) * g * g)
    ratios = s3.d / target
    rec = UpdateRecord(
        iteration=iteration,
        j=j,
        before=s,
        shifted=s1,
        after=s3,
        f_shift=f1,
        f_d2_l2=f2,
        alpha=float(ratios.mean()),
        alpha_spread=float(ratios.max() - ratios.min()),
        l2_j=float(s3.l[j]),
        max_l_L=float(max(s.l[j], L_j)),
        sqrt_f_over_dj=float(np.sqrt(s.f / s.d[j])),
    )
    if cfg.debug:
        _check_update(rec, m)
    return Updated(s3, rec)


def _check_update(rec: UpdateRecord, m: int) -> None:
    problems = []
    if abs(rec.f_d2_l2 - m * m / (m * m - 1.0)) > 1e-8:
        problems.append(f"f(d2,l2) = {rec.f_d2_l2!r}")
    if rec.alpha <= (m * m - 1.0) / (m * m) - 1e-12:
        problems.append(f"alpha = {rec.alpha!r}")
    if rec.l2_j > rec.max_l_L + 1e-10:
        problems.append(f"l2_j = {rec.l2_j!r} > {rec.max_l_L!r}")
    a = rec.before.problem.A[:, rec.j]
    if abs(a @ rec.shifted.y - rec.before.problem.u[rec.j]) > 1e-9:
        problems.append("shifted center is off the hyperplane")
    if problems:
        raise InvariantViolation("; ".join(problems))


def procedure_2(s: EllipsoidState, b: CertifiedBounds, j: int,
                cfg: SolverConfig = SolverConfig()):
    """One ellipsoid update for the violated constraint ``j``.

    Returns :class:`Updated`, :class:`FeasiblePoint` or a
    :class:`~oblivious_ellipsoid.certificates.TypeLCertificate` when the
    shifted ellipsoid collapses.
    """
    res = _update(s, j, cfg)
    if isinstance(res, TypeQ):
        return procedure_1(res.state, b, tol_f=cfg.tol_f, tol_feas=cfg.tol_feas)
    return res


# ------------------------------------------------------------------ driver

def _trace_row(s: EllipsoidState, it: int, j: int, vmax: float, tau, updated: bool,
               event: str) -> IterationTrace:
    lv = log_rel_volume(s) if s.f > 0 else None
    phi = None
    if tau is not None and s.f > 0:
        phi = float(np.prod(mu_vector(s, tau)))
    return IterationTrace(it, float(s.f), lv, phi, j, vmax, updated, event)


def _run(inst: Instance, cfg: SolverConfig, mode: str) -> Outcome:
    from .variants import CertIndexSeq, backsolve_type_l

    p = inst.problem
    m = p.m
    A, u = p.A, p.u
    Lam = np.array(inst.bounds.Lambda, dtype=np.float64)
    b0 = inst.bounds
    max_iter = cfg.max_iter or default_max_iter(m, float(np.linalg.norm(u - b0.l)))
    tau = cfg.tau
    seq = CertIndexSeq(b0.Lambda) if mode == "mm" else None
    mm_cap = cfg.mm_cap or MAX_ITER_CAP
    counters = {"iterations": 0, "shift_d": 0, "shift_l": 0, "rescale": 0,
                "lambda_products": 0, "stored_pairs": 0, "defensive_rescale": 0}
    trace: list[IterationTrace] = []
    s = derive_state(p, inst.d0, b0.l)

    def finish(kind, it, x=None, cert=None):
        return Outcome(kind, it, x=x, certificate=cert, trace=trace, seq=seq,
                       counters=counters)

    def certificate_for(j):
        if mode == "no-alt":
            return None
        if mode == "mm":
            if seq.degraded:
                return None
            if not seq.pairs:
                return type_l_from_bound_violation(p, b0.Lambda[:, j], j)
            return backsolve_type_l(seq, target=j, problem=p)
        return type_l_from_bound_violation(p, Lam[:, j], j)

    def infeasible(row_state, it, j_row, vmax, updated, j_cert):
        cert = certificate_for(j_cert)
        kind = DECLARED if cert is None else TYPE_L
        trace.append(_trace_row(row_state, it, j_row, vmax, tau, updated,
                                "declared" if cert is None else "typeL"))
        return finish(kind, it, cert=cert)

    def type_q(qstate, row_state, it, j_row, vmax, updated):
        res = type_q_steps(qstate, tol_f=cfg.tol_f, tol_feas=cfg.tol_feas)
        if isinstance(res, TypeQShortcut):
            return infeasible(row_state, it, j_row, vmax, updated, res.j)
        if mode == "full":
            Lam[:, res.k] = lift(Lam, res.lam_hat)
            counters["lambda_products"] += 1
        elif mode == "mm":
            seq.append(res.lam_hat, res.k, cap=mm_cap)
            counters["stored_pairs"] += 1
        return infeasible(row_state, it, j_row, vmax, updated, res.k)

    # certified bounds already above u: immediate certificate
    excess = b0.l - u
    if excess.max() > 0:
        j = int(np.argmax(excess))
        viol = s.violations()
        return infeasible(s, 0, int(np.argmax(viol)), float(viol.max()), False, j)

    it = 0
    while True:
        try:
            viol = s.violations()
            j = int(np.argmax(viol))
            vmax = float(viol[j])
            if vmax <= cfg.tol_feas:
                trace.append(_trace_row(s, it, j, vmax, tau, False, "feasible"))
                return finish(FEASIBLE, it, x=s.y.copy())
            if it == 0:
                if s.f <= _f_zero_band(s, cfg.tol_f):
                    return type_q(s, s, it, j, vmax, False)
                s = rescale_unit_f(s)
                counters["rescale"] += 1
            elif abs(s.f - 1.0) > 1e-8:
                if s.f <= 0:
                    raise NumericalBreakdown(f"f = {s.f!r} after a completed update")
                s = rescale_unit_f(s)
                counters["defensive_rescale"] += 1

            lam, g_j, L_j = lambda_hat(s, j)
            updated = False
            if s.l[j] < L_j:
                if mode == "full":
                    Lam[:, j] = lift(Lam, lam)
                    counters["lambda_products"] += 1
                    updated = True
                elif mode == "mm":
                    seq.append(lam, j, cap=mm_cap)
                    counters["stored_pairs"] += 1
                    updated = True
            if L_j > u[j] + GAMMA_BAND:
                return infeasible(s, it, j, vmax, updated, j)
            if it >= max_iter:
                trace.append(_trace_row(s, it, j, vmax, tau, updated, "none"))
                return finish(ITER_LIMIT, it)

            res = _update(s, j, cfg, iteration=it, L_j=L_j)
            counters["shift_l"] += 1
            if isinstance(res, FeasiblePoint):
                trace.append(_trace_row(s, it, j, vmax, tau, updated, "feasible"))
                return finish(FEASIBLE, it, x=res.x)
            if isinstance(res, TypeQ):
                return type_q(res.state, s, it, j, vmax, updated)
            counters["shift_d"] += 1
            counters["shift_l"] += 1
            counters["rescale"] += 2
            if it % max(cfg.trace_every, 1) == 0:
                trace.append(_trace_row(s, it, j, vmax, tau, updated, "none"))
            s = res.state
            it += 1
            counters["iterations"] = it
            if cfg.observer is not None:
                bounds = CertifiedBounds(s.l, Lam.copy()) if mode == "full" else None
                cfg.observer(replace(res.record, bounds=bounds))
            if cfg.debug and mode == "full":
                rep = verify_certified_bounds(p, CertifiedBounds(s.l, Lam), tol=1e-8)
                if not rep.passed:
                    raise InvariantViolation(f"(LB) fails after iteration {it}: {rep}")
        except OEAError as exc:
            if not getattr(exc, "_annotated", False):
                exc.args = (f"iteration {it}: {exc.args[0] if exc.args else exc}",)
                exc._annotated = True
            raise


def run_oea(inst: Instance, cfg: SolverConfig = SolverConfig()) -> Outcome:
    """Oblivious ellipsoid algorithm with explicit certificate matrix."""
    return _run(inst, cfg, "full")
