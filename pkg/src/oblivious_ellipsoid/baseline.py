"""Classical central-cut ellipsoid method, used as a comparison baseline.

Two systems are handled. ``P`` is ``A.T x <= u`` itself. ``AltBall`` searches
``mu`` in the nullspace coordinates ``lam = Z mu`` for
``Z mu >= 0``, ``(Z.T u) @ mu <= -tol_strict`` and ``||mu|| <= 1``.
``run_seap`` interleaves the two, one iteration each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import numpy.typing as npt

from .certificates import TOL_STRICT, TypeLCertificate, verify_type_l
from .ellipsoid import derive_state
from .errors import NotACertificate, NumericalBreakdown, RankDeficient
from .problem import Instance, ProblemData
from .solver import FEASIBLE, ITER_LIMIT, TYPE_L, TAU_FLOOR, MAX_ITER_CAP, Outcome, SolverConfig

Array = npt.NDArray[np.float64]


@dataclass(frozen=True)
class NullspaceBasis:
    Z: Array

    @property
    def p(self) -> int:
        return self.Z.shape[1]


def orthonormal_nullspace(p: ProblemData) -> NullspaceBasis:
    """Orthonormal basis of ``{lam : A lam = 0}`` from a complete QR of ``A.T``.

    Each column is sign-normalized so that its first nonzero entry is positive.
    """
    A = p.A
    n, m = A.shape
    Q, R = np.linalg.qr(A.T, mode="complete")
    diag = np.abs(np.diag(R[:n, :n]))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise RankDeficient("A.T has deficient column rank")
    Z = Q[:, n:].copy()
    for c in range(Z.shape[1]):
        col = Z[:, c]
        nz = np.flatnonzero(np.abs(col) > 1e-14)
        if nz.size and col[nz[0]] < 0:
            Z[:, c] = -col
    return NullspaceBasis(Z)


@dataclass(frozen=True)
class StdEllipsoidState:
    """Ellipsoid ``{x : (x - c).T inv(G) (x - c) <= 1}`` with ``G = shape_inv``."""

    center: Array
    shape_inv: Array
    log_det: float

    @property
    def q(self) -> int:
        return self.center.shape[0]


def ball(center, radius: float) -> StdEllipsoidState:
    center = np.array(center, dtype=np.float64)
    q = center.shape[0]
    return StdEllipsoidState(center, radius ** 2 * np.eye(q), 2 * q * math.log(radius))


def central_cut(s: StdEllipsoidState, a: Array) -> StdEllipsoidState:
    """Minimum-volume ellipsoid containing ``s`` intersected with ``a.T x <= a.T c``."""
    q = s.q
    G = s.shape_inv
    Ga = G @ a
    aGa = float(a @ Ga)
    if not aGa > 0:
        raise NumericalBreakdown("shape matrix lost positive definiteness")
    b = Ga / math.sqrt(aGa)
    c = s.center - b / (q + 1)
    if q == 1:
        return StdEllipsoidState(c, G / 4.0, s.log_det + math.log(0.25))
    fac = q * q / (q * q - 1.0)
    Gn = fac * (G - (2.0 / (q + 1)) * np.outer(b, b))
    Gn = 0.5 * (Gn + Gn.T)
    log_det = s.log_det + q * math.log(fac) + math.log1p(-2.0 / (q + 1))
    return StdEllipsoidState(c, Gn, log_det)


def log_volume_decrease(q: int) -> float:
    """Guaranteed per-iteration decrease of ``log sqrt(det G)``."""
    return 1.0 / (2.0 * (q + 1))


# ----------------------------------------------------------- the two sides

@dataclass
class _Side:
    name: str
    state: StdEllipsoidState
    iterations: int = 0
    log_dets: list = field(default_factory=list)
    result: object = None
    max_iter: int = 1
    last: tuple = (None, 0.0)


def _cut(side: _Side, a: Array) -> None:
    try:
        side.state = central_cut(side.state, a)
    except NumericalBreakdown:
        # the ellipsoid has collapsed numerically; this side is exhausted
        side.max_iter = side.iterations
        return
    side.iterations += 1
    side.log_dets.append(side.state.log_det)


def _p_start(inst: Instance) -> StdEllipsoidState:
    # E(e, l) contains every solution and sits inside this ball
    p = inst.problem
    s = derive_state(p, np.ones(p.m), inst.bounds.l)
    lam_min = float(np.linalg.eigvalsh(p.A @ p.A.T).min())
    radius = float(np.linalg.norm(p.u - inst.bounds.l)) / (2.0 * math.sqrt(min(1.0, lam_min)))
    return ball(s.y, max(radius, 1e-12))


def _p_step(side: _Side, p: ProblemData, tol_feas: float) -> bool:
    x = side.state.center
    viol = p.A.T @ x - p.u
    j = int(np.argmax(viol))
    side.last = (j, float(viol[j]))
    if viol[j] <= tol_feas:
        side.result = x.copy()
        return True
    _cut(side, p.A[:, j])
    return False


def _alt_step(side: _Side, p: ProblemData, Z: Array, tol_strict: float) -> bool:
    mu = side.state.center
    zu = Z.T @ p.u
    # rows: -Z mu <= 0, zu.mu <= -tol_strict, mu.mu <= 1 (cut via the gradient)
    normals = [-Z[i] for i in range(Z.shape[0])] + [zu]
    rhs = [0.0] * Z.shape[0] + [-tol_strict]
    viol = np.array([(a @ mu - r) / max(np.linalg.norm(a), 1e-300)
                     for a, r in zip(normals, rhs)])
    nrm = float(np.linalg.norm(mu))
    ball_viol = nrm - 1.0
    j = int(np.argmax(viol))
    side.last = (j, float(max(viol[j], ball_viol)))
    if viol[j] <= 0 and ball_viol <= 0:
        side.result = Z @ mu
        return True
    if ball_viol > viol[j]:
        a = mu / nrm
    else:
        a = normals[j]
    _cut(side, a)
    return False


def _default_side_iters(q: int, radius: float) -> int:
    k = 2 * q * (q + 1) * math.log(max(radius, 1.0) / TAU_FLOOR) + 1
    return int(min(k, MAX_ITER_CAP))


def _make_sides(inst: Instance, cfg: SolverConfig):
    p = inst.problem
    P = _p_start(inst)
    basis = orthonormal_nullspace(p)
    Alt = ball(np.zeros(basis.p), 1.0)
    rP = math.exp(P.log_det / (2 * P.q))
    mi = cfg.max_iter
    sp = _Side("P", P, log_dets=[P.log_det], max_iter=mi or _default_side_iters(p.n, rP))
    sa = _Side("Alt", Alt, log_dets=[Alt.log_det],
               max_iter=mi or _default_side_iters(basis.p, 1.0))
    return sp, sa, basis.Z


def _alt_certificate(p: ProblemData, lam: Array) -> TypeLCertificate:
    rep = verify_type_l(p, lam)
    if not rep.passed:
        raise NotACertificate(f"Alt-side point fails verification: {rep.as_dict()}")
    return TypeLCertificate.from_vector(p, lam)


def run_std_ellipsoid(system: str, inst: Instance, cfg: SolverConfig = SolverConfig()) -> Outcome:
    """Run one side alone. ``system`` is ``"P"`` or ``"AltBall"``."""
    p = inst.problem
    sp, sa, Z = _make_sides(inst, cfg)
    if system == "P":
        side = sp
        step = lambda: _p_step(sp, p, cfg.tol_feas)  # noqa: E731
    elif system == "AltBall":
        side = sa
        step = lambda: _alt_step(sa, p, Z, TOL_STRICT)  # noqa: E731
    else:
        raise ValueError(f"unknown system {system!r}")
    while True:
        if step():
            break
        if side.iterations >= side.max_iter:
            return Outcome(ITER_LIMIT, side.iterations, side=side.name,
                           counters=_counters(sp, sa))
    if side is sp:
        return Outcome(FEASIBLE, sp.iterations, x=sp.result, side="P",
                       counters=_counters(sp, sa))
    return Outcome(TYPE_L, sa.iterations, certificate=_alt_certificate(p, sa.result),
                   side="Alt", counters=_counters(sp, sa))


def _counters(sp: _Side, sa: _Side) -> dict:
    return {"iterations_P": sp.iterations, "iterations_Alt": sa.iterations,
            "log_det_P": list(sp.log_dets), "log_det_Alt": list(sa.log_dets),
            "q_P": sp.state.q, "q_Alt": sa.state.q}


@dataclass(frozen=True)
class SeapTrace:
    """One sub-iteration; ``log_rel_volume`` is ``log sqrt(det G)``."""

    iter: int
    side: str
    log_rel_volume: float
    j: Optional[int]
    max_violation: float
    event: str
    f: Optional[float] = None
    phi: Optional[float] = None
    l_cert_updated: bool = False


def run_seap(inst: Instance, cfg: SolverConfig = SolverConfig()) -> Outcome:
    """Alternate one P iteration and one Alt iteration until either succeeds."""
    p = inst.problem
    sp, sa, Z = _make_sides(inst, cfg)
    trace = []
    while True:
        for side in (sp, sa):
            if side.iterations >= side.max_iter:
                continue
            done = _p_step(sp, p, cfg.tol_feas) if side is sp else _alt_step(sa, p, Z, TOL_STRICT)
            event = "none"
            if done:
                event = "feasible" if side is sp else "typeL"
            trace.append(SeapTrace(sp.iterations + sa.iterations, side.name,
                                   0.5 * side.state.log_det, side.last[0], side.last[1],
                                   event))
            if done:
                total = sp.iterations + sa.iterations
                c = _counters(sp, sa)
                if side is sp:
                    return Outcome(FEASIBLE, total, x=sp.result, trace=trace, side="P", counters=c)
                cert = _alt_certificate(p, sa.result)
                return Outcome(TYPE_L, total, certificate=cert, trace=trace, side="Alt", counters=c)
        if sp.iterations >= sp.max_iter and sa.iterations >= sa.max_iter:
            return Outcome(ITER_LIMIT, sp.iterations + sa.iterations, trace=trace,
                           counters=_counters(sp, sa))
