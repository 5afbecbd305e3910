"""Lower-bound certificates, infeasibility certificates and their validators.

A *type-L* certificate is a vector ``lam >= 0`` with ``A @ lam = 0`` and
``u @ lam < 0``; it proves that ``A.T x <= u`` has no solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import numpy.typing as npt

from .ellipsoid import (
    F_UNIT_TOL,
    EllipsoidState,
    gamma,
    rescale_unit_f,
    shift_l,
)
from .errors import (
    DimensionMismatch,
    NotACertificate,
    NotPositiveVolume,
    NumericalBreakdown,
    PreconditionF,
    PreconditionTypeQ,
)
from .problem import CertifiedBounds, ProblemData

Array = npt.NDArray[np.float64]

TOL_STRICT = 1e-10


@dataclass(frozen=True)
class TypeLReport:
    eq_residual: float
    min_entry: float
    u_dot: float
    l1_norm: float
    tol: float
    tol_strict: float

    @property
    def passed(self) -> bool:
        return (
            self.eq_residual <= self.tol * max(1.0, self.l1_norm)
            and self.min_entry >= -self.tol
            and self.u_dot <= -self.tol_strict
        )

    def as_dict(self) -> dict:
        return {"eq": self.eq_residual, "min_entry": self.min_entry, "u_dot": self.u_dot}


@dataclass(frozen=True)
class TypeLCertificate:
    lambda_bar: Array
    residual_eq: float
    slack: float

    @classmethod
    def from_vector(cls, p: ProblemData, lam) -> "TypeLCertificate":
        lam = np.asarray(lam, dtype=np.float64)
        return cls(lam, float(np.abs(p.A @ lam).max()), float(-(p.u @ lam)))


@dataclass(frozen=True)
class BoundCertificate:
    i: int
    L_i: float
    lambda_tilde: Array
    lambda_hat: Array


def verify_type_l(p: ProblemData, lambda_bar, tol: float = 1e-8,
                  tol_strict: float = TOL_STRICT) -> TypeLReport:
    lam = np.asarray(lambda_bar, dtype=np.float64)
    if lam.shape != (p.m,):
        raise DimensionMismatch(f"certificate has shape {lam.shape}, expected ({p.m},)")
    return TypeLReport(
        eq_residual=float(np.abs(p.A @ lam).max()),
        min_entry=float(lam.min()),
        u_dot=float(p.u @ lam),
        l1_norm=float(np.abs(lam).sum()),
        tol=tol,
        tol_strict=tol_strict,
    )


def lambda_hat(s: EllipsoidState, i: int) -> tuple[Array, float, float]:
    """``(lam_hat_i, gamma_i, L_i)`` for a state with ``f = 1``.

    ``A @ lam_hat_i = -a_i`` by construction; ``lam_hat_i`` may have either sign.
    """
    g_i = gamma(s, i)
    a = s.problem.A[:, i]
    lam = g_i * (s.d * s.t) - s.d * (s.problem.A.T @ (s.Binv @ a))
    return lam, g_i, float(a @ s.y - g_i)


def lift(Lambda: Array, lam_hat: Array) -> Array:
    """Nonnegative certificate ``Lambda @ lam_hat^- + lam_hat^+``."""
    return Lambda @ np.maximum(-lam_hat, 0.0) + np.maximum(lam_hat, 0.0)


def certify_slab_bound(s: EllipsoidState, b: CertifiedBounds, i: int) -> BoundCertificate:
    """Certified lower bound ``L_i = a_i.T y - gamma_i`` for constraint ``i``."""
    if abs(s.f - 1.0) > F_UNIT_TOL:
        raise PreconditionF(f"certify_slab_bound needs f = 1, got {s.f!r}")
    lam, _, L = lambda_hat(s, i)
    return BoundCertificate(i, L, lift(b.Lambda, lam), lam)


def type_l_from_bound_violation(p: ProblemData, lambda_j, j: int,
                                tol: float = 1e-8) -> TypeLCertificate:
    """``lambda_j + e_j`` for a bound certificate whose bound exceeds ``u_j``."""
    lam = np.array(lambda_j, dtype=np.float64)
    if lam.shape != (p.m,):
        raise DimensionMismatch("lambda_j must have length m")
    lam[j] += 1.0
    rep = verify_type_l(p, lam, tol=tol)
    if not rep.passed:
        raise NotACertificate(
            f"lambda_{j} + e_{j} fails: eq={rep.eq_residual:.3e}, "
            f"min={rep.min_entry:.3e}, u_dot={rep.u_dot:.3e}"
        )
    return TypeLCertificate.from_vector(p, lam)


def verify_type_e(s: EllipsoidState, b: CertifiedBounds, j: int) -> bool:
    """True iff the whole ellipsoid lies strictly beyond constraint ``j``."""
    if s.f <= 0:
        raise NotPositiveVolume(f"f = {s.f:.3e} <= 0")
    a = s.problem.A[:, j]
    return bool(s.problem.u[j] < a @ s.y - gamma(s, j))


# ------------------------------------------------------------ type-Q -> type-L

@dataclass(frozen=True)
class TypeQShortcut:
    """The stored bounds already exceed ``u`` at index ``j``."""

    j: int


@dataclass(frozen=True)
class TypeQResult:
    """Index ``k`` and multiplier ``lam_hat`` with certified bound ``L_k > u_k``."""

    k: int
    lam_hat: Array
    L_k: float
    state: EllipsoidState
    beta: float
    eps: float
    i: int
    j: int


def _argmax_low(x: Array) -> int:
    return int(np.argmax(x))  # numpy returns the first maximal index


def _solve_eps(delta, c, s_gap, dj, qj, qk, f0):
    """Positive root of the squared form of ``h(eps) = delta / 2``.

    ``(delta/2 - eps c)^2 = qk (f0 + eps s_gap dj + eps^2 dj^2 qj / 4)``.
    Returns ``None`` when no admissible root exists.
    """
    a2 = c * c - 0.25 * qk * qj * dj * dj
    a2 = min(a2, 0.0)  # Cauchy-Schwarz; clears rounding noise
    a1 = -(delta * c + qk * s_gap * dj)
    a0 = 0.25 * delta * delta - qk * f0
    disc = a1 * a1 - 4.0 * a2 * a0
    den = -a1 + np.sqrt(max(disc, 0.0))
    if a0 <= 0 or den <= 0:
        return None
    eps = 2.0 * a0 / den
    if not np.isfinite(eps) or eps <= 0 or 0.5 * delta - eps * c < 0:
        return None
    return float(eps)


def type_q_steps(s: EllipsoidState, tol_f: float = 1e-12,
                 tol_feas: float = 0.0) -> Union[TypeQShortcut, TypeQResult]:
    """All steps of the type-Q to type-L construction that do not touch ``Lambda``."""
    p = s.problem
    A, u = p.A, p.u
    scale_f = tol_f * max(s.vDv(), np.finfo(float).tiny)
    viol = s.violations()
    if s.f > scale_f:
        raise PreconditionTypeQ(f"f = {s.f!r} is positive")
    if viol.max() <= tol_feas:
        raise PreconditionTypeQ("the center satisfies every constraint")

    excess = s.l - u
    if excess.max() > 0:
        return TypeQShortcut(_argmax_low(excess))

    # choose i and push l_i down until f = 0
    i = _argmax_low(viol)
    a_i = A[:, i]
    q_i = float(a_i @ s.Binv @ a_i)
    di = s.d[i]
    delta_i = float(viol[i])
    beta = (2 * delta_i + 2 * np.sqrt(max(delta_i ** 2 - s.f * q_i, 0.0))) / (di * q_i)
    s = shift_l(s, i, -beta)

    viol = s.violations()
    j = int(np.argmin(viol))
    if viol[j] > 1e-9 * (1.0 + np.abs(u).max()):
        raise NumericalBreakdown("no satisfied constraint after the f = 0 shift")
    k = _argmax_low(viol)
    delta = float(viol[k])
    if delta <= 0:
        raise NumericalBreakdown("no violated constraint after the f = 0 shift")

    a_j, a_k = A[:, j], A[:, k]
    g_j = s.Binv @ a_j
    qj = float(a_j @ g_j)
    qk = float(a_k @ s.Binv @ a_k)
    gkj = float(a_k @ g_j)
    dj = s.d[j]
    s_gap = max(-float(viol[j]), 0.0)
    c = 0.5 * dj * gkj
    f0 = s.f

    def h(e):
        fe = f0 + e * s_gap * dj + 0.25 * e * e * dj * dj * qj
        if fe <= 0:
            return fe, -np.inf
        return fe, delta - e * c - np.sqrt(fe * qk)

    eps = _solve_eps(delta, c, s_gap, dj, qj, qk, f0)
    if eps is None:
        # h stays above delta/2; any eps with f > 0 works
        eps = 1.0 / (dj * np.sqrt(qj))
    for _ in range(200):
        fe, he = h(eps)
        if fe > 0 and he > 0:
            break
        eps *= 0.5
    else:
        raise NumericalBreakdown("could not find eps with f > 0 and h > 0")

    s = shift_l(s, j, -eps)
    if s.f <= 0:
        raise NumericalBreakdown(f"f = {s.f!r} after the eps shift")
    s = rescale_unit_f(s)
    lam, _, L_k = lambda_hat(s, k)
    if not L_k > u[k]:
        raise NumericalBreakdown(f"certified bound {L_k!r} does not exceed u_k = {u[k]!r}")
    return TypeQResult(k, lam, L_k, s, float(beta), float(eps), i, j)


def procedure_1(s: EllipsoidState, b: CertifiedBounds, tol_f: float = 1e-12,
                tol_feas: float = 0.0) -> TypeLCertificate:
    """Turn a type-Q certificate (``f <= 0``, infeasible center) into a type-L one."""
    res = type_q_steps(s, tol_f=tol_f, tol_feas=tol_feas)
    p = s.problem
    if isinstance(res, TypeQShortcut):
        return type_l_from_bound_violation(p, b.Lambda[:, res.j], res.j)
    return type_l_from_bound_violation(p, lift(b.Lambda, res.lam_hat), res.k)
