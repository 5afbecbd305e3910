"""The parametrized ellipsoid ``E(d, l) = {x : (A.T x - l).T D (A.T x - u) <= 0}``.

Equivalently ``E(d, l) = {x : (x - y).T B (x - y) <= f}`` with ``B = A D A.T``.
The state caches ``B^{-1}``, the center ``y``, the residual ``t = A.T y - r``
and the scale ``f`` so that single-coordinate changes of ``d`` or ``l`` cost
``O(mn + n^2)`` via Sherman-Morrison.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import numpy.typing as npt

from .errors import (
    MissingTau,
    NotPositiveVolume,
    PreconditionF,
    RepresentationMismatch,
    SingularShape,
)
from .problem import ProblemData

Array = npt.NDArray[np.float64]

PIVOT_RTOL = 1e-12
F_UNIT_TOL = 1e-8
REFRESH_EVERY = 50


@dataclass(frozen=True)
class EllipsoidState:
    problem: ProblemData
    d: Array
    l: Array
    r: Array
    v: Array
    Binv: Array
    y: Array
    t: Array
    f: float
    logdet_B: float
    n_updates: int = 0

    @property
    def m(self) -> int:
        return self.problem.m

    @property
    def n(self) -> int:
        return self.problem.n

    def violations(self) -> Array:
        return self.problem.A.T @ self.y - self.problem.u

    def vDv(self) -> float:
        return float(self.v @ (self.d * self.v))


def derive_state(p: ProblemData, d, l) -> EllipsoidState:
    """Compute every derived quantity from scratch."""
    d = np.array(d, dtype=np.float64)
    l = np.array(l, dtype=np.float64)
    if d.shape != (p.m,) or l.shape != (p.m,):
        raise ValueError("d and l must have length m")
    if np.any(d <= 0):
        raise ValueError("d must be strictly positive")
    A, u = p.A, p.u
    r = 0.5 * (u + l)
    v = 0.5 * (u - l)
    B = (A * d) @ A.T
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise SingularShape("A D A^T is not positive definite") from exc
    piv = np.diag(L) ** 2
    if piv.min() < PIVOT_RTOL * np.abs(np.diag(B)).max():
        raise SingularShape(f"pivot {piv.min():.3e} below relative tolerance")
    Linv = np.linalg.solve(L, np.eye(p.n))
    Binv = Linv.T @ Linv
    y = Binv @ (A @ (d * r))
    t = A.T @ y - r
    f = float(v @ (d * v) - t @ (d * t))
    logdet = float(2.0 * np.log(np.diag(L)).sum())
    return EllipsoidState(p, d, l, r, v, Binv, y, t, f, logdet, 0)


def refresh(s: EllipsoidState) -> EllipsoidState:
    return derive_state(s.problem, s.d, s.l)


def _maybe_refresh(s: EllipsoidState, every: int) -> EllipsoidState:
    if every and s.n_updates >= every:
        return refresh(s)
    return s


def gamma(s: EllipsoidState, i: int) -> float:
    """Half-width of the thinnest slab with normal ``a_i`` containing the ellipsoid."""
    if s.f <= 0:
        raise NotPositiveVolume(f"f = {s.f:.3e} <= 0")
    a = s.problem.A[:, i]
    return float(np.sqrt(s.f * (a @ s.Binv @ a)))


def gammas(s: EllipsoidState) -> Array:
    if s.f <= 0:
        raise NotPositiveVolume(f"f = {s.f:.3e} <= 0")
    A = s.problem.A
    q = np.einsum("ij,ij->j", A, s.Binv @ A)
    return np.sqrt(s.f * q)


def rescale_unit_f(s: EllipsoidState) -> EllipsoidState:
    """Replace ``d`` by ``d / f`` so that ``f = 1``; the ellipsoid is unchanged."""
    if s.f <= 0:
        raise NotPositiveVolume(f"cannot rescale with f = {s.f:.3e}")
    f = s.f
    if f == 1.0:
        return s
    return replace(
        s,
        d=s.d / f,
        Binv=s.Binv * f,
        f=1.0,
        logdet_B=s.logdet_B - s.n * np.log(f),
    )


def _shift_d(s: EllipsoidState, j: int, delta: float, refresh_every: int) -> EllipsoidState:
    # Sherman-Morrison; the closed forms hold for any f because A D t = 0.
    if delta == 0:
        return s
    A = s.problem.A
    a = A[:, j]
    g = s.Binv @ a
    q = float(a @ g)
    theta = delta / (1.0 + delta * q)
    tj = s.t[j]
    Binv = s.Binv - theta * np.outer(g, g)
    Binv = 0.5 * (Binv + Binv.T)
    d = s.d.copy()
    d[j] += delta
    out = replace(
        s,
        d=d,
        Binv=Binv,
        y=s.y - theta * tj * g,
        t=s.t - theta * tj * (A.T @ g),
        f=float(s.f + delta * s.v[j] ** 2 - theta * tj ** 2),
        logdet_B=s.logdet_B + float(np.log1p(delta * q)),
        n_updates=s.n_updates + 1,
    )
    return _maybe_refresh(out, refresh_every)


def shift_d(s: EllipsoidState, j: int, delta: float,
            refresh_every: int = REFRESH_EVERY) -> EllipsoidState:
    """State for ``d + delta * e_j``; requires ``f = 1``."""
    if abs(s.f - 1.0) > F_UNIT_TOL:
        raise PreconditionF(f"shift_d needs f = 1, got {s.f!r}")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return _shift_d(s, j, float(delta), refresh_every)


def shift_l(s: EllipsoidState, j: int, beta: float,
            refresh_every: int = REFRESH_EVERY) -> EllipsoidState:
    """State for ``l + beta * e_j``; valid for any ``beta`` and any ``f``."""
    beta = float(beta)
    if beta == 0:
        return s
    A = s.problem.A
    a = A[:, j]
    g = s.Binv @ a
    q = float(a @ g)
    dj = s.d[j]
    half = 0.5 * beta * dj
    l = s.l.copy()
    l[j] += beta
    r = s.r.copy()
    r[j] += 0.5 * beta
    v = s.v.copy()
    v[j] -= 0.5 * beta
    t = s.t + half * (A.T @ g)
    t[j] -= 0.5 * beta
    f = s.f + beta * (s.t[j] - s.v[j]) * dj + 0.25 * beta ** 2 * dj ** 2 * q
    out = replace(
        s, l=l, r=r, v=v, y=s.y + half * g, t=t, f=float(f),
        n_updates=s.n_updates + 1,
    )
    return _maybe_refresh(out, refresh_every)


def quadratic_forms(s: EllipsoidState, x) -> tuple[float, float]:
    """Both defining forms at ``x``; each is ``<= 0`` exactly on the ellipsoid."""
    x = np.asarray(x, dtype=np.float64)
    A = s.problem.A
    Ax = A.T @ x
    q1 = float((Ax - s.l) @ (s.d * (Ax - s.problem.u)))
    w = x - s.y
    Aw = A.T @ w
    q2 = float(Aw @ (s.d * Aw) - s.f)
    return q1, q2


def contains(s: EllipsoidState, x, tol: float = 1e-8) -> bool:
    """Membership with both representations cross-checked.

    Raises ``RepresentationMismatch`` when the two forms disagree by more
    than ``1e-8 * max(1, |f|)`` plus a rounding allowance proportional to the
    magnitude of the terms involved.
    """
    q1, q2 = quadratic_forms(s, x)
    x = np.asarray(x, dtype=np.float64)
    Ax = s.problem.A.T @ x
    mag = float(np.abs(Ax - s.l) @ (s.d * np.abs(Ax - s.problem.u)))
    band = 1e-8 * max(1.0, abs(s.f)) + 1e-12 * mag
    if abs(q1 - q2) > band:
        raise RepresentationMismatch(f"forms disagree: {q1!r} vs {q2!r}")
    return q2 <= tol * max(1.0, abs(s.f))


@dataclass(frozen=True)
class Metrics:
    rel_volume: float
    log_rel_volume: float
    phi: Optional[float] = None
    log_phi: Optional[float] = None
    mu: Optional[Array] = None


def log_rel_volume(s: EllipsoidState) -> float:
    if s.f <= 0:
        raise NotPositiveVolume(f"f = {s.f:.3e} <= 0")
    return 0.5 * s.n * np.log(s.f) - 0.5 * s.logdet_B


def mu_vector(s: EllipsoidState, tau: float) -> Array:
    if s.f <= 0:
        raise NotPositiveVolume(f"f = {s.f:.3e} <= 0")
    m = s.m
    return np.maximum(np.sqrt(s.f / s.d), m / (m + 1) * tau)


def metrics(s: EllipsoidState, tau: Optional[float] = None, want_phi: bool = False) -> Metrics:
    """Relative volume and, given ``tau``, the potential ``phi = prod(mu)``."""
    lv = log_rel_volume(s)
    if tau is None:
        if want_phi:
            raise MissingTau("phi needs tau")
        return Metrics(float(np.exp(lv)), float(lv))
    if tau <= 0:
        raise MissingTau("tau must be positive")
    mu = mu_vector(s, tau)
    log_phi = float(np.log(mu).sum())
    return Metrics(float(np.exp(lv)), float(lv), float(np.exp(log_phi)), log_phi, mu)
