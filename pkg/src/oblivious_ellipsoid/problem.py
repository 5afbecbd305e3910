"""Problem data, certified lower bounds, box initialization and instance generators.

The system handled throughout the package is ``A.T @ x <= u`` with ``A`` of
shape ``(n, m)``; column ``a_j = A[:, j]`` is the normal of constraint ``j``.
Indices are 0-based everywhere in the code.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import numpy.typing as npt

from .errors import (
    AssumptionViolated,
    BadSpec,
    DimensionMismatch,
    ImmediateInfeasible,
    RankDeficient,
    RedundantConstraint,
    TooLarge,
    ZeroColumn,
)

Array = npt.NDArray[np.float64]

RANK_RTOL = 1e-10
ZERO_COLUMN_TOL = 1e-14


def _frozen(a) -> Array:
    # C order keeps BLAS reductions, and hence round-trips, reproducible
    arr = np.array(a, dtype=np.float64, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProblemData:
    """The pair ``(A, u)`` with unit-norm columns."""

    A: Array
    u: Array

    def __post_init__(self):
        object.__setattr__(self, "A", _frozen(self.A))
        object.__setattr__(self, "u", _frozen(self.u))
        if self.A.ndim != 2 or self.u.ndim != 1 or self.A.shape[1] != self.u.shape[0]:
            raise DimensionMismatch(
                f"A has shape {self.A.shape} but u has shape {self.u.shape}"
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def slacks(self, x: Array) -> Array:
        return self.u - self.A.T @ x

    def is_feasible(self, x: Array, tol: float = 1e-9) -> bool:
        return bool(np.all(self.A.T @ x <= self.u + tol))


@dataclass(frozen=True)
class BoxSystem:
    """``A_hat.T @ x <= u_hat`` together with ``lo <= x <= hi``."""

    A_hat: Array
    u_hat: Array
    lo: Array
    hi: Array

    def __post_init__(self):
        lo = _frozen(self.lo)
        hi = _frozen(self.hi)
        A_hat = np.array(self.A_hat, dtype=np.float64, order="C")
        if A_hat.size == 0:
            A_hat = np.zeros((lo.shape[0], 0))
        A_hat.setflags(write=False)
        object.__setattr__(self, "A_hat", A_hat)
        object.__setattr__(self, "u_hat", _frozen(np.atleast_1d(self.u_hat))
                           if np.size(self.u_hat) else _frozen(np.zeros(0)))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or A_hat.shape[0] != lo.shape[0] \
                or A_hat.shape[1] != self.u_hat.shape[0]:
            raise DimensionMismatch("inconsistent box system dimensions")
        if np.any(lo > hi):
            raise ValueError("box requires lo <= hi componentwise")

    @property
    def n(self) -> int:
        return self.lo.shape[0]

    @property
    def m_hat(self) -> int:
        return self.A_hat.shape[1]

    def box_max(self) -> Array:
        """Maximum of each ``a_hat_i.T @ x`` over the box."""
        pos = np.maximum(self.A_hat, 0.0)
        neg = np.maximum(-self.A_hat, 0.0)
        return pos.T @ self.hi - neg.T @ self.lo

    def box_min(self) -> Array:
        pos = np.maximum(self.A_hat, 0.0)
        neg = np.maximum(-self.A_hat, 0.0)
        return pos.T @ self.lo - neg.T @ self.hi


@dataclass(frozen=True)
class CertifiedBounds:
    """Lower bounds ``l`` with certificate matrix ``Lambda``.

    Column ``Lambda[:, i]`` proves ``a_i.T @ x >= l[i]`` on the feasible set via
    ``A @ Lambda = -A``, ``Lambda >= 0`` and ``-Lambda.T @ u >= l``.
    """

    l: Array
    Lambda: Array

    def __post_init__(self):
        object.__setattr__(self, "l", _frozen(self.l))
        object.__setattr__(self, "Lambda", _frozen(self.Lambda))
        m = self.l.shape[0]
        if self.Lambda.shape != (m, m):
            raise DimensionMismatch(
                f"Lambda has shape {self.Lambda.shape}, expected {(m, m)}"
            )


@dataclass(frozen=True)
class InstanceMeta:
    """Ground truth attached by generators; never read by the solvers."""

    tau: Optional[float] = None
    rho: Optional[float] = None
    feasible: Optional[bool] = None


@dataclass(frozen=True)
class Instance:
    problem: ProblemData
    bounds: CertifiedBounds
    d0: Array = None
    meta: InstanceMeta = field(default_factory=InstanceMeta)
    box: Optional[BoxSystem] = None

    def __post_init__(self):
        d0 = np.ones(self.problem.m) if self.d0 is None else self.d0
        object.__setattr__(self, "d0", _frozen(d0))
        if self.d0.shape != (self.problem.m,):
            raise DimensionMismatch("d0 must have length m")
        if np.any(self.d0 <= 0):
            raise ValueError("d0 must be strictly positive")
        if self.bounds.l.shape != (self.problem.m,):
            raise DimensionMismatch("bounds do not match the problem size")


def normalize_columns(A_raw, u_raw) -> ProblemData:
    """Scale every constraint so that its normal has unit Euclidean norm.

    Columns whose norm already equals one to within a few ulps are left
    untouched, which makes the operation idempotent bit for bit.
    """
    A = np.array(A_raw, dtype=np.float64)
    u = np.array(u_raw, dtype=np.float64)
    if A.ndim != 2 or u.ndim != 1 or A.shape[1] != u.shape[0]:
        raise DimensionMismatch(f"A has shape {A.shape} but u has shape {u.shape}")
    n, m = A.shape
    norms = np.linalg.norm(A, axis=0)
    for j in range(m):
        if norms[j] < ZERO_COLUMN_TOL:
            raise ZeroColumn(j)
    if m <= n:
        raise AssumptionViolated(f"need m > n, got m={m}, n={n}")
    scale = np.where(np.abs(norms - 1.0) <= 4 * np.finfo(float).eps, 1.0, norms)
    A = A / scale
    u = u / scale
    sv = np.linalg.svd(A, compute_uv=False)
    if sv.size < n or sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficient(f"numerical rank of A is below n={n}")
    return ProblemData(A, u)


def from_box(box: BoxSystem) -> tuple[ProblemData, CertifiedBounds]:
    """Rewrite a box-constrained system as ``A.T x <= u`` with certified bounds.

    ``A = [A_hat | I | -I]`` and ``u = [u_hat; hi; -lo]``. The general rows get
    the closed-form box minimum as lower bound, certified by the box rows; each
    box row is certified by its opposite box row.
    """
    n, mh = box.n, box.m_hat
    A_hat = np.array(box.A_hat)
    u_hat = np.array(box.u_hat)
    if mh:
        norms = np.linalg.norm(A_hat, axis=0)
        for i in range(mh):
            if norms[i] < ZERO_COLUMN_TOL:
                raise ZeroColumn(i)
        scale = np.where(np.abs(norms - 1.0) <= 4 * np.finfo(float).eps, 1.0, norms)
        A_hat = A_hat / scale
        u_hat = u_hat / scale
        box = BoxSystem(A_hat, u_hat, box.lo, box.hi)

    hi_val = box.box_max()
    for i in range(mh):
        if u_hat[i] > hi_val[i]:
            raise RedundantConstraint(i, float(u_hat[i]), float(hi_val[i]))

    m = mh + 2 * n
    eye = np.eye(n)
    A = np.hstack([A_hat, eye, -eye])
    u = np.concatenate([u_hat, box.hi, -box.lo])
    l = np.concatenate([box.box_min(), box.lo, -box.hi])

    Lam = np.zeros((m, m))
    Lam[mh:mh + n, :mh] = np.maximum(-A_hat, 0.0)
    Lam[mh + n:, :mh] = np.maximum(A_hat, 0.0)
    Lam[mh + n:, mh:mh + n] = eye
    Lam[mh:mh + n, mh + n:] = eye

    problem = normalize_columns(A, u)
    for i in range(mh):
        if l[i] > u[i]:
            lam_bar = Lam[:, i].copy()
            lam_bar[i] += 1.0
            raise ImmediateInfeasible(i, lam_bar, problem)
    return problem, CertifiedBounds(l, Lam)


@dataclass(frozen=True)
class BoundsReport:
    eq_residual: float
    min_entry: float
    min_slack: float
    tol: float

    @property
    def passed(self) -> bool:
        return (
            self.eq_residual <= self.tol
            and self.min_entry >= -self.tol
            and self.min_slack >= -self.tol
        )


def verify_certified_bounds(p: ProblemData, b: CertifiedBounds, tol: float = 1e-9) -> BoundsReport:
    """Residuals of the three lower-bound certificate conditions."""
    if b.Lambda.shape != (p.m, p.m) or b.l.shape != (p.m,):
        raise DimensionMismatch("bounds do not match the problem size")
    eq = float(np.max(np.abs(p.A @ b.Lambda + p.A)))
    min_entry = float(b.Lambda.min())
    min_slack = float(np.min(-b.Lambda.T @ p.u - b.l))
    return BoundsReport(eq, min_entry, min_slack, tol)


def estimate_tau(p: ProblemData, max_m: int = 12, max_n: int = 6,
                 reverse: bool = False) -> tuple[float, bool]:
    """Exact ``tau(A, u)`` by vertex enumeration of the epigraph LP.

    Solves ``max_{x,z} z  s.t.  a_i.T x + z <= u_i`` by trying every set of
    ``n + 1`` active constraints. Returns ``(abs(z*), z* >= 0)``.
    """
    n, m = p.n, p.m
    if m > max_m or n > max_n:
        raise TooLarge(f"enumeration oracle capped at m<={max_m}, n<={max_n}")
    M = np.hstack([p.A.T, np.ones((m, 1))])
    subsets = np.array(list(itertools.combinations(range(m), n + 1)))
    if reverse:
        subsets = subsets[::-1]
    mats = M[subsets]
    rhs = p.u[subsets]
    sv = np.linalg.svd(mats, compute_uv=False)
    ok = sv[:, -1] > 1e-10 * sv[:, 0]
    if not np.any(ok):
        raise AssumptionViolated("epigraph LP has no vertex")
    sols = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    resid = sols @ M.T - p.u  # (k, m)
    scale = 1.0 + np.abs(p.u).max() + np.abs(sols).max(axis=1)
    feas = np.all(resid <= 1e-9 * scale[:, None], axis=1)
    if not np.any(feas):
        raise AssumptionViolated("epigraph LP has no feasible vertex (unbounded?)")
    z = float(sols[feas, -1].max())
    return abs(z), z >= 0.0


# ---------------------------------------------------------------- generators

GENERATOR_KINDS = ("feasible-box", "infeasible-shifted", "random-cone")
ORACLE_MAX_M = 16
ORACLE_MAX_N = 6


def _unit(rng, n):
    while True:
        a = rng.standard_normal(n)
        nrm = np.linalg.norm(a)
        if nrm > 1e-3:
            return a / nrm


def _random_cuts(rng, lo, hi, x0, k, reach=(0.15, 0.85), toward=None, noise=0.5):
    """``k`` non-redundant cuts whose feasible side contains ``x0`` with margin.

    With ``toward`` (a unit vector) the normals are ``-toward`` plus Gaussian
    noise of scale ``noise``, so the cuts trim the box from that side.
    """
    n = lo.shape[0]
    cols, rhs = [], []
    for _ in range(k):
        if toward is None:
            a = _unit(rng, n)
        else:
            a = -toward + noise * rng.standard_normal(n)
            a /= np.linalg.norm(a)
        bmax = np.maximum(a, 0) @ hi - np.maximum(-a, 0) @ lo
        base = a @ x0
        s = rng.uniform(*reach)
        cols.append(a)
        rhs.append(base + s * (bmax - base))
    A_hat = np.array(cols).T if cols else np.zeros((n, 0))
    return A_hat, np.array(rhs)


def _with_tau(box: BoxSystem, feasible_hint=None) -> Instance:
    problem, bounds = from_box(box)
    tau = feasible = None
    if problem.m <= ORACLE_MAX_M and problem.n <= ORACLE_MAX_N:
        tau, feasible = estimate_tau(problem, max_m=ORACLE_MAX_M, max_n=ORACLE_MAX_N)
    if feasible is None:
        feasible = feasible_hint
    return Instance(problem, bounds, meta=InstanceMeta(tau=tau, feasible=feasible), box=box)


def gen_instance(kind: str, n: int, m_hat: int = 0, seed: int = 0, *,
                 gap: Optional[float] = None, pairs: int = 1, pad: bool = True,
                 half_width: float = 1.0) -> Instance:
    """Seeded instance generator with oracle ground truth in ``meta``.

    ``feasible-box``
        a random box plus ``m_hat`` cuts keeping an interior point feasible.
    ``infeasible-shifted``
        ``pairs`` opposing half-space pairs ``a.T x <= c - g/2``,
        ``-a.T x <= -c - g/2`` (so ``tau = g/2`` for one pair), padded with
        ``m_hat`` extra cuts and the box ``[-half_width, half_width]^n``.
        With ``pad=False`` only the pairs are emitted (``pairs`` must equal
        ``n``) and each constraint is certified by its partner with lower
        bound ``-half_width``.
    ``random-cone``
        ``m_hat`` random unit normals with random right-hand sides inside a box.
    """
    if kind not in GENERATOR_KINDS:
        raise BadSpec(f"unknown generator kind {kind!r}")
    if n < 1 or m_hat < 0:
        raise BadSpec("need n >= 1 and m_hat >= 0")
    rng = np.random.default_rng(seed)

    if kind == "feasible-box":
        center = rng.uniform(-1.0, 1.0, n)
        width = rng.uniform(1.0, 3.0, n)
        lo, hi = center - width / 2, center + width / 2
        # a point near a corner; cuts aimed at it tend to remove the box center
        side = rng.choice([-1.0, 1.0], n)
        x0 = center + side * rng.uniform(0.3, 0.45, n) * width
        toward = (x0 - center) / np.linalg.norm(x0 - center)
        A_hat, u_hat = _random_cuts(rng, lo, hi, x0, m_hat, reach=(0.01, 0.1), toward=toward)
        return _with_tau(BoxSystem(A_hat, u_hat, lo, hi), feasible_hint=True)

    if kind == "random-cone":
        lo, hi = -half_width * np.ones(n), half_width * np.ones(n)
        cols, rhs = [], []
        for _ in range(m_hat):
            a = _unit(rng, n)
            bmax = np.abs(a).sum() * half_width
            cols.append(a)
            rhs.append(rng.uniform(-0.9, 0.9) * bmax)
        A_hat = np.array(cols).T if cols else np.zeros((n, 0))
        return _with_tau(BoxSystem(A_hat, np.array(rhs), lo, hi))

    # infeasible-shifted
    if pairs < 1:
        raise BadSpec("need at least one opposing pair")
    gaps, normals, mids = [], [], []
    for k in range(pairs):
        g = gap if gap is not None else 2.0 * rng.uniform(0.05, 1.0)
        if g <= 0 or g > 2.0 * half_width:
            raise BadSpec("gap must lie in (0, 2*half_width]")
        a = np.ones(1) if n == 1 else _unit(rng, n)
        # keep both pair constraints inside the box range of a.x
        room = max(np.abs(a).sum() * half_width - g / 2, 0.0)
        c = 0.0 if n == 1 and gap is not None else 0.5 * room * rng.uniform(-1.0, 1.0)
        gaps.append(g)
        normals.append(a)
        mids.append(c)
    pair_cols, pair_rhs = [], []
    for a, c, g in zip(normals, mids, gaps):
        pair_cols += [a, -a]
        pair_rhs += [c - g / 2, -c - g / 2]

    if not pad:
        if pairs != n or m_hat:
            raise BadSpec("unpadded instances need pairs == n and m_hat == 0")
        problem = normalize_columns(np.array(pair_cols).T, np.array(pair_rhs))
        m = problem.m
        Lam = np.zeros((m, m))
        for k in range(pairs):
            Lam[2 * k + 1, 2 * k] = 1.0
            Lam[2 * k, 2 * k + 1] = 1.0
        l = -half_width * np.ones(m)
        if np.any(l > -Lam.T @ problem.u):
            raise BadSpec("half_width too small to certify the default bounds")
        tau, feasible = estimate_tau(problem, max_m=ORACLE_MAX_M, max_n=ORACLE_MAX_N)
        return Instance(problem, CertifiedBounds(l, Lam),
                        meta=InstanceMeta(tau=tau, feasible=feasible))

    lo, hi = -half_width * np.ones(n), half_width * np.ones(n)
    # a point on the first pair's mid-plane; cuts keep it feasible so that
    # tau equals half of the first gap whenever pairs == 1
    x0 = rng.uniform(-0.3, 0.3, n) * half_width
    x0 = x0 + (mids[0] - normals[0] @ x0) * normals[0]
    x0 = np.clip(x0, lo, hi)
    A_cut, u_cut = _random_cuts(rng, lo, hi, x0, m_hat)
    A_hat = np.hstack([np.array(pair_cols).T, A_cut])
    u_hat = np.concatenate([pair_rhs, u_cut])
    return _with_tau(BoxSystem(A_hat, u_hat, lo, hi), feasible_hint=False)
