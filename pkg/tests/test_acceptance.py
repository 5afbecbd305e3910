"""Acceptance suite: one PASS/FAIL line per criterion.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``. Every quantity checked here is
recomputed from dense linear algebra rather than read back from the solver
where that is possible.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from oracles import dense_state, random_problem, rel_err  # noqa: E402

from oblivious_ellipsoid import (  # noqa: E402
    CertIndexSeq,
    SolverConfig,
    derive_state,
    estimate_tau,
    feasible_box_bound,
    gen_instance,
    infeasible_bound,
    normalize_columns,
    replay_lambda,
    run_oea,
    run_oea_mm,
    run_oea_no_alt,
    verify_certified_bounds,
    verify_type_l,
)
from oblivious_ellipsoid.baseline import run_seap  # noqa: E402
from oblivious_ellipsoid.bench import SweepConfig, run_sweep, summary_table  # noqa: E402
from oblivious_ellipsoid.ellipsoid import rescale_unit_f, shift_d, shift_l  # noqa: E402
from oblivious_ellipsoid.solver import FEASIBLE, TYPE_L  # noqa: E402
from oblivious_ellipsoid.variants import backsolve_vector  # noqa: E402

SUITE_SIZE = 50
CONTRACTION_SLACK = 1e-10
MC_POINTS = 1000
RESULTS: dict[int, str] = {}


def record(k: int, ok: bool, text: str) -> None:
    RESULTS[k] = f"{'PASS' if ok else 'FAIL'}  criterion {k:>2}: {text}"
    print(RESULTS[k])


# ------------------------------------------------------------------ suites

def feasible_cell(i: int):
    return "feasible-box", 2 + i % 4, i % 5, 1000 + i


def infeasible_cell(i: int):
    return "infeasible-shifted", 1 + i % 4, i % 5, 2000 + i


@dataclass
class Run:
    inst: object
    out: object
    records: list = field(default_factory=list)
    seconds: float = 0.0


def _run_suite(cell):
    runs = []
    for i in range(SUITE_SIZE):
        inst = gen_instance(*cell(i))
        recs = []
        t0 = time.perf_counter()
        out = run_oea(inst, SolverConfig(observer=recs.append))
        runs.append(Run(inst, out, recs, time.perf_counter() - t0))
    return runs


@lru_cache(maxsize=None)
def feasible_suite():
    return _run_suite(feasible_cell)


@lru_cache(maxsize=None)
def infeasible_suite():
    return _run_suite(infeasible_cell)


def all_records():
    for run in feasible_suite() + infeasible_suite():
        for rec in run.records:
            yield run, rec


# ----------------------------------------------------------- dense helpers

def dense(s):
    """``(y, t, f, B)`` for a state, recomputed from ``(d, l)``."""
    return dense_state(s.problem.A, s.problem.u, s.d, s.l)


def dense_log_volume(s) -> float:
    _, _, f, B = dense(s)
    return 0.5 * s.n * math.log(f) - 0.5 * np.linalg.slogdet(B)[1]


def dense_gamma(s, j) -> float:
    _, _, f, B = dense(s)
    a = s.problem.A[:, j]
    return math.sqrt(f * a @ np.linalg.solve(B, a))


def dense_log_phi(s, tau) -> float:
    _, _, f, _ = dense(s)
    m = s.m
    return float(np.log(np.maximum(np.sqrt(f / s.d), m / (m + 1) * tau)).sum())


def contraction_limit(m: int) -> float:
    return math.exp(-1.0 / (2 * (m + 1))) + CONTRACTION_SLACK


# ---------------------------------------------------------------- criteria

def test_criterion_1_feasible_suite():
    runs = feasible_suite()
    bad = []
    for r in runs:
        p, box = r.inst.problem, r.inst.box
        tau, feas = estimate_tau(p, max_m=16)
        bound = feasible_box_bound(p.n, p.m, box.m_hat, float(np.linalg.norm(box.hi - box.lo)),
                                   tau)
        ok = (feas and r.out.kind == FEASIBLE and p.is_feasible(r.out.x, tol=1e-9)
              and r.out.iterations <= bound)
        if not ok:
            bad.append((r.inst.meta, r.out.kind, r.out.iterations, bound))
    secs = sum(r.seconds for r in runs)
    ok = not bad and secs < 10.0
    record(1, ok, f"{len(runs) - len(bad)}/{len(runs)} feasible boxes solved and verified "
                  f"within the box bound; max iterations {max(r.out.iterations for r in runs)}; "
                  f"{secs:.2f} s")
    assert ok, bad


def test_criterion_2_infeasible_suite():
    runs = infeasible_suite()
    bad, taus = [], []
    for r in runs:
        p, b = r.inst.problem, r.inst.bounds
        tau, feas = estimate_tau(p, max_m=16)
        taus.append(tau)
        bound = infeasible_bound(p.m, float(np.linalg.norm(p.u - b.l)), tau)
        ok = (not feas and 0.05 <= tau <= 1.0 and r.out.kind == TYPE_L
              and verify_type_l(p, r.out.certificate.lambda_bar, tol=1e-8).passed
              and r.out.iterations <= bound)
        if not ok:
            bad.append((r.inst.meta, r.out.kind, r.out.iterations, bound))
    secs = sum(r.seconds for r in runs)
    ok = not bad and secs < 30.0
    record(2, ok, f"{len(runs) - len(bad)}/{len(runs)} infeasible instances "
                  f"(tau in [{min(taus):.3f}, {max(taus):.3f}]) certified within the bound; "
                  f"max iterations {max(r.out.iterations for r in runs)}; {secs:.2f} s")
    assert ok, bad


def test_criterion_3_volume_contraction():
    count, worst, viol = 0, 0.0, 0
    for _, rec in all_records():
        m = rec.before.m
        ratio = math.exp(dense_log_volume(rec.after) - dense_log_volume(rec.before))
        worst = max(worst, ratio / math.exp(-1.0 / (2 * (m + 1))))
        viol += ratio > contraction_limit(m)
        count += 1
    ok = count > 0 and viol == 0
    record(3, ok, f"{count} updates, {viol} volume-ratio violations; "
                  f"worst ratio / bound = {worst:.6f}")
    assert ok


def test_criterion_4_potential_contraction():
    checked, viol, worst = 0, 0, 0.0
    for run in infeasible_suite():
        tau = run.inst.meta.tau
        for rec in run.records:
            j = rec.j
            _, _, f, _ = dense(rec.before)
            if math.sqrt(f / rec.before.d[j]) < tau:
                continue
            m = rec.before.m
            ratio = math.exp(dense_log_phi(rec.after, tau) - dense_log_phi(rec.before, tau))
            worst = max(worst, ratio / math.exp(-1.0 / (2 * (m + 1))))
            viol += ratio > contraction_limit(m)
            checked += 1
    ok = checked > 0 and viol == 0
    record(4, ok, f"{checked} updates met the hypothesis, {viol} potential violations; "
                  f"worst ratio / bound = {worst:.6f}")
    assert ok


def test_criterion_5_update_identity():
    count, worst_f, worst_alpha, bad = 0, 0.0, math.inf, 0
    for _, rec in all_records():
        m, j = rec.before.m, rec.j
        # rebuild d2 from the shifted state and evaluate f(d2, l2) densely
        delta = 2.0 / ((m - 1) * dense_gamma(rec.shifted, j) ** 2)
        d2 = rec.shifted.d.copy()
        d2[j] += delta
        _, _, f2, _ = dense_state(rec.after.problem.A, rec.after.problem.u, d2, rec.after.l)
        target = m * m / (m * m - 1.0)
        d_ref = rec.before.d.copy()
        d_ref[j] += 2.0 / ((m - 1) * dense_gamma(rec.before, j) ** 2)
        alpha = rec.after.d / d_ref
        err = max(abs(f2 - target), abs(rec.f_d2_l2 - target))
        worst_f = max(worst_f, err)
        worst_alpha = min(worst_alpha, alpha.min() - (m * m - 1.0) / (m * m))
        bad += (err > 1e-8 or alpha.min() <= (m * m - 1.0) / (m * m) - 1e-12
                or alpha.max() - alpha.min() > 1e-8 * alpha.max())
        count += 1
    ok = count > 0 and bad == 0
    record(5, ok, f"{count} updates; max |f(d2,l2) - m^2/(m^2-1)| = {worst_f:.2e}; "
                  f"min alpha margin = {worst_alpha:.3e}")
    assert ok


def test_criterion_6_update_formulas():
    rng = np.random.default_rng(6)
    worst, trials = 0.0, 0
    while trials < 1000:
        n = int(rng.integers(1, 6))
        m = n + int(rng.integers(1, 6))
        A, u = random_problem(rng, n, m)
        p = normalize_columns(A, u)
        s = derive_state(p, np.exp(rng.uniform(-1.5, 1.5, m)), u - rng.uniform(0.2, 3.0, m))
        j = int(rng.integers(m))
        if trials % 2 == 0:
            if s.f <= 0:
                continue
            s = rescale_unit_f(s)
            new = shift_d(s, j, float(rng.uniform(0.0, 5.0)))
        else:
            new = shift_l(s, j, float(rng.uniform(-2.0, 1.0)))
        y, t, f, B = dense(new)
        err = max(rel_err(new.y, y), rel_err(new.t, t),
                  abs(new.f - f) / max(1.0, abs(f)),
                  rel_err(new.Binv, np.linalg.inv(B)))
        worst = max(worst, err)
        trials += 1
    ok = worst <= 1e-10
    record(6, ok, f"{trials} shift_d/shift_l trials; max relative error {worst:.2e}")
    assert ok


def test_criterion_7_certified_bounds():
    count, bad, worst = 0, 0, 0.0
    for run in feasible_suite() + infeasible_suite():
        p = run.inst.problem
        states = [run.inst.bounds] + [rec.bounds for rec in run.records]
        for b in states:
            rep = verify_certified_bounds(p, b, tol=1e-8)
            direct = max(np.abs(p.A @ b.Lambda + p.A).max(), -b.Lambda.min(),
                         (b.l + b.Lambda.T @ p.u).max())
            worst = max(worst, direct)
            bad += (not rep.passed) or direct > 1e-8
            count += 1
    ok = bad == 0
    record(7, ok, f"{count} certificate matrices checked, {bad} failures; "
                  f"worst residual {worst:.2e}")
    assert ok


def test_criterion_8_variants():
    same_iter, close, worst = 0, 0, 0.0
    runs = infeasible_suite()
    for r in runs:
        na = run_oea_no_alt(r.inst)
        mm = run_oea_mm(r.inst)
        same_iter += na.iterations == r.out.iterations and na.kind == "infeasible-declared"
        diff = float(np.abs(mm.certificate.lambda_bar - r.out.certificate.lambda_bar).max())
        worst = max(worst, diff)
        close += diff <= 1e-10
    rng = np.random.default_rng(8)
    worst_bs = 0.0
    for _ in range(100):
        m = int(rng.integers(2, 7))
        seq = CertIndexSeq(rng.uniform(0, 1, (m, m)))
        for _ in range(int(rng.integers(1, 6))):
            seq.append(rng.standard_normal(m), int(rng.integers(m)))
        t = seq.pairs[-1][1]
        want = replay_lambda(seq)[:, t] + np.eye(m)[t]
        worst_bs = max(worst_bs, rel_err(backsolve_vector(seq), want))
    ok = same_iter == len(runs) and close == len(runs) and worst_bs <= 1e-10
    record(8, ok, f"no-alt index match {same_iter}/{len(runs)}; mm certificate match "
                  f"{close}/{len(runs)} (max diff {worst:.1e}); backsolve vs dense "
                  f"recursion on 100 sequences max error {worst_bs:.1e}")
    assert ok


def _half_ellipsoid_points(s, j, rng, k):
    """Uniform interior and boundary points of E(d1, l1) on the side a_j.T x <= u_j."""
    y, _, f, B = dense(s)
    L = np.linalg.cholesky(B)
    n = s.n
    z = rng.standard_normal((k, n))
    z /= np.linalg.norm(z, axis=1)[:, None]
    radii = np.ones(k)
    radii[: k // 2] = rng.uniform(0, 1, k // 2) ** (1.0 / n)
    z *= radii[:, None]
    pts = y + math.sqrt(f) * np.linalg.solve(L.T, z.T).T
    a, uj = s.problem.A[:, j], s.problem.u[j]
    flip = pts @ a > uj
    pts[flip] = 2 * y - pts[flip]  # the center lies on the cut
    return pts[pts @ a <= uj + 1e-12]


def test_criterion_9_half_ellipsoid():
    rng = np.random.default_rng(9)
    count, escapes, worst = 0, 0, -math.inf
    for _, rec in all_records():
        pts = _half_ellipsoid_points(rec.shifted, rec.j, rng, MC_POINTS)
        y3, _, f3, B3 = dense(rec.after)
        w = pts - y3
        q = np.einsum("ij,jk,ik->i", w, B3, w) - f3
        excess = q / max(1.0, abs(f3))
        worst = max(worst, float(excess.max()))
        escapes += int((excess > 1e-8).sum())
        count += len(pts)
    ok = count > 0 and escapes == 0
    record(9, ok, f"{count} sampled points across all updates, {escapes} escapes; "
                  f"max quadratic-form excess {worst:.2e}")
    assert ok


def _seap_decrease_ok(out) -> tuple[int, int]:
    checks = bad = 0
    for side in ("P", "Alt"):
        q = out.counters[f"q_{side}"]
        dets = out.counters[f"log_det_{side}"]
        if not dets:
            continue
        if q == 1:
            step = math.log(0.25)
        else:
            step = q * math.log(q * q / (q * q - 1.0)) + math.log1p(-2.0 / (q + 1))
        for a, b in zip(dets, dets[1:]):
            checks += 1
            dv = 0.5 * (b - a)
            bad += abs((b - a) - step) > 1e-9 or dv > -1.0 / (2 * (q + 1)) + 1e-12
    return checks, bad


def test_criterion_10_seap():
    solved = valid_alt = alt_total = checks = bad = 0
    runs = feasible_suite() + infeasible_suite()
    for r in runs:
        out = run_seap(r.inst)
        solved += out.exit_code in (0, 1) and (out.kind == FEASIBLE) == bool(r.inst.meta.feasible)
        if out.side == "Alt":
            alt_total += 1
            valid_alt += verify_type_l(r.inst.problem, out.certificate.lambda_bar).passed
        c, b = _seap_decrease_ok(out)
        checks += c
        bad += b
    rows = run_sweep(SweepConfig(kind="infeasible-shifted", ns=(2, 3), m_hats=(1, 2),
                                 seeds=(0, 1), algorithms=("oea", "seap")))
    table = summary_table(rows)
    has_table = "iteration comparison" in table and "seap" in table and "oea" in table
    ok = solved == len(runs) and valid_alt == alt_total and bad == 0 and has_table
    record(10, ok, f"SEAP solved {solved}/{len(runs)}; Alt certificates valid "
                   f"{valid_alt}/{alt_total}; {checks} log-volume steps, {bad} off the "
                   f"identity; comparison table emitted: {has_table}")
    print(table)
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
