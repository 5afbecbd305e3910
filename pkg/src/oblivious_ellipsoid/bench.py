"""Benchmark sweeps over generated instances.

Each cell records iterations, wall time, operation counters, the worst-case
iteration bound (when the oracle supplied ``tau``) and per-iteration checks
of the volume and potential contraction factors.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .baseline import run_seap, run_std_ellipsoid
from .certificates import verify_type_l
from .ellipsoid import log_rel_volume, mu_vector
from .problem import Instance, gen_instance
from .solver import (
    FEASIBLE,
    TYPE_L,
    SolverConfig,
    UpdateRecord,
    feasible_box_bound,
    infeasible_bound,
    run_oea,
)
from .variants import run_oea_mm, run_oea_no_alt

ALGORITHMS = ("oea", "oea-no-alt", "oea-mm", "seap", "std-p", "std-alt")
CONTRACTION_TOL = 1e-10


def solve(algorithm: str, inst: Instance, cfg: SolverConfig = SolverConfig()):
    if algorithm == "oea":
        return run_oea(inst, cfg)
    if algorithm == "oea-no-alt":
        return run_oea_no_alt(inst, cfg)
    if algorithm == "oea-mm":
        return run_oea_mm(inst, cfg)
    if algorithm == "seap":
        return run_seap(inst, cfg)
    if algorithm == "std-p":
        return run_std_ellipsoid("P", inst, cfg)
    if algorithm == "std-alt":
        return run_std_ellipsoid("AltBall", inst, cfg)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def theoretical_bound(inst: Instance) -> Optional[int]:
    """Worst-case iteration bound for this instance, or ``None`` without ``tau``."""
    tau = inst.meta.tau
    if tau is None or tau <= 0 or inst.meta.feasible is None:
        return None
    p = inst.problem
    if inst.meta.feasible:
        if inst.box is None:
            return None
        diam = float(np.linalg.norm(inst.box.hi - inst.box.lo))
        return feasible_box_bound(p.n, p.m, inst.box.m_hat, diam, tau)
    return infeasible_bound(p.m, float(np.linalg.norm(p.u - inst.bounds.l)), tau)


@dataclass
class ContractionAudit:
    """Counts of per-update contraction checks and their violations."""

    m: int
    tau: Optional[float]
    updates: int = 0
    volume_violations: int = 0
    phi_checked: int = 0
    phi_violations: int = 0
    worst_volume_ratio: float = 0.0
    worst_phi_ratio: float = 0.0

    def __call__(self, rec: UpdateRecord) -> None:
        m = self.m
        limit = math.exp(-1.0 / (2 * (m + 1))) + CONTRACTION_TOL
        self.updates += 1
        vr = math.exp(log_rel_volume(rec.after) - log_rel_volume(rec.before))
        self.worst_volume_ratio = max(self.worst_volume_ratio, vr)
        if vr > limit:
            self.volume_violations += 1
        if self.tau is not None and rec.sqrt_f_over_dj >= self.tau:
            pr = math.exp(np.log(mu_vector(rec.after, self.tau)).sum()
                          - np.log(mu_vector(rec.before, self.tau)).sum())
            self.phi_checked += 1
            self.worst_phi_ratio = max(self.worst_phi_ratio, pr)
            if pr > limit:
                self.phi_violations += 1


@dataclass
class BenchRow:
    kind: str
    n: int
    m_hat: int
    seed: int
    m: int
    tau: Optional[float]
    algorithm: str
    outcome: str
    iterations: int
    wall_s: float
    bound: Optional[int]
    bound_ok: Optional[bool]
    verified: bool
    volume_violations: int = 0
    phi_violations: int = 0
    side: Optional[str] = None
    counters: str = ""
    error: str = ""


@dataclass(frozen=True)
class SweepConfig:
    kind: str = "feasible-box"
    ns: Sequence[int] = (2, 3)
    m_hats: Sequence[int] = (0, 1, 2)
    seeds: Sequence[int] = tuple(range(5))
    algorithms: Sequence[str] = ("oea",)
    workers: int = 1
    solver: SolverConfig = field(default_factory=SolverConfig)


def _verified(inst: Instance, out) -> bool:
    if out.kind == FEASIBLE:
        return bool(inst.problem.is_feasible(out.x, tol=1e-8))
    if out.kind == TYPE_L:
        return verify_type_l(inst.problem, out.certificate.lambda_bar).passed
    return out.kind == "infeasible-declared"


def _cell(args) -> BenchRow:
    kind, n, mh, seed, algorithm, cfg = args
    try:
        inst = gen_instance(kind, n, mh, seed)
    except Exception as exc:  # noqa: BLE001 - reported in the row
        return BenchRow(kind, n, mh, seed, 0, None, algorithm, "error", 0, 0.0, None, None,
                        False, error=f"{type(exc).__name__}: {exc}")
    audit = ContractionAudit(inst.problem.m, inst.meta.tau)
    oea_family = algorithm.startswith("oea")
    run_cfg = replace(cfg, observer=audit if oea_family else None,
                      tau=cfg.tau or inst.meta.tau)
    bound = theoretical_bound(inst) if oea_family else None
    t0 = time.perf_counter()
    try:
        out = solve(algorithm, inst, run_cfg)
    except Exception as exc:  # noqa: BLE001 - partial failure, keep sweeping
        return BenchRow(kind, n, mh, seed, inst.problem.m, inst.meta.tau, algorithm, "error",
                        0, time.perf_counter() - t0, bound, None, False,
                        error=f"{type(exc).__name__}: {exc}")
    wall = time.perf_counter() - t0
    counters = {k: v for k, v in out.counters.items() if not isinstance(v, list)}
    return BenchRow(
        kind, n, mh, seed, inst.problem.m, inst.meta.tau, algorithm, out.kind, out.iterations,
        wall, bound, None if bound is None else out.iterations <= bound, _verified(inst, out),
        audit.volume_violations, audit.phi_violations, out.side,
        ";".join(f"{k}={v}" for k, v in sorted(counters.items())),
    )


def run_sweep(cfg: SweepConfig) -> list[BenchRow]:
    jobs = [(cfg.kind, n, mh, seed, alg, cfg.solver)
            for n in cfg.ns for mh in cfg.m_hats for seed in cfg.seeds
            for alg in cfg.algorithms]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(_cell, jobs))
    return [_cell(j) for j in jobs]


def rows_to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    names = list(BenchRow.__dataclass_fields__)
    w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = asdict(r)
        d["wall_s"] = f"{r.wall_s:.6f}"
        w.writerow({k: ("" if v is None else v) for k, v in d.items()})
    return buf.getvalue()


def summary_table(rows: Sequence[BenchRow]) -> str:
    """Per-algorithm aggregate plus a side-by-side iteration comparison."""
    lines = ["algorithm    cells  solved  verified  bound_ok  mean_iter  max_iter  "
             "vol_viol  phi_viol  errors"]
    for alg in dict.fromkeys(r.algorithm for r in rows):
        rs = [r for r in rows if r.algorithm == alg]
        ok = [r for r in rs if r.outcome not in ("error", "iter-limit")]
        its = [r.iterations for r in ok] or [0]
        bounded = [r for r in rs if r.bound_ok is not None]
        lines.append(
            f"{alg:<12} {len(rs):>5}  {len(ok):>6}  {sum(r.verified for r in rs):>8}  "
            f"{(str(sum(r.bound_ok for r in bounded)) + '/' + str(len(bounded))) if bounded else '-':>8}  "
            f"{np.mean(its):>9.2f}  {max(its):>8}  {sum(r.volume_violations for r in rs):>8}  "
            f"{sum(r.phi_violations for r in rs):>8}  {sum(bool(r.error) for r in rs):>6}"
        )
    algs = list(dict.fromkeys(r.algorithm for r in rows))
    if len(algs) > 1:
        lines += ["", "iteration comparison", "instance" + "".join(f"  {a:>10}" for a in algs)]
        cells = {}
        for r in rows:
            cells.setdefault((r.kind, r.n, r.m_hat, r.seed), {})[r.algorithm] = r
        for key, by_alg in cells.items():
            label = f"n={key[1]} mh={key[2]} s={key[3]}"
            vals = "".join(
                f"  {(str(by_alg[a].iterations) if a in by_alg and not by_alg[a].error else '-'):>10}"
                for a in algs)
            lines.append(f"{label:<8}{vals}")
    return "\n".join(lines) + "\n"
