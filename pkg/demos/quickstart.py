"""Solve one feasible and one infeasible instance and check what comes back.

    python3 demos/quickstart.py
"""

import numpy as np

from oblivious_ellipsoid import gen_instance, run_oea, verify_type_l


def main() -> None:
    feas = gen_instance("feasible-box", n=3, m_hat=3, seed=7)
    out = run_oea(feas)
    slack = feas.problem.slacks(out.x).min()
    print(f"feasible box: {out.kind} updates: {out.iterations}, "
          f"x = {np.round(out.x, 4)}, smallest slack {slack:.3e}")

    infeas = gen_instance("infeasible-shifted", n=3, m_hat=2, seed=3)
    out = run_oea(infeas)
    lam = out.certificate.lambda_bar
    rep = verify_type_l(infeas.problem, lam)
    print(f"shifted pair: {out.kind}, updates: {out.iterations} "
          f"(oracle tau = {infeas.meta.tau:.3f})")
    print(f"  ||A lam||_inf = {rep.eq_residual:.2e}, min(lam) = {rep.min_entry:.3f}, "
          f"u.lam = {rep.u_dot:.3f}, valid = {rep.passed}")


if __name__ == "__main__":
    main()
