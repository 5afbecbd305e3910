"""Iteration counts of the oblivious method against the classical pair of
ellipsoid runs on a small infeasible sweep.

    python3 demos/seap_comparison.py
"""

from oblivious_ellipsoid.bench import SweepConfig, run_sweep, summary_table


def main() -> None:
    rows = run_sweep(SweepConfig(kind="infeasible-shifted", ns=(2, 3, 4), m_hats=(0, 2),
                                 seeds=(0, 1, 2), algorithms=("oea", "seap")))
    print(summary_table(rows))


if __name__ == "__main__":
    main()
