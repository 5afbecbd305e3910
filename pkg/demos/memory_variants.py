"""The two cheaper variants on an infeasible instance.

The no-alt run stops at the same update but only declares infeasibility.
The stored-sequence run writes a binary sidecar and rebuilds the same
certificate from it afterwards.

    python3 demos/memory_variants.py
"""

import tempfile
from pathlib import Path

import numpy as np

from oblivious_ellipsoid import (
    CertIndexSeq,
    backsolve_type_l,
    gen_instance,
    run_oea,
    run_oea_mm,
    run_oea_no_alt,
)


def main() -> None:
    inst = gen_instance("infeasible-shifted", n=4, m_hat=3, seed=3)
    full = run_oea(inst)
    noalt = run_oea_no_alt(inst)
    mm = run_oea_mm(inst)
    print(f"full   : {full.kind:<20} at update {full.iterations}")
    print(f"no-alt : {noalt.kind:<20} at update {noalt.iterations}")
    print(f"mm     : {mm.kind:<20} at update {mm.iterations}, {len(mm.seq)} stored pairs")

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "seq.bin"
        mm.seq.write(path)
        seq = CertIndexSeq.read(path)
        print(f"sidecar: {path.stat().st_size} bytes")
    if len(seq):
        rebuilt = backsolve_type_l(seq, problem=inst.problem).lambda_bar
        diff = np.abs(rebuilt - full.certificate.lambda_bar).max()
        print(f"certificate rebuilt from the sidecar differs from the full run by {diff:.1e}")


if __name__ == "__main__":
    main()
