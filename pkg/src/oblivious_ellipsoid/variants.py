"""Memory variants of the solver.

``run_oea_no_alt`` never touches the certificate matrix and only declares
infeasibility. ``run_oea_mm`` stores one ``(lam_hat, j)`` pair per
certificate refresh and rebuilds the final certificate by a backward sweep.

Sidecar layout (little-endian)::

    offset  type          content
    0       4 bytes       magic b"OEAS"
    4       uint32        format version (1)
    8       uint32        m
    12      uint64        k, number of stored pairs
    20      m*m float64   initial certificate matrix, column-major
    ...     k records     uint64 j (0-based) followed by m float64 (lam_hat)
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import numpy.typing as npt

from .certificates import TypeLCertificate, type_l_from_bound_violation
from .errors import EmptySequence, ParseError
from .problem import Instance, ProblemData
from .solver import Outcome, SolverConfig, _run

Array = npt.NDArray[np.float64]
log = logging.getLogger(__name__)

MAGIC = b"OEAS"
SIDECAR_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


@dataclass
class CertIndexSeq:
    initial_Lambda: Array
    pairs: list = field(default_factory=list)
    degraded: bool = False

    def __post_init__(self):
        self.initial_Lambda = np.array(self.initial_Lambda, dtype=np.float64)
        m = self.initial_Lambda.shape[0]
        if self.initial_Lambda.shape != (m, m):
            raise ValueError("initial_Lambda must be square")

    @property
    def m(self) -> int:
        return self.initial_Lambda.shape[0]

    def __len__(self) -> int:
        return len(self.pairs)

    def append(self, lam_hat, j: int, cap: Optional[int] = None) -> None:
        if self.degraded:
            return
        if cap is not None and len(self.pairs) >= cap:
            log.warning("certificate-index sequence hit its cap of %d pairs; "
                        "falling back to declaring infeasibility", cap)
            self.degraded = True
            self.pairs.clear()
            return
        if not 0 <= j < self.m:
            raise IndexError(f"index {j} out of range for m={self.m}")
        self.pairs.append((np.array(lam_hat, dtype=np.float64), int(j)))

    # ---- binary sidecar

    def to_bytes(self) -> bytes:
        m = self.m
        parts = [_HEADER.pack(MAGIC, SIDECAR_VERSION, m, len(self.pairs)),
                 np.asarray(self.initial_Lambda, dtype="<f8").tobytes(order="F")]
        for lam, j in self.pairs:
            parts.append(struct.pack("<Q", j))
            parts.append(np.asarray(lam, dtype="<f8").tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CertIndexSeq":
        if len(data) < _HEADER.size:
            raise ParseError("sidecar too short for its header")
        magic, version, m, k = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise ParseError(f"bad sidecar magic {magic!r}")
        if version != SIDECAR_VERSION:
            raise ParseError(f"unsupported sidecar version {version}")
        rec = 8 + 8 * m
        expected = _HEADER.size + 8 * m * m + k * rec
        if len(data) != expected:
            raise ParseError(f"sidecar has {len(data)} bytes, expected {expected}")
        off = _HEADER.size
        Lam0 = np.frombuffer(data, dtype="<f8", count=m * m, offset=off)
        Lam0 = Lam0.reshape((m, m), order="F").astype(np.float64)
        off += 8 * m * m
        seq = cls(Lam0)
        for _ in range(k):
            (j,) = struct.unpack_from("<Q", data, off)
            lam = np.frombuffer(data, dtype="<f8", count=m, offset=off + 8).astype(np.float64)
            seq.append(lam, int(j))
            off += rec
        return seq

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read(cls, path) -> "CertIndexSeq":
        return cls.from_bytes(Path(path).read_bytes())


def backsolve_vector(seq: CertIndexSeq, target: Optional[int] = None) -> Array:
    """``Lambda^(k) e_t + e_t`` by ``k`` backward rank-one sweeps.

    ``target`` defaults to the index of the last stored pair.
    """
    if not seq.pairs:
        raise EmptySequence("certificate-index sequence is empty")
    t = seq.pairs[-1][1] if target is None else int(target)
    m = seq.m
    w = np.zeros(m)
    w[t] = 1.0
    z = w.copy()
    for lam, j in reversed(seq.pairs):
        c = w[j]
        if c == 0.0:
            continue
        neg = np.maximum(-lam, 0.0)
        pos = np.maximum(lam, 0.0)
        w = w + neg * c
        w[j] -= c
        z = z + pos * c
    return seq.initial_Lambda @ w + z


def backsolve_type_l(seq: CertIndexSeq, target: Optional[int] = None,
                     problem: Optional[ProblemData] = None):
    """Type-L certificate from a stored sequence.

    With ``problem`` the result is validated and wrapped; otherwise the raw
    vector is returned.
    """
    if problem is None:
        return backsolve_vector(seq, target)
    t = seq.pairs[-1][1] if target is None and seq.pairs else target
    if not seq.pairs and target is not None:
        lam = seq.initial_Lambda[:, target].copy()
        return type_l_from_bound_violation(problem, lam, target)
    vec = backsolve_vector(seq, t)
    vec[t] -= 1.0  # type_l_from_bound_violation adds e_t back
    return type_l_from_bound_violation(problem, vec, t)


def replay_lambda(seq: CertIndexSeq) -> Array:
    """Dense oracle: apply every stored update to the full matrix."""
    Lam = seq.initial_Lambda.copy()
    for lam, j in seq.pairs:
        neg = np.maximum(-lam, 0.0)
        pos = np.maximum(lam, 0.0)
        Lam[:, j] = Lam @ neg + pos
    return Lam


def run_oea_no_alt(inst: Instance, cfg: SolverConfig = SolverConfig()) -> Outcome:
    """Same iterations as the full solver; infeasibility is only declared."""
    return _run(inst, cfg, "no-alt")


def run_oea_mm(inst: Instance, cfg: SolverConfig = SolverConfig()) -> Outcome:
    """Deferred certificate construction from the stored index sequence."""
    return _run(inst, cfg, "mm")
