"""JSON problem/certificate files and the trace CSV.

Floats are written as ``%.16e`` (17 significant digits), which round-trips
every finite double exactly.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .certificates import TypeLCertificate, verify_type_l
from .errors import (
    DimensionMismatch,
    ImmediateInfeasible,
    InvariantViolation,
    OEAError,
    ParseError,
)
from .problem import (
    BoxSystem,
    CertifiedBounds,
    Instance,
    InstanceMeta,
    ProblemData,
    from_box,
    normalize_columns,
    verify_certified_bounds,
)

FORMAT_VERSION = 1
TRACE_COLUMNS = ["iter", "f", "log_rel_volume", "phi", "j", "max_violation",
                 "l_cert_updated", "event"]


# ----------------------------------------------------------------- writing

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite number {x!r}")
        return format(x, ".16e")
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, np.ndarray):
        return _fmt(x.tolist())
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj) -> str:
    """JSON text with full-precision floats."""
    return _fmt(obj) + "\n"


def _columns(M) -> list:
    M = np.asarray(M, dtype=np.float64)
    return [M[:, j].tolist() for j in range(M.shape[1])]


def instance_to_dict(inst: Instance) -> dict:
    p = inst.problem
    out = {"version": FORMAT_VERSION, "n": p.n, "m": p.m}
    if inst.box is not None:
        bx = inst.box
        out["box"] = {"A_hat": _columns(bx.A_hat), "u_hat": bx.u_hat.tolist(),
                      "lo": bx.lo.tolist(), "hi": bx.hi.tolist()}
    else:
        out["A"] = _columns(p.A)
        out["u"] = p.u.tolist()
        out["l"] = inst.bounds.l.tolist()
        out["Lambda"] = _columns(inst.bounds.Lambda)
    if not np.all(inst.d0 == 1.0):
        out["d0"] = inst.d0.tolist()
    meta = {k: v for k, v in (("tau", inst.meta.tau), ("rho", inst.meta.rho),
                              ("feasible", inst.meta.feasible)) if v is not None}
    if meta:
        out["meta"] = meta
    return out


def write_instance(inst: Instance, path=None) -> str:
    text = dumps(instance_to_dict(inst))
    if path is not None:
        Path(path).write_text(text)
    return text


def certificate_to_dict(p: ProblemData, cert: TypeLCertificate) -> dict:
    rep = verify_type_l(p, cert.lambda_bar)
    return {"status": "infeasible", "lambda_bar": cert.lambda_bar.tolist(),
            "residuals": rep.as_dict()}


def feasible_to_dict(x) -> dict:
    return {"status": "feasible", "x": np.asarray(x).tolist()}


DECLARED_DOC = {"status": "infeasible-declared"}


# ----------------------------------------------------------------- reading

def _load_json(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _matrix_from_columns(doc, key, rows, cols, source) -> np.ndarray:
    val = doc[key]
    try:
        arr = np.array(val, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{source}: field {key!r} is not a numeric array") from exc
    if cols == 0:
        return np.zeros((rows, 0))
    if arr.ndim != 2 or arr.shape != (cols, rows):
        raise ParseError(f"{source}: field {key!r} must be {cols} columns of length {rows}, "
                         f"got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{source}: field {key!r} has non-finite entries")
    return arr.T.copy()


def _vector(doc, key, length, source) -> np.ndarray:
    try:
        arr = np.array(doc[key], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{source}: field {key!r} is not a numeric array") from exc
    if arr.shape != (length,):
        raise ParseError(f"{source}: field {key!r} must have length {length}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{source}: field {key!r} has non-finite entries")
    return arr


def _int(doc, key, source) -> int:
    v = doc.get(key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ParseError(f"{source}: field {key!r} must be an integer")
    return v


def instance_from_dict(doc, source: str = "<problem>") -> Instance:
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: top level must be an object")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"{source}: field 'version' must be {FORMAT_VERSION}")
    n = _int(doc, "n", source)
    m = _int(doc, "m", source)
    meta_doc = doc.get("meta") or {}
    if not isinstance(meta_doc, dict):
        raise ParseError(f"{source}: field 'meta' must be an object")
    meta = InstanceMeta(tau=meta_doc.get("tau"), rho=meta_doc.get("rho"),
                        feasible=meta_doc.get("feasible"))

    if "box" in doc:
        clash = [k for k in ("A", "u", "l", "Lambda") if k in doc]
        if clash:
            raise ParseError(f"{source}: 'box' excludes fields {clash}")
        bx = doc["box"]
        if not isinstance(bx, dict):
            raise ParseError(f"{source}: field 'box' must be an object")
        for k in ("A_hat", "u_hat", "lo", "hi"):
            if k not in bx:
                raise ParseError(f"{source}: field 'box.{k}' is missing")
        m_hat = m - 2 * n
        if m_hat < 0:
            raise ParseError(f"{source}: m={m} is too small for a box in n={n}")
        box = BoxSystem(_matrix_from_columns(bx, "A_hat", n, m_hat, source + " box"),
                        _vector(bx, "u_hat", m_hat, source + " box"),
                        _vector(bx, "lo", n, source + " box"),
                        _vector(bx, "hi", n, source + " box"))
        problem, bounds = from_box(box)
        d0 = _vector(doc, "d0", m, source) if "d0" in doc else None
        bx_norm = BoxSystem(problem.A[:, :m_hat], problem.u[:m_hat], box.lo, box.hi)
        return Instance(problem, bounds, d0=d0, meta=meta, box=bx_norm)

    for k in ("A", "u"):
        if k not in doc:
            raise ParseError(f"{source}: field {k!r} is missing")
    A = _matrix_from_columns(doc, "A", n, m, source)
    u = _vector(doc, "u", m, source)
    if ("l" in doc) != ("Lambda" in doc):
        raise ParseError(f"{source}: fields 'l' and 'Lambda' must appear together")
    if "l" not in doc:
        raise ParseError(f"{source}: certified bounds ('l' and 'Lambda') are required "
                         "unless 'box' is given")
    l = _vector(doc, "l", m, source)
    Lam = _matrix_from_columns(doc, "Lambda", m, m, source)
    problem = normalize_columns(A, u)
    # rescale the bounds consistently with the column normalization
    norms = np.linalg.norm(A, axis=0)
    unit = np.abs(norms - 1.0) <= 4 * np.finfo(float).eps
    scale = np.where(unit, 1.0, norms)
    l = l / scale
    Lam = Lam * scale[:, None] / scale[None, :]
    bounds = CertifiedBounds(l, Lam)
    rep = verify_certified_bounds(problem, bounds, tol=1e-9)
    failed = []
    if rep.eq_residual > 1e-9:
        failed.append(f"||A Lambda + A||_max = {rep.eq_residual:.3e}")
    if rep.min_entry < -1e-12:
        failed.append(f"min(Lambda) = {rep.min_entry:.3e}")
    if rep.min_slack < -1e-9:
        failed.append(f"min(-Lambda.T u - l) = {rep.min_slack:.3e}")
    if failed:
        raise InvariantViolation(f"{source}: certified bounds fail: " + "; ".join(failed))
    d0 = _vector(doc, "d0", m, source) if "d0" in doc else None
    return Instance(problem, bounds, d0=d0, meta=meta)


def parse_problem(path) -> Instance:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    doc = _load_json(text, str(path))
    try:
        return instance_from_dict(doc, str(path))
    except (ParseError, InvariantViolation, ImmediateInfeasible):
        raise
    except (OEAError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def parse_certificate(path, m: Optional[int] = None) -> np.ndarray:
    path = Path(path)
    try:
        doc = _load_json(path.read_text(), str(path))
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    if not isinstance(doc, dict) or "lambda_bar" not in doc:
        raise ParseError(f"{path}: field 'lambda_bar' is missing")
    try:
        lam = np.array(doc["lambda_bar"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: 'lambda_bar' is not numeric") from exc
    if lam.ndim != 1 or (m is not None and lam.shape[0] != m):
        raise DimensionMismatch(f"{path}: 'lambda_bar' has shape {lam.shape}")
    return lam


# ------------------------------------------------------------------- trace

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def trace_csv(rows: Iterable, side_column: bool = False) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = TRACE_COLUMNS + (["side"] if side_column else [])
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(getattr(r, c, None)) for c in cols])
    return buf.getvalue()


def write_trace(rows: Iterable, path, side_column: bool = False) -> None:
    Path(path).write_text(trace_csv(rows, side_column))
