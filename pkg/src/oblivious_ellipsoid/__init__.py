"""Oblivious ellipsoid method for linear inequality systems ``A.T x <= u``.

Every run ends with a feasible point or a nonnegative ``lam`` with
``A @ lam = 0`` and ``u @ lam < 0``; the solver does not need to know in
advance which of the two exists.
"""

from .certificates import (
    BoundCertificate,
    TypeLCertificate,
    certify_slab_bound,
    procedure_1,
    type_l_from_bound_violation,
    verify_type_e,
    verify_type_l,
)
from .ellipsoid import (
    EllipsoidState,
    Metrics,
    contains,
    derive_state,
    gamma,
    metrics,
    rescale_unit_f,
    shift_d,
    shift_l,
)
from .errors import *  # noqa: F401,F403
from .problem import (
    BoxSystem,
    CertifiedBounds,
    Instance,
    InstanceMeta,
    ProblemData,
    estimate_tau,
    from_box,
    gen_instance,
    normalize_columns,
    verify_certified_bounds,
)
from .solver import (
    IterationTrace,
    Outcome,
    SolverConfig,
    feasible_box_bound,
    infeasible_bound,
    most_violated,
    procedure_2,
    run_oea,
)
from .variants import (
    CertIndexSeq,
    backsolve_type_l,
    replay_lambda,
    run_oea_mm,
    run_oea_no_alt,
)

__version__ = "0.1.0"
