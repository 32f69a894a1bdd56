"""Prox-ITEM: optimal proximal gradient method for smooth strongly convex
plus convex composite problems, with runtime-checked convergence certificates."""

from .certificates import (
    CertificateReport,
    SolutionCertificate,
    build_report,
    interpolation_audit,
    lyapunov_tmm_value,
    lyapunov_value,
    make_certificate,
    reference_certificate,
    residual_f,
    residual_g,
    slack_value,
)
from .kernels import BACKEND
from .problem import (
    BUILTIN_IDS,
    CompositeInstance,
    GSpec,
    ProblemClassParams,
    builtin_instance,
    make_quadratic_instance,
    solve_reference,
)
from .schedule import ScheduleOverflowError, ScheduleState, iterate_schedule, max_horizon
from .solvers import METHODS, Trace, read_trace, run_method, write_trace

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BUILTIN_IDS",
    "METHODS",
    "CertificateReport",
    "CompositeInstance",
    "GSpec",
    "ProblemClassParams",
    "ScheduleOverflowError",
    "ScheduleState",
    "SolutionCertificate",
    "Trace",
    "build_report",
    "builtin_instance",
    "interpolation_audit",
    "iterate_schedule",
    "lyapunov_tmm_value",
    "lyapunov_value",
    "make_certificate",
    "make_quadratic_instance",
    "max_horizon",
    "read_trace",
    "reference_certificate",
    "residual_f",
    "residual_g",
    "run_method",
    "slack_value",
    "solve_reference",
    "write_trace",
]
