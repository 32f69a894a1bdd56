"""Scalar coefficient sequences of Prox-ITEM and their stationary limits."""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, TextIO

__all__ = [
    "ScheduleOverflowError",
    "ScheduleState",
    "StepCoefficients",
    "TmmCoefficients",
    "validate_q",
    "advance_schedule",
    "iterate_schedule",
    "max_horizon",
    "schedule_limits",
    "p_coefficients",
    "verify_schedule_signs",
    "SIGN_CHECKS",
    "write_schedule_csv",
]

A_MAX = 1e300
Q_MAX = 1.0 - 1e-6


class ScheduleOverflowError(OverflowError):
    def __init__(self, q: float, k: int):
        self.q = q
        self.max_horizon = k
        super().__init__(
            f"A_{k + 1} would exceed {A_MAX:g} for q={q!r}; "
            f"the maximal supported horizon is {k}"
        )


def validate_q(q: float) -> float:
    q = float(q)
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q!r}")
    if q > Q_MAX:
        raise ValueError(f"q={q!r} is too close to 1 (limit {Q_MAX})")
    return q


def _sigma(A: float, q: float) -> float:
    # factored so the product cannot overflow before A does
    return math.sqrt(1.0 + A) * math.sqrt(1.0 + q * A)


@dataclass(frozen=True)
class ScheduleState:
    k: int
    q: float
    A: float
    sigma: float

    @classmethod
    def initial(cls, q: float) -> "ScheduleState":
        return cls(k=0, q=validate_q(q), A=0.0, sigma=1.0)

    @classmethod
    def at(cls, k: int, q: float, A: float) -> "ScheduleState":
        return cls(k=k, q=q, A=A, sigma=_sigma(A, q))


@dataclass(frozen=True)
class StepCoefficients:
    beta: float
    delta: float
    A_next: float
    sigma_next: float


@dataclass(frozen=True)
class TmmCoefficients:
    """Constant weights of the stationary method for a given q and L."""

    y_z_weight: float
    y_x_weight: float
    zbar_z_weight: float
    zbar_y_weight: float
    grad_step: float
    prox_gamma: float
    correction: float

    @classmethod
    def from_params(cls, q: float, L: float) -> "TmmCoefficients":
        rq = math.sqrt(validate_q(q))
        return cls(
            y_z_weight=2.0 * rq / (1.0 + rq),
            y_x_weight=(1.0 - rq) / (1.0 + rq),
            zbar_z_weight=1.0 - rq,
            zbar_y_weight=rq,
            grad_step=1.0 / (rq * L),
            prox_gamma=1.0 / (rq * L),
            correction=rq,
        )


def advance_schedule(state: ScheduleState) -> tuple[StepCoefficients, ScheduleState]:
    q, A, sigma = state.q, state.A, state.sigma
    A_next = ((1.0 + q) * A + 2.0 * (1.0 + sigma)) / (1.0 - q) ** 2
    if not A_next <= A_MAX:
        raise ScheduleOverflowError(q, state.k)
    beta = A / ((1.0 - q) * A_next)
    delta = math.sqrt(A_next / (1.0 + q * A_next))
    nxt = ScheduleState.at(state.k + 1, q, A_next)
    return StepCoefficients(beta, delta, A_next, nxt.sigma), nxt


def iterate_schedule(q: float, horizon: int) -> Iterator[tuple[ScheduleState, StepCoefficients | None]]:
    """Yield ``(state_k, coeffs_k)`` for k = 0..horizon; the last coeffs is None."""
    state = ScheduleState.initial(q)
    for _ in range(horizon):
        coeffs, nxt = advance_schedule(state)
        yield state, coeffs
        state = nxt
    yield state, None


@functools.lru_cache(maxsize=256)
def max_horizon(q: float) -> int:
    """Largest number of steps the schedule can take before A exceeds its cap."""
    state = ScheduleState.initial(q)
    while True:
        try:
            _, state = advance_schedule(state)
        except ScheduleOverflowError as exc:
            return exc.max_horizon


def schedule_limits(q: float) -> tuple[float, float, float, float]:
    """(lim beta_k, lim delta_k, lim A_k/A_{k+1}, lim sigma_k/A_k)."""
    rq = math.sqrt(validate_q(q))
    return (1.0 - rq) / (1.0 + rq), 1.0 / rq, (1.0 - rq) ** 2, rq


def p_coefficients(state: ScheduleState, coeffs: StepCoefficients) -> tuple[float, float, float, float]:
    """Polynomial coefficients of the factored one-step slack; all vanish."""
    q, A, sigma = state.q, state.A, state.sigma
    A1, beta, delta = coeffs.A_next, coeffs.beta, coeffs.delta
    p0 = A - (1.0 - q) * A1 * beta
    p1 = delta * (A - (1.0 + q) * A1) + 2.0 * A1
    p2 = delta * (sigma - 1.0) - A
    p3 = A1 - (1.0 + q * A1) * delta**2
    return p0, p1, p2, p3


SIGN_CHECKS = (
    "A_k>=0",
    "A_next>0",
    "delta_k>0",
    "A_next-A_k>=0",
    "A_next-A_k+sigma_next-sigma_k>=0",
    "(1+q)A_next-A_k>=0",
    "(1+q)A_next-A_k-sigma_k+1>=0",
    "sigma_k-1>=0",
)


def verify_schedule_signs(states: Sequence[ScheduleState]) -> list[dict[str, bool]]:
    """The eight sign facts of the coefficient lemma, one dict per step k."""
    rows = []
    for cur, nxt in zip(states[:-1], states[1:]):
        q, A, A1, s, s1 = cur.q, cur.A, nxt.A, cur.sigma, nxt.sigma
        delta = math.sqrt(A1 / (1.0 + q * A1))
        tol = -1e-12 * max(1.0, A1)
        values = (
            A,
            A1,
            delta,
            A1 - A,
            A1 - A + s1 - s,
            (1.0 + q) * A1 - A,
            (1.0 + q) * A1 - A - s + 1.0,
            s - 1.0,
        )
        row = {name: v >= tol for name, v in zip(SIGN_CHECKS, values)}
        # strict facts
        row["A_next>0"] = A1 > 0.0
        row["delta_k>0"] = delta > 0.0
        rows.append(row)
    return rows


SCHEDULE_COLUMNS = ("k", "A_k", "sigma_k", "beta_k", "delta_k", "p0", "p1", "p2", "p3")


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def schedule_rows(q: float, horizon: int) -> Iterable[list[str]]:
    for state, coeffs in iterate_schedule(q, horizon):
        row = [str(state.k), _fmt(state.A), _fmt(state.sigma)]
        if coeffs is None:
            row += [""] * 6
        else:
            row += [_fmt(coeffs.beta), _fmt(coeffs.delta)]
            row += [_fmt(p) for p in p_coefficients(state, coeffs)]
        yield row


def write_schedule_csv(q: float, horizon: int, fh: TextIO) -> None:
    """Schedule table for k = 0..horizon followed by a ``limits`` footer row."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SCHEDULE_COLUMNS)
    for row in schedule_rows(q, horizon):
        writer.writerow(row)
    writer.writerow(["limits"] + [_fmt(v) for v in schedule_limits(q)])
