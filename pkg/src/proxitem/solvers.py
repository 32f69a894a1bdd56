"""Prox-ITEM, Prox-TMM and two baselines, recorded as full traces."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .problem import (
    CompositeInstance,
    ProblemClassParams,
    apply_prox,
    instance_from_dict,
    instance_to_dict,
)
from .schedule import (
    ScheduleOverflowError,
    ScheduleState,
    TmmCoefficients,
    advance_schedule,
    max_horizon,
)

__all__ = [
    "METHODS",
    "IterateRecord",
    "Trace",
    "prox_item_step",
    "prox_tmm_step",
    "prox_grad_step",
    "fista_sc_step",
    "run_method",
    "write_trace",
    "read_trace",
    "trace_columns",
]

METHODS = ("prox_item", "prox_tmm", "prox_grad", "fista_sc")
VECTOR_FIELDS = ("x_k", "y_k", "z_k", "zbar_next", "grad_f_y", "s_g_next")
SCALAR_FIELDS = ("beta_k", "delta_k", "A_k")


@dataclass(frozen=True)
class IterateRecord:
    """Iteration k: the points entering step k and what the step produced.

    The terminal record of a trace only carries ``x_k`` and ``z_k``.
    ``x_next``/``z_next`` duplicate the next record's points and are not
    serialized.
    """

    k: int
    x_k: np.ndarray
    z_k: np.ndarray
    y_k: Optional[np.ndarray] = None
    zbar_next: Optional[np.ndarray] = None
    grad_f_y: Optional[np.ndarray] = None
    s_g_next: Optional[np.ndarray] = None
    beta_k: Optional[float] = None
    delta_k: Optional[float] = None
    A_k: Optional[float] = None
    x_next: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    z_next: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def is_terminal(self) -> bool:
        return self.y_k is None


@dataclass(frozen=True)
class Trace:
    instance_id: str
    method: str
    params: ProblemClassParams
    x0: np.ndarray
    records: tuple
    schedule_history: tuple = ()
    instance: Optional[CompositeInstance] = field(default=None, repr=False, compare=False)
    seed: Optional[int] = None
    # k = 0 conventions of the Lyapunov function, stored rather than special-cased
    y_minus1: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    s_g_0: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def horizon(self) -> int:
        return len(self.records) - 1

    @property
    def dim(self) -> int:
        return self.x0.shape[0]

    def y(self, k: int) -> np.ndarray:
        return self.y_minus1 if k == -1 else self.records[k].y_k

    def s_g(self, k: int) -> np.ndarray:
        """Recovered subgradient of g at z^k (k >= 0; s_g^0 is the convention value)."""
        return self.s_g_0 if k == 0 else self.records[k - 1].s_g_next

    def z(self, k: int) -> np.ndarray:
        return self.records[k].z_k

    def A(self, k: int) -> float:
        return self.schedule_history[k].A

    def sigma(self, k: int) -> float:
        return self.schedule_history[k].sigma


# ---------------------------------------------------------------------------
# single steps (generic oracles)

def prox_item_step(instance: CompositeInstance, state: ScheduleState, x_k, z_k):
    """One iteration of Prox-ITEM in the displayed order; returns (record, next state)."""
    L = instance.params.L
    q = state.q
    coeffs, nxt = advance_schedule(state)
    beta, delta = coeffs.beta, coeffs.delta
    y = (1.0 - beta) * z_k + beta * x_k
    grad = np.asarray(instance.f.gradient(y), dtype=float)
    zbar = (1.0 - q * delta) * z_k + (q * delta) * y - (delta / L) * grad
    z_next = apply_prox(instance.g, zbar, delta / L)
    x_next = y - (1.0 / L) * grad - (1.0 / delta) * (zbar - z_next)
    rec = IterateRecord(
        k=state.k, x_k=x_k, z_k=z_k, y_k=y, zbar_next=zbar, grad_f_y=grad,
        s_g_next=(L / delta) * (zbar - z_next), beta_k=beta, delta_k=delta, A_k=state.A,
        x_next=x_next, z_next=z_next,
    )
    return rec, nxt


def prox_tmm_step(instance: CompositeInstance, coeffs: TmmCoefficients, x_k, z_k, k: int = 0):
    L = instance.params.L
    y = coeffs.y_z_weight * z_k + coeffs.y_x_weight * x_k
    grad = np.asarray(instance.f.gradient(y), dtype=float)
    zbar = coeffs.zbar_z_weight * z_k + coeffs.zbar_y_weight * y - coeffs.grad_step * grad
    z_next = apply_prox(instance.g, zbar, coeffs.prox_gamma)
    x_next = y - (1.0 / L) * grad - coeffs.correction * (zbar - z_next)
    return IterateRecord(
        k=k, x_k=x_k, z_k=z_k, y_k=y, zbar_next=zbar, grad_f_y=grad,
        s_g_next=(coeffs.correction * L) * (zbar - z_next),
        beta_k=coeffs.y_x_weight, delta_k=1.0 / coeffs.correction,
        x_next=x_next, z_next=z_next,
    )


def _pg_step(instance, x_k, x_prev, momentum, k):
    L = instance.params.L
    y = x_k + momentum * (x_k - x_prev)
    grad = np.asarray(instance.f.gradient(y), dtype=float)
    zbar = y - (1.0 / L) * grad
    x_next = apply_prox(instance.g, zbar, 1.0 / L)
    return IterateRecord(
        k=k, x_k=x_k, z_k=x_k, y_k=y, zbar_next=zbar, grad_f_y=grad,
        s_g_next=L * (zbar - x_next), x_next=x_next, z_next=x_next,
    )


def prox_grad_step(instance: CompositeInstance, x_k, k: int = 0) -> IterateRecord:
    """Forward-backward step with step size 1/L."""
    return _pg_step(instance, x_k, x_k, 0.0, k)


def fista_sc_step(instance: CompositeInstance, x_k, x_prev, k: int = 0) -> IterateRecord:
    """FISTA step for strongly convex f, constant momentum (1-sqrt q)/(1+sqrt q)."""
    rq = math.sqrt(instance.params.q)
    return _pg_step(instance, x_k, x_prev, (1.0 - rq) / (1.0 + rq), k)


# ---------------------------------------------------------------------------
# full runs

def _item_schedule(q: float, horizon: int):
    if horizon > max_horizon(q):
        raise ScheduleOverflowError(q, max_horizon(q))
    states = [ScheduleState.initial(q)]
    coeffs = []
    for _ in range(horizon):
        c, nxt = advance_schedule(states[-1])
        coeffs.append(c)
        states.append(nxt)
    return states, coeffs


def _run_generic(instance, method, x0, horizon):
    q, L = instance.params.q, instance.params.L
    records = []
    history: list = []
    x, z = x0.copy(), x0.copy()
    x_prev = x0.copy()
    if method == "prox_item":
        state = ScheduleState.initial(q)
        history.append(state)
        for k in range(horizon):
            rec, state = prox_item_step(instance, state, x, z)
            history.append(state)
            records.append(rec)
            x, z = rec.x_next, rec.z_next
        records.append(IterateRecord(k=horizon, x_k=x, z_k=z, A_k=state.A))
        return records, history
    if method == "prox_tmm":
        coeffs = TmmCoefficients.from_params(q, L)
        for k in range(horizon):
            rec = prox_tmm_step(instance, coeffs, x, z, k)
            records.append(rec)
            x, z = rec.x_next, rec.z_next
    else:
        for k in range(horizon):
            if method == "prox_grad":
                rec = prox_grad_step(instance, x, k)
            else:
                rec = fista_sc_step(instance, x, x_prev, k)
            records.append(rec)
            x_prev, x = x, rec.x_next
        z = x
    records.append(IterateRecord(k=horizon, x_k=x, z_k=z))
    return records, history


def _run_kernel(instance, method, x0, horizon, backend):
    qd = instance.quad
    q, L = instance.params.q, instance.params.L
    lo, hi = qd.g_spec.bounds(instance.dim)
    code = kernels.G_CODES[qd.g_spec.kind]
    args = (qd.diag, qd.b, code, lo, hi, qd.g_spec.lam, L, x0)
    history: list = []
    A = [None] * (horizon + 1)
    if method == "prox_item":
        history, coeffs = _item_schedule(q, horizon)
        beta = np.array([c.beta for c in coeffs])
        delta = np.array([c.delta for c in coeffs])
        X, Y, Z, ZB, G = backend.run_momentum(
            *args, 1.0 - beta, beta, 1.0 - q * delta, q * delta, delta / L, delta / L,
            1.0 / delta,
        )
        S = (L / delta)[:, None] * (ZB - Z[1:])
        A = [s.A for s in history]
    elif method == "prox_tmm":
        c = TmmCoefficients.from_params(q, L)
        const = lambda v: np.full(horizon, v)  # noqa: E731
        X, Y, Z, ZB, G = backend.run_momentum(
            *args, const(c.y_z_weight), const(c.y_x_weight), const(c.zbar_z_weight),
            const(c.zbar_y_weight), const(c.grad_step), const(c.prox_gamma),
            const(c.correction),
        )
        S = (c.correction * L) * (ZB - Z[1:])
        beta = np.full(horizon, c.y_x_weight)
        delta = np.full(horizon, 1.0 / c.correction)
    else:
        rq = math.sqrt(q)
        m = 0.0 if method == "prox_grad" else (1.0 - rq) / (1.0 + rq)
        X, Y, Z, ZB, G = backend.run_pg(*args, m, horizon)
        S = L * (ZB - Z[1:])
        beta = delta = [None] * horizon
    records = [
        IterateRecord(
            k=k, x_k=X[k], z_k=Z[k], y_k=Y[k], zbar_next=ZB[k], grad_f_y=G[k],
            s_g_next=S[k], beta_k=_opt(beta[k]), delta_k=_opt(delta[k]), A_k=A[k],
            x_next=X[k + 1], z_next=Z[k + 1],
        )
        for k in range(horizon)
    ]
    records.append(IterateRecord(k=horizon, x_k=X[horizon], z_k=Z[horizon], A_k=A[horizon]))
    return records, history


def _opt(v):
    return None if v is None else float(v)


def run_method(
    instance: CompositeInstance,
    method: str,
    x0,
    horizon: int,
    *,
    use_kernels: bool = True,
    backend=None,
    seed: Optional[int] = None,
) -> Trace:
    """Run ``method`` for ``horizon`` iterations and return the full trace.

    Diagonal quadratic instances with a built-in g use the kernel backend
    (compiled when available); anything else goes through the step functions.
    The trace holds ``horizon + 1`` records, the last one terminal.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    x0 = np.array(x0, dtype=float)
    if x0.shape != (instance.dim,):
        raise ValueError(f"x0 must have shape ({instance.dim},), got {x0.shape}")
    if method == "prox_item" and horizon > max_horizon(instance.params.q):
        raise ScheduleOverflowError(instance.params.q, max_horizon(instance.params.q))
    if use_kernels and instance.quad is not None:
        records, history = _run_kernel(instance, method, x0, horizon, backend or kernels)
    else:
        records, history = _run_generic(instance, method, x0, horizon)
    y_m1 = s_g0 = None
    if horizon >= 1:
        y_m1 = records[0].y_k
        s_g0 = records[0].s_g_next
    return Trace(
        instance_id=instance.id,
        method=method,
        params=instance.params,
        x0=x0,
        records=tuple(records),
        schedule_history=tuple(history),
        instance=instance,
        seed=seed,
        y_minus1=y_m1,
        s_g_0=s_g0,
    )


# ---------------------------------------------------------------------------
# serialization

def trace_columns(dim: int) -> list[str]:
    cols = ["k"]
    for name in VECTOR_FIELDS:
        cols += [f"{name}_{i}" for i in range(dim)]
    return cols + list(SCALAR_FIELDS)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_trace(trace: Trace, csv_path, json_path=None, extra: Optional[dict] = None) -> None:
    """CSV with one row per record plus a JSON sidecar with metadata."""
    n = trace.dim
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_columns(n))
        for rec in trace.records:
            row = [str(rec.k)]
            for name in VECTOR_FIELDS:
                v = getattr(rec, name)
                row += [""] * n if v is None else [_fmt(t) for t in v]
            row += [_fmt(rec.beta_k), _fmt(rec.delta_k), _fmt(rec.A_k)]
            w.writerow(row)
    if json_path is None:
        return
    meta = {
        "format": "proxitem-trace/1",
        "instance_id": trace.instance_id,
        "method": trace.method,
        "mu": trace.params.mu,
        "L": trace.params.L,
        "q": trace.params.q,
        "dim": n,
        "horizon": trace.horizon,
        "seed": trace.seed,
        "x0": trace.x0.tolist(),
        "trace_csv": str(getattr(csv_path, "name", csv_path)).rsplit("/", 1)[-1],
        "instance": None,
    }
    if trace.instance is not None and trace.instance.quad is not None:
        meta["instance"] = instance_to_dict(trace.instance)
    if extra:
        meta.update(extra)
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


class TraceFormatError(ValueError):
    pass


def _parse(cell: str):
    return None if cell == "" else float(cell)


def read_trace(csv_path, json_path) -> tuple[Trace, dict]:
    """Inverse of :func:`write_trace`; returns the trace and the sidecar dict."""
    with open(json_path) as fh:
        meta = json.load(fh)
    try:
        n = int(meta["dim"])
        method = meta["method"]
        params = ProblemClassParams(float(meta["mu"]), float(meta["L"]))
    except (KeyError, ValueError) as exc:
        raise TraceFormatError(f"bad trace sidecar: {exc}") from None
    if method not in METHODS:
        raise TraceFormatError(f"unknown method {method!r} in sidecar")
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != trace_columns(n):
        raise TraceFormatError("trace header does not match the sidecar dimension")
    records = []
    for idx, row in enumerate(rows[1:]):
        if len(row) != len(rows[0]):
            raise TraceFormatError(f"row {idx + 1} has {len(row)} cells, expected {len(rows[0])}")
        if int(row[0]) != idx:
            raise TraceFormatError(f"row {idx + 1} has k={row[0]}, expected {idx}")
        vals = {}
        pos = 1
        for name in VECTOR_FIELDS:
            cells = row[pos:pos + n]
            pos += n
            if all(c == "" for c in cells):
                vals[name] = None
            elif any(c == "" for c in cells):
                raise TraceFormatError(f"row {idx + 1}: partially empty {name}")
            else:
                vals[name] = np.array([float(c) for c in cells])
        beta, delta, A = (_parse(c) for c in row[pos:pos + 3])
        records.append(IterateRecord(k=idx, beta_k=beta, delta_k=delta, A_k=A, **vals))
    if not records:
        raise TraceFormatError("trace has no records")
    records = [
        IterateRecord(
            **{**r.__dict__, "x_next": nxt.x_k, "z_next": nxt.z_k}
        ) if not r.is_terminal else r
        for r, nxt in zip(records, records[1:] + [None])
    ]
    history = ()
    if method == "prox_item":
        if any(r.A_k is None for r in records):
            raise TraceFormatError("prox_item trace is missing A_k values")
        history = tuple(ScheduleState.at(r.k, params.q, r.A_k) for r in records)
    instance = instance_from_dict(meta["instance"]) if meta.get("instance") else None
    horizon = len(records) - 1
    x0 = np.array(meta["x0"], dtype=float)
    trace = Trace(
        instance_id=meta["instance_id"],
        method=method,
        params=params,
        x0=x0,
        records=tuple(records),
        schedule_history=history,
        instance=instance,
        seed=meta.get("seed"),
        y_minus1=records[0].y_k if horizon >= 1 else None,
        s_g_0=records[0].s_g_next if horizon >= 1 else None,
    )
    return trace, meta
