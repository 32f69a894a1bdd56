"""Runtime evaluation of the convergence certificates on recorded traces.

Everything here reads a :class:`~proxitem.solvers.Trace` and a
:class:`SolutionCertificate`; nothing re-runs the method. The one-step slack
is evaluated from its long unsimplified form so that a zero value is an
independent confirmation of the algebra, not a restatement of it.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .problem import CompositeInstance, SmoothOracle, fixed_point_residual, solve_reference
from .schedule import StepCoefficients, p_coefficients
from .solvers import Trace

__all__ = [
    "SolutionCertificate",
    "make_certificate",
    "reference_certificate",
    "residual_f",
    "residual_g",
    "lyapunov_value",
    "lyapunov_tmm_value",
    "slack_value",
    "weighted_sum_terms",
    "check_lyapunov_monotone",
    "check_distance_bound",
    "check_span_membership",
    "span_residual",
    "interpolation_audit",
    "AuditResult",
    "theorem_bound_slack",
    "windowed_rate",
    "CertificateReport",
    "build_report",
    "write_report",
]

CERT_RTOL = 1e-8
P_RTOL = 1e-10
INTERP_RTOL = 1e-10
SPAN_RTOL = 1e-8
SPAN_HORIZON = 25


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class SolutionCertificate:
    x_star: np.ndarray
    grad_f_star: np.ndarray
    s_g_star: np.ndarray
    f_star: float
    g_star: float
    tol: float = 0.0


def make_certificate(instance: CompositeInstance, x_star, tol: float = 0.0) -> SolutionCertificate:
    """Optimality data at ``x_star``; ``tol`` is its fixed-point residual budget."""
    x_star = np.asarray(x_star, dtype=float)
    grad = np.asarray(instance.f.gradient(x_star), dtype=float)
    g_star = float(instance.g.value(x_star))
    if not math.isfinite(g_star):
        raise CertificateError("g(x_star) is not finite")
    return SolutionCertificate(
        x_star=x_star,
        grad_f_star=grad,
        s_g_star=-grad,
        f_star=float(instance.f.value(x_star)),
        g_star=g_star,
        tol=float(tol),
    )


def reference_certificate(instance: CompositeInstance, tol: float = 1e-12) -> SolutionCertificate:
    """Certificate at a reference solution with a distance budget attached.

    The prox-gradient map with step 1/L contracts by (1 - q), so a
    fixed-point residual r places the point within r / q of the minimizer.
    """
    x = solve_reference(instance, tol)
    r = fixed_point_residual(instance, x)
    return make_certificate(instance, x, r / instance.params.q)


# ---------------------------------------------------------------------------
# interpolation residuals

def _If(fx, gx, fy, gy, x, y, mu, L):
    d = x - y
    w = gx - gy - mu * d
    return fx - fy - np.dot(gy, d) - 0.5 * mu * np.dot(d, d) - np.dot(w, w) / (2.0 * (L - mu))


def residual_f(f: SmoothOracle, x, y) -> float:
    mu, L = f.params.mu, f.params.L
    if not mu < L:
        raise ValueError("residual_f needs mu < L")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(_If(f.value(x), f.gradient(x), f.value(y), f.gradient(y), x, y, mu, L))


def residual_g(g_value_x: float, g_value_y: float, s, x, y) -> float:
    if math.isinf(g_value_x):
        return g_value_x
    return float(g_value_x - g_value_y - np.dot(s, np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))


# ---------------------------------------------------------------------------
# evaluation context over one trace


class _Eval:
    """Cached oracle values over a trace; indices follow the method's k."""

    def __init__(self, trace: Trace, cert: SolutionCertificate):
        if trace.instance is None:
            raise CertificateError("trace carries no instance; oracle values are needed")
        self.trace = trace
        self.cert = cert
        self.inst = trace.instance
        self.mu, self.L = trace.params.mu, trace.params.L
        self.q = trace.params.q
        self._fy: dict = {}
        self._gz: dict = {}

    # points -------------------------------------------------------------
    def y(self, k):
        return self.trace.y(k)

    def grad_y(self, k):
        return self.trace.records[0 if k == -1 else k].grad_f_y

    def f_y(self, k):
        k = 0 if k == -1 else k
        if k not in self._fy:
            self._fy[k] = float(self.inst.f.value(self.trace.records[k].y_k))
        return self._fy[k]

    def z(self, k):
        return self.trace.z(k)

    def s(self, k):
        return self.trace.s_g(k)

    def g_z(self, k):
        if k not in self._gz:
            v = float(self.inst.g.value(self.z(k)))
            if not math.isfinite(v):
                raise CertificateError(f"g(z^{k}) is not finite; the prox oracle is broken")
            self._gz[k] = v
        return self._gz[k]

    # residuals ------------------------------------------------------------
    def If_y_star(self, k):
        c = self.cert
        return _If(self.f_y(k), self.grad_y(k), c.f_star, c.grad_f_star, self.y(k), c.x_star, self.mu, self.L)

    def If_star_y(self, k):
        c = self.cert
        return _If(c.f_star, c.grad_f_star, self.f_y(k), self.grad_y(k), c.x_star, self.y(k), self.mu, self.L)

    def If_y_y(self, i, j):
        return _If(self.f_y(i), self.grad_y(i), self.f_y(j), self.grad_y(j), self.y(i), self.y(j), self.mu, self.L)

    def Ig_star_z(self, k):
        return residual_g(self.cert.g_star, self.g_z(k), self.s(k), self.cert.x_star, self.z(k))

    def Ig_z_star(self, k):
        return residual_g(self.g_z(k), self.cert.g_star, self.cert.s_g_star, self.z(k), self.cert.x_star)

    def Ig_z_z(self, i, j):
        return residual_g(self.g_z(i), self.g_z(j), self.s(j), self.z(i), self.z(j))

    def dist2(self, k):
        d = self.z(k) - self.cert.x_star
        return float(np.dot(d, d))

    def sdist2(self, i, j=None):
        d = self.s(i) - (self.cert.s_g_star if j is None else self.s(j))
        return float(np.dot(d, d))


def _require(trace: Trace, method: str):
    if method == "prox_item" and trace.method != "prox_item":
        raise CertificateError(f"this certificate needs a prox_item trace, got {trace.method}")
    if method == "prox_tmm" and trace.method != "prox_tmm":
        raise CertificateError(f"this certificate needs a prox_tmm trace, got {trace.method}")


def _scale(trace: Trace, cert: SolutionCertificate, k: int, mode: str = "item") -> float:
    d0 = float(np.sum((trace.x0 - cert.x_star) ** 2))
    base = trace.params.L * max(1.0, d0)
    if mode == "item":
        return base * max(1.0, trace.A(k + 1))
    return base


# ---------------------------------------------------------------------------
# Lyapunov functions

def _lyap(ev: _Eval, k: int) -> float:
    t = ev.trace
    if k == 0:
        return ev.L * ev.dist2(0)
    q, mu, L = ev.q, ev.mu, ev.L
    A, sigma = t.A(k), t.sigma(k)
    return float(
        (1.0 - q) * A * ev.If_y_star(k - 1)
        + q * A * ev.Ig_star_z(k)
        + (q * A + 1.0 - sigma) * ev.Ig_z_star(k)
        + A / (2.0 * L) * ev.sdist2(k)
        + (L + mu * A) * ev.dist2(k)
    )


def _lyap_inf(ev: _Eval, k: int) -> float:
    if k < 1:
        raise CertificateError("the stationary Lyapunov function starts at k = 1")
    q, mu, L = ev.q, ev.mu, ev.L
    rq = math.sqrt(q)
    return float(
        (1.0 - q) * ev.If_y_star(k - 1)
        + q * ev.Ig_star_z(k)
        + rq * (rq - 1.0) * ev.Ig_z_star(k)
        + 1.0 / (2.0 * L) * ev.sdist2(k)
        + mu * ev.dist2(k)
    )


def lyapunov_value(trace: Trace, k: int, cert: SolutionCertificate) -> float:
    _require(trace, "prox_item")
    return _lyap(_Eval(trace, cert), k)


def lyapunov_tmm_value(trace: Trace, k: int, cert: SolutionCertificate) -> float:
    _require(trace, "prox_tmm")
    return _lyap_inf(_Eval(trace, cert), k)


# ---------------------------------------------------------------------------
# slack terms

def _bracket(grad_at, a, b, mu):
    # <grad, a - b> + (mu/2)||a - b||^2
    d = a - b
    return np.dot(grad_at, d) + 0.5 * mu * np.dot(d, d)


def _sq(v):
    return float(np.dot(v, v))


def _raw_slack(ev: _Eval, k: int, c: dict) -> float:
    """Unsimplified one-step slack with scalar weights ``c``.

    ``c`` maps: fs (weight on I_f(x*, y^k)), fp (I_f(y^{k-1}, y^k)),
    fy (I_f(y^k, x*)), fprev (I_f(y^{k-1}, x*) in the Lyapunov function),
    g1 / g1_prev, g2 / g2_prev, g3, s_prev, s_next, d_next, d_prev and the
    two added squared-norm weights a1, a2.
    """
    mu, L = ev.mu, ev.L
    cert = ev.cert
    xs, gs, ss = cert.x_star, cert.grad_f_star, cert.s_g_star
    yk, ykm = ev.y(k), ev.y(k - 1)
    gk, gkm = ev.grad_y(k), ev.grad_y(k - 1)
    zk, zk1 = ev.z(k), ev.z(k + 1)
    sk, sk1 = ev.s(k), ev.s(k + 1)
    inv = 1.0 / (2.0 * (L - mu))
    terms = [
        c["a1"] / (2.0 * L) * _sq(sk1 - ss),
        c["a2"] / (2.0 * L) * _sq(sk - sk1),
        -c["fs"] * _bracket(gk, xs, yk, mu),
        -c["fs"] * inv * _sq(gs - gk - mu * (xs - yk)),
        -c["fp"] * _bracket(gk, ykm, yk, mu),
        -c["fp"] * inv * _sq(gkm - gk - mu * (ykm - yk)),
        -c["fy"] * _bracket(gs, yk, xs, mu),
        -c["fy"] * inv * _sq(gk - gs - mu * (yk - xs)),
        +c["fprev"] * _bracket(gs, ykm, xs, mu),
        +c["fprev"] * inv * _sq(gkm - gs - mu * (ykm - xs)),
        -c["g1"] * np.dot(sk1, xs - zk1),
        +c["g1_prev"] * np.dot(sk, xs - zk),
        -c["g2"] * np.dot(ss, zk1 - xs),
        +c["g2_prev"] * np.dot(ss, zk - xs),
        -c["g3"] * np.dot(sk, zk1 - zk),
        -c["s_prev"] / (2.0 * L) * _sq(sk - ss),
        +c["s_next"] / (2.0 * L) * _sq(sk1 - ss),
        +c["d_next"] * ev.dist2(k + 1),
        -c["d_prev"] * ev.dist2(k),
    ]
    return float(sum(terms))


def _item_weights(trace: Trace, k: int) -> dict:
    q, mu, L = trace.params.q, trace.params.mu, trace.params.L
    A, A1, s = trace.A(k), trace.A(k + 1), trace.sigma(k)
    return {
        "a1": A1 - A,
        "a2": A,
        "fs": (1.0 - q) * (A1 - A),
        "fp": (1.0 - q) * A,
        "fy": (1.0 - q) * A1,
        "fprev": (1.0 - q) * A,
        "g1": (1.0 + q) * A1 - A,
        "g1_prev": q * A,
        "g2": (1.0 + q) * A1 - A - s + 1.0,
        "g2_prev": q * A + 1.0 - s,
        "g3": s - 1.0,
        "s_prev": A,
        "s_next": A1,
        "d_next": L + mu * A1,
        "d_prev": L + mu * A,
    }


def _tmm_weights(trace: Trace) -> dict:
    q, mu = trace.params.q, trace.params.mu
    rq = math.sqrt(q)
    r2 = (1.0 - rq) ** 2
    return {
        "a1": 1.0 - r2,
        "a2": r2,
        "fs": (1.0 - q) * (1.0 - r2),
        "fp": (1.0 - q) * r2,
        "fy": 1.0 - q,
        "fprev": (1.0 - q) * r2,
        "g1": 1.0 + q - r2,
        "g1_prev": q * r2,
        "g2": 1.0 + q - r2 - rq * r2,
        "g2_prev": (q - rq) * r2,
        "g3": rq * r2,
        "s_prev": r2,
        "s_next": 1.0,
        "d_next": mu,
        "d_prev": mu * r2,
    }


def slack_value(trace: Trace, k: int, cert: SolutionCertificate, mode: str = "item"):
    """Raw one-step slack at step k.

    Item mode returns ``(S_k, (p0, p1, p2, p3))`` with the polynomial
    coefficients taken from the recorded schedule; tmm mode returns
    ``(S_k_inf, None)`` and needs k >= 1.
    """
    if k < 0 or k >= trace.horizon:
        raise CertificateError(f"slack at k={k} needs records k and k+1 (horizon {trace.horizon})")
    ev = _Eval(trace, cert)
    if mode == "item":
        _require(trace, "prox_item")
        S = _raw_slack(ev, k, _item_weights(trace, k))
        rec = trace.records[k]
        coeffs = StepCoefficients(rec.beta_k, rec.delta_k, trace.A(k + 1), trace.sigma(k + 1))
        return S, p_coefficients(trace.schedule_history[k], coeffs)
    if mode == "tmm":
        _require(trace, "prox_tmm")
        if k < 1:
            raise CertificateError("the stationary slack starts at k = 1")
        return _raw_slack(ev, k, _tmm_weights(trace)), None
    raise ValueError(f"unknown mode {mode!r}")


def weighted_sum_terms(trace: Trace, k: int, cert: SolutionCertificate, which: str = "lyapunov") -> dict:
    """Coefficient * residual products of the nonnegative weighted sums.

    ``which`` selects the sum behind the one-step inequality (``lyapunov``)
    or the distance estimate (``distance``); the mode follows the trace.
    """
    ev = _Eval(trace, cert)
    q = trace.params.q
    if trace.method == "prox_item":
        A, A1, s, s1 = trace.A(k), trace.A(k + 1), trace.sigma(k), trace.sigma(k + 1)
        w_fs, w_fp = (1.0 - q) * (A1 - A), (1.0 - q) * A
        w_fy = (1.0 - q) * A1
        if which == "lyapunov":
            w_g1, w_g2 = A1 - A, A1 - A + s1 - s
        else:
            w_g1, w_g2 = (1.0 + q) * A1 - A, (1.0 + q) * A1 - A - s + 1.0
        w_g3 = s - 1.0
    elif trace.method == "prox_tmm":
        if k < 1:
            raise CertificateError("the stationary weighted sums start at k = 1")
        rq = math.sqrt(q)
        r2 = (1.0 - rq) ** 2
        w_fs, w_fp, w_fy = (1.0 - q) * (1.0 - r2), (1.0 - q) * r2, 1.0 - q
        if which == "lyapunov":
            w_g1, w_g2 = 1.0 - r2, (1.0 + rq) * (1.0 - r2)
        else:
            w_g1, w_g2 = 1.0 + q - r2, 1.0 + q - r2 - rq * r2
        w_g3 = rq * r2
    else:
        raise CertificateError(f"no weighted sums for {trace.method}")
    terms = {
        "If(x*,y^k)": w_fs * ev.If_star_y(k),
        "If(y^k-1,y^k)": w_fp * ev.If_y_y(k - 1, k),
        "Ig(x*,z^k+1,s^k+1)": w_g1 * ev.Ig_star_z(k + 1),
        "Ig(z^k+1,x*,s*)": w_g2 * ev.Ig_z_star(k + 1),
        # zero coefficient at k = 0 for Prox-ITEM; the product is never formed
        "Ig(z^k+1,z^k,s^k)": 0.0 if w_g3 == 0.0 else w_g3 * ev.Ig_z_z(k + 1, k),
    }
    if which == "distance":
        terms["If(y^k,x*)"] = w_fy * ev.If_y_star(k)
    return {key: float(v) for key, v in terms.items()}


# ---------------------------------------------------------------------------
# checks

def theorem_bound_slack(trace: Trace, cert: SolutionCertificate) -> float:
    """Additive budget for bound checks when x* is only known to ``cert.tol``."""
    d0 = float(np.linalg.norm(trace.x0 - cert.x_star))
    return 1e-9 * d0**2 + (2.0 * d0 + cert.tol) * cert.tol


def check_lyapunov_monotone(trace: Trace, cert: SolutionCertificate) -> list:
    """Per-step verdicts; entry k compares step k to step k+1 (None where undefined)."""
    ev = _Eval(trace, cert)
    N = trace.horizon
    out: list = [None] * N
    if trace.method == "prox_item":
        V = [_lyap(ev, k) for k in range(N + 1)]
        for k in range(N):
            out[k] = bool(V[k + 1] <= V[k] + CERT_RTOL * _scale(trace, cert, k))
    elif trace.method == "prox_tmm":
        r2 = (1.0 - math.sqrt(trace.params.q)) ** 2
        tol = CERT_RTOL * _scale(trace, cert, 0, "tmm")
        V = [None] + [_lyap_inf(ev, k) for k in range(1, N + 1)]
        for k in range(1, N):
            out[k] = bool(V[k + 1] <= r2 * V[k] + tol)
    else:
        raise CertificateError(f"no Lyapunov function for {trace.method}")
    return out


def check_distance_bound(trace: Trace, cert: SolutionCertificate) -> dict:
    """Distance bounds along the trace.

    Prox-ITEM: ``lemma[k]`` checks (L + mu A_{k+1})||z^{k+1} - x*||^2 <= V_k
    and ``theorem[k]`` checks the (1 + q A_k)^{-1} bound. Prox-TMM:
    ``lemma[k]`` checks mu||z^{k+1} - x*||^2 <= (1 - sqrt q)^2 V_k^inf.
    """
    ev = _Eval(trace, cert)
    N = trace.horizon
    lemma: list = [None] * (N + 1)
    theorem: list = [None] * (N + 1)
    if trace.method == "prox_item":
        eps = theorem_bound_slack(trace, cert)
        d0 = ev.dist2(0)
        for k in range(N + 1):
            theorem[k] = bool(ev.dist2(k) <= d0 / (1.0 + ev.q * trace.A(k)) + eps)
            if k < N:
                lhs = (ev.L + ev.mu * trace.A(k + 1)) * ev.dist2(k + 1)
                lemma[k] = bool(lhs <= _lyap(ev, k) + CERT_RTOL * _scale(trace, cert, k))
    elif trace.method == "prox_tmm":
        r2 = (1.0 - math.sqrt(ev.q)) ** 2
        tol = CERT_RTOL * _scale(trace, cert, 0, "tmm")
        for k in range(1, N):
            lemma[k] = bool(ev.mu * ev.dist2(k + 1) <= r2 * _lyap_inf(ev, k) + tol)
    else:
        raise CertificateError(f"no distance bound for {trace.method}")
    return {"lemma": lemma, "theorem": theorem}


def span_residual(trace: Trace, k: int) -> float:
    """Relative least-squares residual of z^k - x^0 against the oracle outputs."""
    target = trace.z(k) - trace.x0
    tn = float(np.linalg.norm(target))
    if tn == 0.0:
        return 0.0
    cols = []
    for ell in range(k):
        rec = trace.records[ell]
        for v in (rec.grad_f_y, rec.s_g_next):
            n = float(np.linalg.norm(v))
            if n > 0.0:
                cols.append(v / n)
    if not cols:
        return 1.0
    M = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(M, target, rcond=None)
    return float(np.linalg.norm(M @ coef - target) / tn)


def check_span_membership(trace: Trace, horizon: Optional[int] = None, rtol: float = SPAN_RTOL) -> list:
    """Whether z^k lies in x^0 + span of the gradients and prox residuals before k."""
    _require(trace, "prox_item")
    K = trace.horizon if horizon is None else min(horizon, trace.horizon)
    return [span_residual(trace, k) <= rtol for k in range(K + 1)]


@dataclass
class AuditResult:
    residuals: np.ndarray
    scale: np.ndarray
    ok: bool
    worst: float

    @property
    def n_points(self) -> int:
        return self.residuals.shape[0]


def interpolation_audit(points, mu: float, L: float = math.inf, rtol: float = INTERP_RTOL) -> AuditResult:
    """Pairwise interpolation residuals for triplets ``(x_i, F_i, u_i)``.

    Entry (i, j) is F_i - F_j - <u_j, x_i - x_j> - (mu/2)||x_i - x_j||^2
    - ||u_i - u_j - mu (x_i - x_j)||^2 / (2 (L - mu)), the last term dropped
    for L = inf. ``worst`` is the most negative residual relative to its scale.
    """
    m = len(points)
    if m == 0:
        return AuditResult(np.zeros((0, 0)), np.zeros((0, 0)), True, 0.0)
    X = np.stack([np.asarray(p[0], dtype=float) for p in points])
    F = np.array([float(p[1]) for p in points])
    U = np.stack([np.asarray(p[2], dtype=float) for p in points])
    R = np.zeros((m, m))
    S = np.ones((m, m))
    for i in range(m):
        D = X[i] - X  # rows: x_i - x_j
        d2 = np.einsum("ij,ij->i", D, D)
        r = F[i] - F - np.einsum("ij,ij->i", U, D) - 0.5 * mu * d2
        if math.isfinite(L):
            W = U[i] - U - mu * D
            r = r - np.einsum("ij,ij->i", W, W) / (2.0 * (L - mu))
            extra = L * d2
        else:
            extra = np.linalg.norm(U, axis=1) * np.sqrt(d2)
        R[i] = r
        S[i] = np.maximum.reduce([np.ones(m), np.abs(F[i]) * np.ones(m), np.abs(F), extra])
    np.fill_diagonal(R, 0.0)
    rel = R / S
    worst = float(rel.min())
    return AuditResult(R, S, bool(np.all(R >= -rtol * S)), worst)


def windowed_rate(dists, start: int, stop: int) -> Optional[float]:
    """Geometric-mean contraction of a distance sequence over [start, stop].

    An exact zero at ``start`` means the iterates already sit on the
    solution and the contraction is reported as 0.
    """
    if stop >= len(dists) or start >= stop:
        return None
    a, b = float(dists[start]), float(dists[stop])
    if a == 0.0:
        return 0.0
    return (b / a) ** (1.0 / (stop - start))


# ---------------------------------------------------------------------------
# full report

@dataclass
class CertificateReport:
    method: str
    instance_id: str
    per_k: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "instance_id": self.instance_id,
            "per_k": self.per_k,
            "summary": self.summary,
        }

    @property
    def ok(self) -> bool:
        return bool(self.summary.get("all_ok"))


def _all(xs) -> Optional[bool]:
    xs = [x for x in xs if x is not None]
    return None if not xs else bool(all(xs))


def _trace_triplets(trace: Trace, cert: SolutionCertificate):
    inst = trace.instance
    f_pts = []
    g_pts = []
    for rec in trace.records:
        if not rec.is_terminal:
            f_pts.append((rec.y_k, float(inst.f.value(rec.y_k)), rec.grad_f_y))
    seen = set()
    for rec in trace.records:
        for v in (rec.x_k, rec.z_k):
            key = v.tobytes()
            if key not in seen:
                seen.add(key)
                f_pts.append((v, float(inst.f.value(v)), np.asarray(inst.f.gradient(v), dtype=float)))
    f_pts.append((cert.x_star, cert.f_star, cert.grad_f_star))
    for k in range(1, trace.horizon + 1):
        z = trace.z(k)
        g_pts.append((z, float(inst.g.value(z)), trace.s_g(k)))
    g_pts.append((cert.x_star, cert.g_star, cert.s_g_star))
    return f_pts, g_pts


def build_report(
    trace: Trace,
    cert: SolutionCertificate,
    *,
    span_horizon: int = SPAN_HORIZON,
    audit: bool = True,
    rate_window: tuple = (50, 150),
) -> CertificateReport:
    """Evaluate every certificate that applies to the trace's method."""
    ev = _Eval(trace, cert)
    N = trace.horizon
    m = trace.method
    none = lambda: [None] * (N + 1)  # noqa: E731
    per_k = {
        "k": list(range(N + 1)),
        "V": none(), "V_inf": none(), "S": none(), "S_inf": none(),
        "p0": none(), "p1": none(), "p2": none(), "p3": none(),
        "bound_lhs": [ev.dist2(k) for k in range(N + 1)],
        "bound_rhs": none(),
        "monotone_ok": none(), "bound_ok": none(), "slack_ok": none(), "span_ok": none(),
        "lemma_ok": none(), "terms_ok": none(),
        "I_f": [None] + [float(ev.If_y_star(k - 1)) for k in range(1, N + 1)],
        "I_g": [None] + [float(ev.Ig_z_star(k)) for k in range(1, N + 1)],
    }
    summary: dict = {"horizon": N, "q": trace.params.q, "x_star_tol": cert.tol}
    d0 = ev.dist2(0)
    if m == "prox_item":
        eps = theorem_bound_slack(trace, cert)
        per_k["V"] = [_lyap(ev, k) for k in range(N + 1)]
        per_k["bound_rhs"] = [d0 / (1.0 + ev.q * trace.A(k)) for k in range(N + 1)]
        per_k["bound_ok"] = [
            bool(l <= r + eps) for l, r in zip(per_k["bound_lhs"], per_k["bound_rhs"])
        ]
        per_k["monotone_ok"] = check_lyapunov_monotone(trace, cert) + [None]
        per_k["lemma_ok"] = check_distance_bound(trace, cert)["lemma"]
        for k in range(N):
            S, p = slack_value(trace, k, cert, "item")
            tol = CERT_RTOL * _scale(trace, cert, k)
            ptol = P_RTOL * max(1.0, trace.A(k + 1))
            per_k["S"][k] = S
            for i in range(4):
                per_k[f"p{i}"][k] = p[i]
            per_k["slack_ok"][k] = bool(abs(S) <= tol and all(abs(v) <= ptol for v in p))
            per_k["terms_ok"][k] = _terms_ok(trace, k, cert, tol)
        span = check_span_membership(trace, span_horizon)
        per_k["span_ok"][: len(span)] = span
        summary["span_member"] = _all(per_k["span_ok"])
        # diagnostic ordering: a theorem failure must come with a lemma or monotonicity failure
        lemma_fail = any(x is False for x in per_k["lemma_ok"] + per_k["monotone_ok"])
        summary["chain_consistent"] = bool(all(per_k["bound_ok"]) or lemma_fail)
    elif m == "prox_tmm":
        r2 = (1.0 - math.sqrt(ev.q)) ** 2
        tol = CERT_RTOL * _scale(trace, cert, 0, "tmm")
        per_k["V_inf"] = [None] + [_lyap_inf(ev, k) for k in range(1, N + 1)]
        per_k["bound_lhs"] = [ev.mu * ev.dist2(k) for k in range(N + 1)]
        for k in range(2, N + 1):
            per_k["bound_rhs"][k] = r2 * per_k["V_inf"][k - 1]
        per_k["bound_ok"] = [
            None if r is None else bool(l <= r + tol)
            for l, r in zip(per_k["bound_lhs"], per_k["bound_rhs"])
        ]
        per_k["monotone_ok"] = check_lyapunov_monotone(trace, cert) + [None]
        per_k["lemma_ok"] = check_distance_bound(trace, cert)["lemma"]
        for k in range(1, N):
            S, _ = slack_value(trace, k, cert, "tmm")
            per_k["S_inf"][k] = S
            per_k["slack_ok"][k] = bool(abs(S) <= tol)
            per_k["terms_ok"][k] = _terms_ok(trace, k, cert, tol)
        dists = [math.sqrt(ev.dist2(k)) for k in range(N + 1)]
        summary["tmm_rate"] = windowed_rate(dists, *rate_window)
        summary["tmm_rate_bound"] = 1.0 - math.sqrt(ev.q)
        if N >= 1:
            summary["tmm_constant"] = math.sqrt(max(per_k["V_inf"][1], 0.0) / ev.mu)
    summary["lyapunov_monotone"] = _all(per_k["monotone_ok"])
    summary["bound_holds"] = _all(per_k["bound_ok"] + per_k["lemma_ok"])
    summary["slack_zero"] = _all(per_k["slack_ok"])
    summary["terms_nonnegative"] = _all(per_k["terms_ok"])
    if audit:
        f_pts, g_pts = _trace_triplets(trace, cert)
        fa = interpolation_audit(f_pts, trace.params.mu, trace.params.L)
        ga = interpolation_audit(g_pts, 0.0, math.inf)
        summary["interpolation_f_ok"] = fa.ok
        summary["interpolation_g_ok"] = ga.ok
        summary["interpolation_f_worst"] = fa.worst
        summary["interpolation_g_worst"] = ga.worst
    verdicts = [
        summary.get(key)
        for key in (
            "lyapunov_monotone", "bound_holds", "slack_zero", "terms_nonnegative",
            "span_member", "interpolation_f_ok", "interpolation_g_ok",
        )
    ]
    summary["residuals_finite"] = all(
        math.isfinite(v) for key in ("I_f", "I_g") for v in per_k[key] if v is not None
    )
    verdicts.append(summary["residuals_finite"])
    summary["all_ok"] = all(v is not False for v in verdicts)
    return CertificateReport(method=m, instance_id=trace.instance_id, per_k=per_k, summary=summary)


def _terms_ok(trace, k, cert, tol) -> bool:
    ok = True
    for which in ("lyapunov", "distance"):
        terms = weighted_sum_terms(trace, k, cert, which)
        ok = ok and all(v >= -tol for v in terms.values())
    return bool(ok)


REPORT_COLUMNS = (
    "k", "V", "V_inf", "S", "S_inf", "p0", "p1", "p2", "p3", "bound_lhs", "bound_rhs",
    "monotone_ok", "bound_ok", "slack_ok", "span_ok",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def write_report(report: CertificateReport, json_path, csv_path=None) -> None:
    with open(json_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if csv_path is None:
        return
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for k in report.per_k["k"]:
            w.writerow([_cell(report.per_k[c][k]) for c in REPORT_COLUMNS])
