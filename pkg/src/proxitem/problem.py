"""Composite problem class, oracles, built-in instances and a reference solver.

A problem is ``minimize f(x) + g(x)`` over R^n where ``f`` is mu-strongly
convex with an L-Lipschitz gradient and ``g`` is convex, proper and lsc,
accessed only through its proximal operator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels

__all__ = [
    "ProblemClassParams",
    "SmoothOracle",
    "ProxOracle",
    "GSpec",
    "QuadraticData",
    "CompositeInstance",
    "ReferenceSolveError",
    "make_quadratic_instance",
    "eval_smooth",
    "apply_prox",
    "fixed_point_residual",
    "solve_reference",
    "builtin_instance",
    "BUILTIN_IDS",
    "instance_to_dict",
    "instance_from_dict",
    "load_instance",
    "save_instance",
]

# indicator membership slack; prox outputs are feasible only up to rounding
FEAS_TOL = 1e-12
REFERENCE_MAX_ITER = 10**7
G_KINDS = ("zero", "l1", "box", "nonneg", "sq_l2")


@dataclass(frozen=True)
class ProblemClassParams:
    mu: float
    L: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.L)):
            raise ValueError("mu and L must be finite")
        if not 0.0 < self.mu < self.L:
            raise ValueError(f"need 0 < mu < L, got mu={self.mu}, L={self.L}")

    @property
    def q(self) -> float:
        return self.mu / self.L


@dataclass(frozen=True)
class SmoothOracle:
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    params: ProblemClassParams


@dataclass(frozen=True)
class ProxOracle:
    """``value`` may return ``math.inf``; ``prox(x, gamma)`` is the proximal map."""

    value: Callable[[np.ndarray], float]
    prox: Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class GSpec:
    """Built-in nonsmooth term.

    kind is one of ``zero``, ``l1`` (lam*||x||_1), ``box`` (indicator of
    [lo, hi]), ``nonneg`` (indicator of the nonnegative orthant) or ``sq_l2``
    ((lam/2)*||x||^2).
    """

    kind: str = "zero"
    lam: float = 0.0
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in G_KINDS:
            raise ValueError(f"unknown g kind {self.kind!r}; expected one of {G_KINDS}")
        if self.kind in ("l1", "sq_l2") and not self.lam >= 0.0:
            raise ValueError(f"{self.kind} needs lam >= 0, got {self.lam}")
        if self.kind == "box":
            if self.lo is None or self.hi is None:
                raise ValueError("box needs lo and hi")
            if any(a > b for a, b in zip(self.lo, self.hi)):
                raise ValueError("box needs lo <= hi componentwise")

    def bounds(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "box":
            lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (dim,)).copy()
            hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (dim,)).copy()
        elif self.kind == "nonneg":
            lo, hi = np.zeros(dim), np.full(dim, np.inf)
        else:
            lo, hi = np.full(dim, -np.inf), np.full(dim, np.inf)
        return lo, hi

    def to_dict(self) -> dict:
        params: dict = {}
        if self.kind in ("l1", "sq_l2"):
            params["lam"] = self.lam
        elif self.kind == "box":
            params["lo"] = list(self.lo)
            params["hi"] = list(self.hi)
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, d: dict) -> "GSpec":
        params = d.get("params", {}) or {}
        lo = params.get("lo")
        hi = params.get("hi")
        return cls(
            kind=d["kind"],
            lam=float(params.get("lam", 0.0)),
            lo=None if lo is None else tuple(float(v) for v in np.atleast_1d(lo)),
            hi=None if hi is None else tuple(float(v) for v in np.atleast_1d(hi)),
        )


@dataclass(frozen=True)
class QuadraticData:
    """Data of ``f(x) = 0.5*sum(diag*x**2) - <b, x>`` plus a built-in g."""

    diag: np.ndarray
    b: np.ndarray
    g_spec: GSpec


@dataclass(frozen=True)
class CompositeInstance:
    id: str
    dim: int
    f: SmoothOracle
    g: ProxOracle
    known_solution: Optional[np.ndarray] = None
    known_solution_tolerance: float = 0.0
    quad: Optional[QuadraticData] = field(default=None, compare=False)

    @property
    def params(self) -> ProblemClassParams:
        return self.f.params


class ReferenceSolveError(RuntimeError):
    def __init__(self, message: str, best_residual: float, best_point: np.ndarray):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_point = best_point


def _as_vector(x, dim: Optional[int] = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def _g_oracle(spec: GSpec, dim: int) -> ProxOracle:
    kind = spec.kind
    lam = spec.lam
    lo, hi = spec.bounds(dim)
    code = kernels.G_CODES[kind]

    def prox(x, gamma):
        return kernels.prox(code, np.asarray(x, dtype=float), gamma, lo, hi, lam)

    if kind == "zero":
        def value(x):
            return 0.0
    elif kind == "l1":
        def value(x):
            return lam * float(np.sum(np.abs(x)))
    elif kind == "sq_l2":
        def value(x):
            return 0.5 * lam * float(np.dot(x, x))
    else:
        def value(x):
            x = np.asarray(x, dtype=float)
            inside = np.all(x >= lo - FEAS_TOL) and np.all(x <= hi + FEAS_TOL)
            return 0.0 if inside else math.inf

    return ProxOracle(value=value, prox=prox)


def _separable_solution(diag: np.ndarray, b: np.ndarray, spec: GSpec) -> np.ndarray:
    # per-coordinate stationarity of 0.5*d*x^2 - b*x + g_i(x)
    if spec.kind == "zero":
        return b / diag
    if spec.kind == "l1":
        return np.sign(b) * np.maximum(np.abs(b) - spec.lam, 0.0) / diag
    if spec.kind == "sq_l2":
        return b / (diag + spec.lam)
    lo, hi = spec.bounds(diag.shape[0])
    return np.clip(b / diag, lo, hi)


def make_quadratic_instance(
    diag: Sequence[float],
    b: Sequence[float],
    g_spec: GSpec = GSpec(),
    *,
    id: str = "quadratic",
    mu: Optional[float] = None,
    L: Optional[float] = None,
) -> CompositeInstance:
    """Diagonal quadratic ``0.5*sum(diag*x**2) - <b, x>`` plus a built-in g.

    The class parameters default to ``(min(diag), max(diag))``. Passing
    ``mu``/``L`` places the function in a wider class, which is how the
    extreme quadratics ``(L/2)||x||^2`` and ``(mu/2)||x||^2`` are built.
    """
    diag = np.asarray(diag, dtype=float)
    if diag.ndim != 1 or diag.size == 0:
        raise ValueError("diag must be a non-empty 1-d vector")
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise ValueError("diag entries must be positive and finite")
    b = _as_vector(b, diag.shape[0])
    dim = diag.shape[0]
    mu = float(diag.min()) if mu is None else float(mu)
    L = float(diag.max()) if L is None else float(L)
    if diag.min() < mu or diag.max() > L:
        raise ValueError("diag entries must lie in [mu, L]")
    if not mu < L:
        raise ValueError("diag entries are all equal; need mu < L (pass mu/L explicitly)")
    params = ProblemClassParams(mu, L)

    def value(x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * np.dot(diag * x, x) - np.dot(b, x))

    def gradient(x):
        return diag * np.asarray(x, dtype=float) - b

    f = SmoothOracle(value=value, gradient=gradient, params=params)
    g = _g_oracle(g_spec, dim)
    x_star = _separable_solution(diag, b, g_spec)
    res = _fixed_point_residual(f, g, x_star)
    return CompositeInstance(
        id=id,
        dim=dim,
        f=f,
        g=g,
        known_solution=x_star,
        known_solution_tolerance=res,
        quad=QuadraticData(diag=diag, b=b, g_spec=g_spec),
    )


def eval_smooth(f: SmoothOracle, x, dim: Optional[int] = None) -> tuple[float, np.ndarray]:
    x = _as_vector(x, dim)
    return float(f.value(x)), np.asarray(f.gradient(x), dtype=float)


def apply_prox(g: ProxOracle, x, gamma: float) -> np.ndarray:
    if not gamma > 0:
        raise ValueError(f"prox step must be positive, got {gamma}")
    return np.asarray(g.prox(np.asarray(x, dtype=float), gamma), dtype=float)


def _fixed_point_residual(f: SmoothOracle, g: ProxOracle, x: np.ndarray) -> float:
    L = f.params.L
    p = apply_prox(g, x - (1.0 / L) * f.gradient(x), 1.0 / L)
    return float(np.linalg.norm(x - p))


def fixed_point_residual(instance: CompositeInstance, x) -> float:
    """``||x - prox_{g/L}(x - grad f(x)/L)||``, zero exactly at the minimizer."""
    return _fixed_point_residual(instance.f, instance.g, _as_vector(x, instance.dim))


def solve_reference(
    instance: CompositeInstance,
    tol: float,
    x0=None,
    max_iter: int = REFERENCE_MAX_ITER,
) -> np.ndarray:
    """Point whose fixed-point residual is at most ``tol``.

    A known solution is returned as-is when its declared tolerance allows;
    otherwise proximal gradient with step 1/L runs until the residual test
    passes.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if instance.known_solution is not None and instance.known_solution_tolerance <= tol:
        return instance.known_solution.copy()
    x = np.zeros(instance.dim) if x0 is None else _as_vector(x0, instance.dim).copy()
    if instance.quad is not None:
        q = instance.quad
        lo, hi = q.g_spec.bounds(instance.dim)
        x, res, _ = kernels.pg_solve(
            q.diag, q.b, kernels.G_CODES[q.g_spec.kind], lo, hi, q.g_spec.lam,
            instance.params.L, x, tol, max_iter,
        )
        if res <= tol:
            return x
        raise ReferenceSolveError(
            f"reference solver stopped after {max_iter} iterations at residual {res:.3e}",
            res, x,
        )
    L = instance.params.L
    best, best_res = x.copy(), math.inf
    for _ in range(max_iter):
        p = apply_prox(instance.g, x - (1.0 / L) * instance.f.gradient(x), 1.0 / L)
        res = float(np.linalg.norm(x - p))
        if res < best_res:
            best, best_res = x.copy(), res
        if res <= tol:
            return x
        x = p
    raise ReferenceSolveError(
        f"reference solver stopped after {max_iter} iterations at residual {best_res:.3e}",
        best_res, best,
    )


# ---------------------------------------------------------------------------
# built-in instances

BUILTIN_IDS = ("tight-L", "tight-mu", "box-qp", "lasso-sc", "halfspace")


def builtin_instance(
    name: str,
    *,
    mu: Optional[float] = None,
    L: Optional[float] = None,
    dim: Optional[int] = None,
    seed: int = 0,
) -> CompositeInstance:
    """Resolve a built-in instance id.

    ``tight-L`` / ``tight-mu`` default to (mu, L) = (1, 4); the random
    composite instances ``lasso-sc`` and ``halfspace`` default to
    (1, 100) and dimension 20. ``box-qp`` is fixed.
    """
    if name in ("tight-L", "tight-mu"):
        mu = 1.0 if mu is None else mu
        L = 4.0 if L is None else L
        dim = 1 if dim is None else dim
        curv = L if name == "tight-L" else mu
        return make_quadratic_instance(
            np.full(dim, float(curv)), np.zeros(dim), GSpec("zero"), id=name, mu=mu, L=L
        )
    if name == "box-qp":
        if mu is not None or L is not None or dim not in (None, 2):
            raise ValueError("box-qp is a fixed instance; mu, L and dim cannot be overridden")
        return make_quadratic_instance(
            [1.0, 4.0], [2.0, 8.0], GSpec("box", lo=(0.0, 0.0), hi=(1.0, 1.0)), id=name
        )
    if name in ("lasso-sc", "halfspace"):
        mu = 1.0 if mu is None else mu
        L = 100.0 if L is None else L
        dim = 20 if dim is None else dim
        if dim < 2:
            raise ValueError(f"{name} needs dim >= 2")
        rng = np.random.default_rng(seed)
        diag = rng.uniform(mu, L, size=dim)
        diag[0], diag[-1] = mu, L
        if name == "lasso-sc":
            b = rng.normal(scale=L / 4, size=dim)
            spec = GSpec("l1", lam=L / 8)
        else:
            b = rng.normal(scale=L / 4, size=dim)
            spec = GSpec("nonneg")
        return make_quadratic_instance(diag, b, spec, id=name, mu=mu, L=L)
    raise KeyError(f"unknown built-in instance {name!r}; known: {', '.join(BUILTIN_IDS)}")


# ---------------------------------------------------------------------------
# serialization

def instance_to_dict(instance: CompositeInstance) -> dict:
    if instance.quad is None:
        raise ValueError("only quadratic instances with a built-in g can be serialized")
    q = instance.quad
    d = {
        "id": instance.id,
        "dim": instance.dim,
        "diag": q.diag.tolist(),
        "b": q.b.tolist(),
        "g": q.g_spec.to_dict(),
        "mu": instance.params.mu,
        "L": instance.params.L,
    }
    if instance.known_solution is not None:
        d["known_solution"] = instance.known_solution.tolist()
    return d


def instance_from_dict(d: dict) -> CompositeInstance:
    try:
        inst = make_quadratic_instance(
            d["diag"], d["b"], GSpec.from_dict(d.get("g", {"kind": "zero"})),
            id=str(d["id"]), mu=d.get("mu"), L=d.get("L"),
        )
    except KeyError as exc:
        raise ValueError(f"instance document is missing field {exc}") from None
    if int(d.get("dim", inst.dim)) != inst.dim:
        raise ValueError("instance 'dim' does not match the length of 'diag'")
    if "known_solution" in d:
        xs = _as_vector(d["known_solution"], inst.dim)
        res = fixed_point_residual(inst, xs)
        inst = CompositeInstance(
            id=inst.id, dim=inst.dim, f=inst.f, g=inst.g,
            known_solution=xs, known_solution_tolerance=res, quad=inst.quad,
        )
    return inst


def save_instance(instance: CompositeInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)
        fh.write("\n")


def load_instance(path) -> CompositeInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
