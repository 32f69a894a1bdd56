"""Command-line front end: ``proxitem run | schedule | audit``.

Exit status: 0 all checks pass, 2 certificate failure, 3 configuration
error, 4 numeric overflow.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .certificates import (
    CertificateError,
    build_report,
    make_certificate,
    reference_certificate,
    write_report,
)
from .problem import (
    BUILTIN_IDS,
    CompositeInstance,
    ReferenceSolveError,
    builtin_instance,
    load_instance,
    make_quadratic_instance,
)
from .schedule import ScheduleOverflowError, iterate_schedule, max_horizon, validate_q, write_schedule_csv
from .solvers import METHODS, TraceFormatError, read_trace, run_method, write_trace

EXIT_OK = 0
EXIT_CERT = 2
EXIT_CONFIG = 3
EXIT_OVERFLOW = 4

REFERENCE_TOL = 1e-12
SUMMARY_COLUMNS = ("instance", "method", "seed", "k", "dist2", "bound", "ratio")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    instances: list = field(default_factory=list)
    methods: list = field(default_factory=lambda: list(METHODS))
    horizon: int = 200
    q_overrides: Optional[list] = None
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "proxitem-out"
    check_certificates: bool = True
    dim: Optional[int] = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        return cls(**d)

    def validate(self) -> None:
        if not self.instances:
            raise ConfigError("no instances given")
        if not self.methods:
            raise ConfigError("methods list is empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; expected a subset of {list(METHODS)}")
        if not isinstance(self.horizon, int) or isinstance(self.horizon, bool) or self.horizon < 1:
            raise ConfigError(f"horizon must be a positive integer, got {self.horizon!r}")
        if not self.seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in self.seeds):
            raise ConfigError("seeds must be a nonempty list of integers")
        if self.q_overrides is not None:
            for pair in self.q_overrides:
                if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
                    raise ConfigError(f"q_overrides entries must be [mu, L] pairs, got {pair!r}")


# ---------------------------------------------------------------------------
# instance resolution

def _override_tag(mu: float, L: float) -> str:
    return f"mu{mu:g}_L{L:g}"


def _with_params(inst: CompositeInstance, mu: float, L: float) -> CompositeInstance:
    q = inst.quad
    if q is None:
        raise ConfigError(f"cannot override (mu, L) of instance {inst.id!r}")
    return make_quadratic_instance(q.diag, q.b, q.g_spec, id=inst.id, mu=mu, L=L)


def resolve_instances(cfg: RunConfig) -> list:
    """Every (label, instance) pair the run will cover, validated up front."""
    out = []
    overrides = cfg.q_overrides or [None]
    for spec in cfg.instances:
        for ov in overrides:
            try:
                if spec in BUILTIN_IDS:
                    kw = {}
                    if ov is not None:
                        kw = {"mu": float(ov[0]), "L": float(ov[1])}
                    if cfg.dim is not None and spec != "box-qp":
                        kw["dim"] = cfg.dim
                    inst = builtin_instance(spec, **kw)
                else:
                    path = Path(spec)
                    if not path.is_file():
                        raise ConfigError(f"{spec!r} is neither a built-in id nor a readable file")
                    inst = load_instance(path)
                    if ov is not None:
                        inst = _with_params(inst, float(ov[0]), float(ov[1]))
            except (KeyError, ValueError, OSError) as exc:
                raise ConfigError(f"instance {spec!r}: {exc}") from None
            label = inst.id if ov is None else f"{inst.id}_{_override_tag(inst.params.mu, inst.params.L)}"
            out.append((label, inst))
    return out


def start_point(inst: CompositeInstance, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return 5.0 * rng.standard_normal(inst.dim)


def _stem(label: str, method: str, seed: int) -> str:
    return f"{label}__{method}__s{seed}"


# ---------------------------------------------------------------------------
# run

def _bound_sequence(q: float, horizon: int) -> list:
    """(1 + q A_k)^{-1} for k = 0..horizon, or None past the schedule cap."""
    n = min(horizon, max_horizon(q))
    vals = [1.0 / (1.0 + q * st.A) for st, _ in iterate_schedule(q, n)]
    return vals + [None] * (horizon - n)


def cmd_run(cfg: RunConfig, out_dir: Path, log=print) -> int:
    cfg.validate()
    resolved = resolve_instances(cfg)
    for label, inst in resolved:
        if "prox_item" in cfg.methods and cfg.horizon > max_horizon(inst.params.q):
            raise ScheduleOverflowError(inst.params.q, max_horizon(inst.params.q))
    certs = {}
    for label, inst in resolved:
        certs[label] = reference_certificate(inst, REFERENCE_TOL)

    out_dir.mkdir(parents=True, exist_ok=True)
    failed = []
    summary_rows = []
    for label, inst in resolved:
        cert = certs[label]
        bounds = _bound_sequence(inst.params.q, cfg.horizon)
        for method in cfg.methods:
            for seed in cfg.seeds:
                x0 = start_point(inst, seed)
                trace = run_method(inst, method, x0, cfg.horizon, seed=seed)
                stem = _stem(label, method, seed)
                write_trace(
                    trace, out_dir / f"{stem}.csv", out_dir / f"{stem}.json",
                    extra={"x_star": cert.x_star.tolist(), "x_star_tol": cert.tol, "label": label},
                )
                d0 = float(np.sum((x0 - cert.x_star) ** 2))
                for k in range(cfg.horizon + 1):
                    d2 = float(np.sum((trace.z(k) - cert.x_star) ** 2))
                    bnd = None if bounds[k] is None else bounds[k] * d0
                    ratio = None if not bnd else d2 / bnd
                    summary_rows.append([label, method, seed, k, d2, bnd, ratio])
                if cfg.check_certificates:
                    report = build_report(trace, cert)
                    write_report(report, out_dir / f"{stem}.report.json", out_dir / f"{stem}.report.csv")
                    if not report.ok:
                        failed.append(stem)
    if cfg.check_certificates:
        with open(out_dir / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_COLUMNS)
            for row in summary_rows:
                w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    for label, _ in resolved:
        for method in cfg.methods:
            rows = [r for r in summary_rows if r[0] == label and r[1] == method and r[3] == cfg.horizon]
            worst = max(r[4] for r in rows)
            log(f"{label:<24} {method:<10} k={cfg.horizon:<4} max dist2={worst:.3e}")
    for stem in failed:
        log(f"certificate failure: {stem}")
    return EXIT_CERT if failed else EXIT_OK


# ---------------------------------------------------------------------------
# audit

def audit_trace(csv_path: Path, json_path: Optional[Path] = None):
    """Rebuild a trace from disk and evaluate its certificate report."""
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
    trace, meta = read_trace(csv_path, json_path)
    if trace.instance is None:
        raise TraceFormatError("trace sidecar carries no instance description")
    if "x_star" in meta:
        cert = make_certificate(trace.instance, meta["x_star"], float(meta.get("x_star_tol", 0.0)))
    else:
        cert = reference_certificate(trace.instance, REFERENCE_TOL)
    return trace, build_report(trace, cert)


def cmd_audit(csv_path: Path, json_path: Optional[Path], out: Optional[Path], log=print) -> int:
    trace, report = audit_trace(csv_path, json_path)
    csv_path = Path(csv_path)
    out = Path(out) if out else csv_path.with_name(csv_path.stem + ".audit.json")
    write_report(report, out, out.with_suffix(".csv"))
    for key in ("lyapunov_monotone", "bound_holds", "slack_zero", "span_member",
                "interpolation_f_ok", "interpolation_g_ok"):
        val = report.summary.get(key)
        log(f"{key:<20} {'skipped' if val is None else ('pass' if val else 'FAIL')}")
    return EXIT_OK if report.ok else EXIT_CERT


# ---------------------------------------------------------------------------
# argument parsing

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="proxitem", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run methods on instances and check certificates")
    r.add_argument("instances", nargs="*", help="built-in ids or instance JSON files")
    r.add_argument("--config", type=Path)
    r.add_argument("--out", type=Path)
    r.add_argument("--horizon", type=int)
    r.add_argument("--methods", help="comma-separated subset of " + ",".join(METHODS))
    r.add_argument("--mu", type=float)
    r.add_argument("--L", type=float, dest="L")
    r.add_argument("--seed", type=int, action="append", dest="seeds")
    r.add_argument("--dim", type=int)
    r.add_argument("--no-check", action="store_true")

    s = sub.add_parser("schedule", help="print the coefficient schedule as CSV")
    s.add_argument("q", type=float)
    s.add_argument("--horizon", type=int, default=10)

    a = sub.add_parser("audit", help="check certificates on a stored trace")
    a.add_argument("trace", type=Path)
    a.add_argument("--json", type=Path, dest="sidecar")
    a.add_argument("--out", type=Path)
    return p


def _build_config(args) -> RunConfig:
    d = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
    cfg = RunConfig.from_dict(d)
    if args.instances:
        cfg.instances = list(args.instances)
    if args.methods is not None:
        cfg.methods = [m for m in args.methods.split(",") if m]
    if args.horizon is not None:
        cfg.horizon = args.horizon
    if (args.mu is None) != (args.L is None):
        raise ConfigError("--mu and --L must be given together")
    if args.mu is not None:
        cfg.q_overrides = [[args.mu, args.L]]
    if args.seeds:
        cfg.seeds = args.seeds
    if args.dim is not None:
        cfg.dim = args.dim
    if args.no_check:
        cfg.check_certificates = False
    if args.out is not None:
        cfg.output_dir = str(args.out)
    env = os.environ.get("PROXITEM_OUT")
    if env:
        cfg.output_dir = env
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    err = lambda msg: print(f"proxitem: {msg}", file=sys.stderr)  # noqa: E731
    try:
        if args.command == "schedule":
            validate_q(args.q)
            if args.horizon < 0:
                raise ConfigError("horizon must be nonnegative")
            write_schedule_csv(args.q, args.horizon, sys.stdout)
            return EXIT_OK
        if args.command == "audit":
            return cmd_audit(args.trace, args.sidecar, args.out)
        cfg = _build_config(args)
        return cmd_run(cfg, Path(cfg.output_dir))
    except ScheduleOverflowError as exc:
        err(str(exc))
        return EXIT_OVERFLOW
    except (ConfigError, TraceFormatError, ReferenceSolveError, CertificateError) as exc:
        err(str(exc))
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        err(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
