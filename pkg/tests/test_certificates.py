import dataclasses
import json
import math

import numpy as np
import pytest

from conftest import run_builtin
from proxitem.certificates import (
    CertificateError,
    build_report,
    check_distance_bound,
    check_lyapunov_monotone,
    check_span_membership,
    interpolation_audit,
    lyapunov_tmm_value,
    lyapunov_value,
    make_certificate,
    reference_certificate,
    residual_f,
    residual_g,
    slack_value,
    span_residual,
    weighted_sum_terms,
    windowed_rate,
    write_report,
)
from proxitem.problem import GSpec, ProblemClassParams, SmoothOracle, builtin_instance, make_quadratic_instance
from proxitem.solvers import run_method


def _quad_oracle(c, mu, L):
    return SmoothOracle(lambda x: 0.5 * c * float(x @ x), lambda x: c * x, ProblemClassParams(mu, L))


def test_residual_f_scalar_example():
    f = _quad_oracle(2.0, 1.0, 4.0)  # f = x^2
    assert residual_f(f, np.array([1.0]), np.array([0.0])) == pytest.approx(1 / 3, rel=1e-15)


@pytest.mark.parametrize("c", [1.0, 4.0])
def test_residual_f_vanishes_on_extreme_quadratics(c):
    f = _quad_oracle(c, 1.0, 4.0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        assert abs(residual_f(f, x, y)) <= 1e-14 * (1 + x @ x + y @ y)


def test_residual_g_examples():
    assert residual_g(1.0, 1.0, np.array([-1.0]), np.array([1.0]), np.array([-1.0])) == 2.0
    assert residual_g(0.5, 0.5, np.array([7.0]), np.array([2.0]), np.array([2.0])) == 0.0
    assert residual_g(0.0, 0.0, np.zeros(2), np.ones(2), -np.ones(2)) == 0.0
    assert residual_g(math.inf, 0.0, np.zeros(1), np.ones(1), np.zeros(1)) == math.inf


def test_v0_closed_form(lasso_item):
    tr, cert = lasso_item
    assert lyapunov_value(tr, 0, cert) == tr.params.L * float(np.sum((tr.x0 - cert.x_star) ** 2))


def test_tight_L_lyapunov_constant():
    inst = builtin_instance("tight-L")
    cert = reference_certificate(inst)
    tr = run_method(inst, "prox_item", [2.0], 60)
    V0 = lyapunov_value(tr, 0, cert)
    assert V0 == 16.0
    for k in range(61):
        assert lyapunov_value(tr, k, cert) == pytest.approx(V0, rel=1e-10)


def test_zero_g_reduction():
    base = builtin_instance("lasso-sc", dim=7)
    inst = make_quadratic_instance(base.quad.diag, base.quad.b, GSpec(), id="s", mu=1.0, L=100.0)
    cert = reference_certificate(inst)
    tr = run_method(inst, "prox_item", np.full(7, 4.0), 80)
    q, mu, L = inst.params.q, inst.params.mu, inst.params.L
    for k in range(1, 81):
        y = tr.y(k - 1)
        full = lyapunov_value(tr, k, cert)
        reduced = (1 - q) * tr.A(k) * residual_f(inst.f, y, cert.x_star) + (L + mu * tr.A(k)) * float(
            np.sum((tr.z(k) - cert.x_star) ** 2)
        )
        assert full == pytest.approx(reduced, rel=1e-12, abs=1e-300)
    tt = run_method(inst, "prox_tmm", np.full(7, 4.0), 40)
    for k in range(1, 41):
        reduced = (1 - q) * residual_f(inst.f, tt.y(k - 1), cert.x_star) + mu * float(
            np.sum((tt.z(k) - cert.x_star) ** 2)
        )
        assert lyapunov_tmm_value(tt, k, cert) == pytest.approx(reduced, rel=1e-12, abs=1e-300)


def test_tmm_lyapunov_at_solution_is_zero():
    inst = builtin_instance("tight-mu")
    cert = reference_certificate(inst)
    tr = run_method(inst, "prox_tmm", [0.0], 3)
    assert lyapunov_tmm_value(tr, 1, cert) == 0.0


def test_slack_vanishes(lasso_item, lasso_tmm):
    tr, cert = lasso_item
    d0 = max(1.0, float(np.sum((tr.x0 - cert.x_star) ** 2)))
    for k in range(tr.horizon):
        S, p = slack_value(tr, k, cert, "item")
        scale = tr.params.L * max(1.0, tr.A(k + 1)) * d0
        assert abs(S) <= 1e-8 * scale
        assert all(abs(v) <= 1e-10 * max(1.0, tr.A(k + 1)) for v in p)
    tt, cert = lasso_tmm
    for k in range(1, tt.horizon):
        S, p = slack_value(tt, k, cert, "tmm")
        assert p is None and abs(S) <= 1e-8 * tt.params.L * d0


def _replace_z(tr, k, z):
    recs = list(tr.records)
    recs[k] = dataclasses.replace(recs[k], z_k=z)
    recs[k - 1] = dataclasses.replace(recs[k - 1], z_next=z)
    return dataclasses.replace(tr, records=tuple(recs))


def test_slack_detects_perturbed_iterate(lasso_item):
    tr, cert = lasso_item
    bad = _replace_z(tr, 3, tr.z(3) + 1e-3)
    S, _ = slack_value(bad, 2, cert, "item")
    scale = tr.params.L * tr.A(3) * float(np.sum((tr.x0 - cert.x_star) ** 2))
    assert abs(S) > 10 * 1e-8 * scale


def test_slack_rejects_wrong_mode(lasso_item):
    tr, cert = lasso_item
    with pytest.raises(CertificateError):
        slack_value(tr, 1, cert, "tmm")
    with pytest.raises(CertificateError):
        slack_value(tr, tr.horizon, cert, "item")


def test_monotone_and_bounds(lasso_item, lasso_tmm):
    tr, cert = lasso_item
    assert all(check_lyapunov_monotone(tr, cert))
    bounds = check_distance_bound(tr, cert)
    assert all(bounds["theorem"])
    assert all(v for v in bounds["lemma"] if v is not None)
    # strict inequality away from the tight instances
    d0 = float(np.sum((tr.x0 - cert.x_star) ** 2))
    for k in range(1, tr.horizon + 1):
        assert float(np.sum((tr.z(k) - cert.x_star) ** 2)) < d0 / (1 + tr.params.q * tr.A(k))
    tt, cert = lasso_tmm
    assert all(v for v in check_lyapunov_monotone(tt, cert) if v is not None)
    assert all(v for v in check_distance_bound(tt, cert)["lemma"] if v is not None)
    assert all(lyapunov_tmm_value(tt, k, cert) >= 0 for k in range(1, tt.horizon + 1))


def test_weighted_sum_terms_nonnegative(lasso_item, lasso_tmm):
    for tr, cert in (lasso_item, lasso_tmm):
        start = 0 if tr.method == "prox_item" else 1
        for k in range(start, tr.horizon):
            for which in ("lyapunov", "distance"):
                for name, v in weighted_sum_terms(tr, k, cert, which).items():
                    assert v >= -1e-9 * tr.params.L * max(1.0, tr.A(k + 1) if tr.schedule_history else 1.0), name


def test_span_membership_and_negative_control(lasso_item):
    tr, _ = lasso_item
    assert check_span_membership(tr, 25) == [True] * 26
    assert span_residual(tr, 0) == 0.0
    cols = np.stack([v for rec in tr.records[:3] for v in (rec.grad_f_y, rec.s_g_next)], axis=1)
    u, s, _ = np.linalg.svd(cols, full_matrices=True)
    off = u[:, -1]  # orthogonal to every recorded oracle output before step 3
    bad = _replace_z(tr, 3, tr.z(3) + 1e-3 * off)
    assert span_residual(bad, 3) > 1e-8
    assert check_span_membership(bad, 5)[3] is False


def test_span_needs_item_trace(lasso_tmm):
    with pytest.raises(CertificateError):
        check_span_membership(lasso_tmm[0])


def test_audit_single_point_and_violation():
    one = interpolation_audit([(np.zeros(2), 0.0, np.zeros(2))], 1.0, 4.0)
    assert one.ok and one.residuals.shape == (1, 1)
    # f = 10 x^2 / 2 is not 4-smooth
    pts = [(np.array([x]), 5.0 * x * x, np.array([10.0 * x])) for x in (-1.0, 0.0, 2.0)]
    assert not interpolation_audit(pts, 1.0, 4.0).ok
    # wrong-sign subgradient of |x| at 1
    gpts = [(np.array([1.0]), 1.0, np.array([-1.0])), (np.array([-1.0]), 1.0, np.array([-1.0]))]
    assert not interpolation_audit(gpts, 0.0).ok
    good = [(np.array([1.0]), 1.0, np.array([1.0])), (np.array([-1.0]), 1.0, np.array([-1.0]))]
    assert interpolation_audit(good, 0.0).ok


def test_windowed_rate():
    d = [0.5**k for k in range(20)]
    assert windowed_rate(d, 2, 12) == pytest.approx(0.5, rel=1e-14)
    assert windowed_rate([0.0] * 5, 1, 3) == 0.0
    assert windowed_rate(d, 5, 30) is None


def test_report_baseline_applicability(tmp_path):
    tr, cert = run_builtin("halfspace", "prox_grad", 30)
    rep = build_report(tr, cert)
    s = rep.summary
    assert s["lyapunov_monotone"] is None and s["slack_zero"] is None and s["bound_holds"] is None
    assert s["interpolation_f_ok"] and s["interpolation_g_ok"] and rep.ok
    assert rep.per_k["bound_lhs"][0] > 0


def test_report_io(tmp_path, lasso_item):
    tr, cert = lasso_item
    rep = build_report(tr, cert)
    assert rep.ok and rep.summary["span_member"] and rep.summary["chain_consistent"]
    assert rep.per_k["V"][0] == tr.params.L * float(np.sum((tr.x0 - cert.x_star) ** 2))
    write_report(rep, tmp_path / "r.json", tmp_path / "r.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    for key in ("V", "V_inf", "S", "S_inf", "p0", "p1", "p2", "p3", "bound_lhs", "bound_rhs",
                "monotone_ok", "bound_ok", "slack_ok", "span_ok"):
        assert len(data["per_k"][key]) == tr.horizon + 1
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0].startswith("k,V,V_inf,S,S_inf,p0") and len(rows) == tr.horizon + 2


def test_report_flags_broken_trace(lasso_item):
    tr, cert = lasso_item
    bad = _replace_z(tr, 4, tr.z(4) * 1.5)
    rep = build_report(bad, cert, audit=False)
    assert not rep.ok and rep.summary["slack_zero"] is False


def test_certificate_rejects_infeasible_point():
    inst = builtin_instance("box-qp")
    with pytest.raises(CertificateError):
        make_certificate(inst, [2.0, 2.0])
