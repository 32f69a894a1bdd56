import math

import numpy as np
import pytest

from proxitem.problem import (
    GSpec,
    ProblemClassParams,
    ReferenceSolveError,
    apply_prox,
    builtin_instance,
    fixed_point_residual,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    make_quadratic_instance,
    save_instance,
    solve_reference,
)


def test_params_validation():
    assert ProblemClassParams(1.0, 4.0).q == 0.25
    for mu, L in [(0.0, 1.0), (2.0, 2.0), (3.0, 1.0), (1.0, math.inf)]:
        with pytest.raises(ValueError):
            ProblemClassParams(mu, L)


def test_box_reference_is_exact():
    inst = make_quadratic_instance([1.0, 4.0], [2.0, 8.0], GSpec("box", lo=(0, 0), hi=(1, 1)), id="b")
    x = solve_reference(inst, 1e-12)
    assert np.array_equal(x, [1.0, 1.0])
    assert fixed_point_residual(inst, x) == 0.0


def test_l1_reference():
    inst = make_quadratic_instance([1.0, 4.0], [2.0, 8.0], GSpec("l1", lam=1.0), id="l")
    x = solve_reference(inst, 1e-12)
    np.testing.assert_allclose(x, [1.0, 1.75], rtol=0, atol=1e-15)
    assert fixed_point_residual(inst, x) <= 1e-12


def test_zero_reference():
    inst = make_quadratic_instance([1.0, 4.0], [0.0, 0.0], id="z")
    assert np.array_equal(solve_reference(inst, 1e-12), [0.0, 0.0])


def test_iterative_reference_agrees_with_closed_form():
    inst = builtin_instance("lasso-sc", seed=3)
    known = inst.known_solution
    # drop the closed form so the iterative path runs
    bare = make_quadratic_instance(inst.quad.diag, inst.quad.b, inst.quad.g_spec, id="x", mu=1.0, L=100.0)
    object.__setattr__(bare, "known_solution", None)
    x = solve_reference(bare, 1e-12)
    assert np.linalg.norm(x - known) <= 10 * 1e-12 / inst.params.q


def test_reference_budget_error():
    inst = builtin_instance("lasso-sc")
    object.__setattr__(inst, "known_solution", None)
    with pytest.raises(ReferenceSolveError) as info:
        solve_reference(inst, 1e-14, max_iter=3)
    assert info.value.best_residual > 1e-14


@pytest.mark.parametrize(
    "spec, x, gamma, expected",
    [
        (GSpec("l1", lam=1.0), [3.0, -0.5, -2.0], 1.0, [2.0, 0.0, -1.0]),
        (GSpec("box", lo=(0, 0, 0), hi=(1, 1, 1)), [-1.0, 0.5, 2.0], 3.0, [0.0, 0.5, 1.0]),
        (GSpec("nonneg"), [-1.0, 0.5, 2.0], 0.1, [0.0, 0.5, 2.0]),
        (GSpec("sq_l2", lam=2.0), [3.0, -3.0, 0.0], 1.0, [1.0, -1.0, 0.0]),
        (GSpec(), [3.0, -3.0, 0.0], 5.0, [3.0, -3.0, 0.0]),
    ],
)
def test_prox_maps(spec, x, gamma, expected):
    inst = make_quadratic_instance([1.0, 2.0, 3.0], [0.0, 0.0, 0.0], spec, id="p")
    np.testing.assert_array_equal(apply_prox(inst.g, x, gamma), expected)


def test_prox_rejects_bad_gamma():
    inst = builtin_instance("box-qp")
    with pytest.raises(ValueError):
        apply_prox(inst.g, [0.0, 0.0], 0.0)


def test_indicator_values():
    inst = builtin_instance("box-qp")
    assert inst.g.value(np.array([0.5, 1.0])) == 0.0
    assert inst.g.value(np.array([1.5, 0.0])) == math.inf


def test_builtins_resolve():
    tl = builtin_instance("tight-L")
    assert tl.params.q == 0.25 and tl.quad.diag[0] == 4.0
    assert builtin_instance("tight-mu").quad.diag[0] == 1.0
    lasso = builtin_instance("lasso-sc")
    assert lasso.dim == 20 and lasso.quad.diag.min() == 1.0 and lasso.quad.diag.max() == 100.0
    with pytest.raises(KeyError):
        builtin_instance("nope")
    with pytest.raises(ValueError):
        builtin_instance("box-qp", mu=0.5, L=5.0)


def test_builtin_seed_determinism():
    a = builtin_instance("halfspace", seed=7)
    b = builtin_instance("halfspace", seed=7)
    assert np.array_equal(a.quad.b, b.quad.b)


def test_instance_round_trip(tmp_path):
    inst = builtin_instance("lasso-sc", dim=6, seed=2)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert np.array_equal(back.quad.diag, inst.quad.diag)
    assert np.array_equal(back.known_solution, inst.known_solution)
    assert back.g.value(np.ones(6)) == inst.g.value(np.ones(6))
    assert instance_to_dict(instance_from_dict(instance_to_dict(inst))) == instance_to_dict(inst)


def test_equal_curvature_needs_explicit_class():
    with pytest.raises(ValueError):
        make_quadratic_instance([2.0, 2.0], [0.0, 0.0], id="flat")
    inst = make_quadratic_instance([2.0, 2.0], [0.0, 0.0], id="flat", mu=1.0, L=3.0)
    assert inst.params.q == pytest.approx(1 / 3)
