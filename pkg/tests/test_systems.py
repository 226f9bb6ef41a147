import numpy as np
import pytest

from osnet.ode import integrate
from osnet.systems import (NoPaperICError, SystemSpec, make_field, paper_initial_condition,
                           validation_perturbation)

ROSSLER6 = SystemSpec("rossler", {"c": 6})
SPROTT = SystemSpec("sprott", {"nu": 2.1})


def test_rossler_value():
    f = make_field(ROSSLER6)
    assert np.allclose(f.eval(np.array([0.0, -9.1238, 0.0])), [9.1238, -0.91238, 0.1], atol=1e-14)


def test_sprott_value():
    f = make_field(SPROTT)
    out = f.eval(np.array([5.7043, 0.0, -2.12778]))
    # -nu z - x + y^2 = 2.1 * 2.12778 - 5.7043
    assert np.allclose(out, [0.0, -2.12778, -1.235962], atol=1e-12)


def test_rossler_jacobian_at_origin():
    jac = make_field(ROSSLER6).jacobian(np.zeros(3))
    assert np.array_equal(jac, [[0, -1, -1], [1, 0.1, 0], [0, 0, -6]])


@pytest.mark.parametrize("spec", [ROSSLER6, SystemSpec("rossler", {"c": 18}), SPROTT])
def test_jacobian_matches_finite_differences(spec):
    field = make_field(spec)
    rng = np.random.default_rng(0)
    eps = 1e-6
    for _ in range(100):
        x = rng.uniform([-10, -10, 0], [10, 10, 20])
        fd = np.column_stack([(field.eval(x + eps * e) - field.eval(x - eps * e)) / (2 * eps)
                              for e in np.eye(3)])
        jac = field.jacobian(x)
        assert np.max(np.abs(fd - jac)) <= 1e-6 * max(1.0, np.abs(jac).max())


def test_paper_initial_conditions():
    assert np.array_equal(paper_initial_condition(ROSSLER6), [0, -9.1238, 0])
    assert np.array_equal(paper_initial_condition(SystemSpec("rossler", {"c": 18})), [0, -22.9049, 0])
    assert np.array_equal(paper_initial_condition(SPROTT), [5.7043, 0.0, -2.12778])


def test_perturbations_are_per_experiment():
    assert np.array_equal(validation_perturbation(ROSSLER6), [0, 0.01, 0])
    assert np.array_equal(validation_perturbation(SPROTT), [0.01, 0, 0])


def test_no_paper_ic():
    with pytest.raises(NoPaperICError):
        paper_initial_condition(SystemSpec("rossler", {"c": 7}))


@pytest.mark.parametrize("name,params", [
    ("lorenz", {"sigma": 10}),
    ("rossler", {"nu": 1}),
    ("rossler", {}),
    ("sprott", {"nu": float("nan")}),
])
def test_invalid_specs(name, params):
    with pytest.raises(ValueError):
        SystemSpec(name, params)


def test_dimension():
    assert ROSSLER6.dim == 3 and SPROTT.dim == 3


def test_rossler6_long_run_bounded():
    tr = integrate(make_field(ROSSLER6), paper_initial_condition(ROSSLER6), 0.0, 2000.0, 0.01)
    assert np.abs(tr.states).max() < 100
