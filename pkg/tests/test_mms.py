import numpy as np
import pytest
import sympy

from rsbvp.errors import CertificateFailed
from rsbvp.exprlang import parse_scalar
from rsbvp.mms import exact_derivatives, fitted_order, manufacture, mms_study, to_sympy
from rsbvp.problem import load_fixture
from rsbvp.solver import residual
from rsbvp.funcspace import Trajectory

from conftest import make_spec


def test_symbolic_translation():
    t = sympy.Symbol("t", real=True)
    src = "-t^2 + exp(2*t)/3 - 0.5*t"
    e = to_sympy(parse_scalar(src, ("t",)).node, {"t": t})
    # unary minus binds tighter than ^, in both readings
    assert sympy.simplify(e - (t**2 + sympy.exp(2 * t) / 3 - sympy.Rational(1, 2) * t)) == 0
    f = sympy.lambdify(t, e)
    assert f(0.3) == pytest.approx(parse_scalar(src, ("t",))(t=0.3), rel=1e-15)


def test_exact_derivatives():
    d = exact_derivatives("sin(pi*t)", 2)
    t = np.linspace(0, 1, 7)
    np.testing.assert_allclose(d[1](t), np.pi * np.cos(np.pi * t), atol=1e-14)
    np.testing.assert_allclose(d[2](t), -np.pi**2 * np.sin(np.pi * t), atol=1e-13)
    # constants broadcast to the input shape
    assert exact_derivatives("2", 1)[1](t).shape == t.shape


def test_manufactured_problem_is_solved_by_exact(semilinear):
    made, d = manufacture(semilinear, "sin(pi*t) + t^3")
    x = Trajectory.from_callables(made.grid, d[:2])
    res = residual(made, x)
    assert res.ode <= 1e-8
    assert res.bc <= 1e-12


def test_semilinear_order(semilinear):
    res = mms_study(semilinear, "sin(pi*t)")
    assert all(b < a for a, b in zip(res.errors, res.errors[1:]))
    assert res.order >= 3.5
    assert "m,h,error,iterations" in res.table()


def test_exact_zero_solution(semilinear):
    res = mms_study(semilinear, "0", grids=(51, 101))
    assert max(res.errors) <= 1e-12


def test_polynomial_solution_at_roundoff():
    res = mms_study(load_fixture("dirichlet_linear"), "t*(t - 1)/2", grids=(51, 101, 201))
    assert max(res.errors) <= 1e-12


def test_full_problem_order():
    res = mms_study(load_fixture("sturm_liouville"), "exp(t)*cos(2*t)", grids=(101, 201, 401))
    assert res.order >= 3.5


def test_refuses_without_contraction():
    spec = load_fixture("uncertified").with_numerics(m=101, probes=51)
    with pytest.raises(CertificateFailed):
        mms_study(spec, "t", grids=(101,))


def test_fitted_order():
    ms = np.array([11, 21, 41])
    assert fitted_order(ms, (1.0 / (ms - 1)) ** 4) == pytest.approx(4.0)
    assert np.isnan(fitted_order(ms, [1e-3, 0.0, 1e-5]))
    assert np.isnan(fitted_order([101], [1e-6]))
