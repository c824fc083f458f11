from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsbvp.boundary import BoundaryOperator, apply_B
from rsbvp.errors import HypothesisViolation
from rsbvp.funcspace import Grid, Trajectory, sup_norm
from rsbvp.linode import LinearBVP, LinearOperator, fundamental_system, particular_solution
from rsbvp.solver import _nth_derivative

from conftest import DIRICHLET

G1001 = Grid(1001)


def test_x2_basis_normalized():
    F = fundamental_system(LinearOperator.of("0", "0", "1"), G1001)
    assert F.scale == 2.0
    t = G1001.nodes
    u1, u2 = F.basis
    np.testing.assert_array_equal(u1.values[:, 0], 0.5)
    np.testing.assert_allclose(u2.values[:, 0], 0.5 * t, atol=1e-15)
    assert sum(sup_norm(u) for u in F.basis) <= 1 + 1e-12


def test_first_order_basis():
    F = fundamental_system(LinearOperator.of("0", "1"), Grid(101))
    assert F.scale == 1.0
    np.testing.assert_array_equal(F.basis[0].values[:, 0], 1.0)


def test_harmonic_wronskian():
    # canonical data gives the basis {cos(pi t), sin(pi t)/pi}, whose Wronskian
    # is identically 1; the basis {cos, sin} has Wronskian pi
    F = fundamental_system(LinearOperator.of("pi^2", "0", "1"), G1001)
    np.testing.assert_allclose(F.raw_wronskian, 1.0, atol=1e-6)
    t = G1001.nodes
    raw = F.matrix * F.scale
    np.testing.assert_allclose(raw[:, 0, 0], np.cos(np.pi * t), atol=1e-9)
    np.testing.assert_allclose(raw[:, 0, 1], np.sin(np.pi * t) / np.pi, atol=1e-9)
    rescaled = raw.copy()
    rescaled[:, :, 1] *= np.pi
    np.testing.assert_allclose(np.linalg.det(rescaled), np.pi, atol=1e-6)


def test_abel_identity_variable_coefficients():
    # W' = -(a1/a2) W  =>  W(t) = exp(-int a1/a2) for canonical data
    F = fundamental_system(LinearOperator.of("t", "2*t", "1"), G1001)
    np.testing.assert_allclose(F.raw_wronskian, np.exp(-G1001.nodes**2), atol=1e-9)


def test_normalization_bound_random_operators(rng):
    for _ in range(5):
        c = [float(v) for v in rng.uniform(-2, 2, 3)]
        Lop = LinearOperator.of(f"{c[0]!r}", f"{c[1]!r}*t", f"1 + {abs(c[2])!r}*t")
        F = fundamental_system(Lop, Grid(201))
        assert sum(sup_norm(u) for u in F.basis) <= 1 + 1e-12
        assert F.min_abs_wronskian > 0


def test_leading_coefficient_checks():
    with pytest.raises(HypothesisViolation):
        fundamental_system(LinearOperator.of("0", "0", "t - 0.5"), Grid(101))
    with pytest.raises(HypothesisViolation):
        fundamental_system(LinearOperator.of("1", "0", "t"), Grid(101))


def test_particular_zero():
    Lop = LinearOperator.of("1", "0", "1")
    F = fundamental_system(Lop, Grid(101))
    assert sup_norm(particular_solution(F, Lop, 0.0)) == 0.0


def test_particular_constant_forcing():
    Lop = LinearOperator.of("0", "0", "1")
    F = fundamental_system(Lop, G1001)
    xp = particular_solution(F, Lop, 1.0)
    assert np.max(np.abs(xp.values[:, 0] - G1001.nodes**2 / 2)) <= 1e-8


def test_particular_residual():
    Lop = LinearOperator.of("1", "0", "1")
    F = fundamental_system(Lop, G1001)
    t = G1001.nodes
    xp = particular_solution(F, Lop, np.sin(2 * t))
    # x'' from stored data and independently from finite differences
    x2 = _nth_derivative(xp.values[:, 1], G1001.h)
    assert np.max(np.abs(x2 + xp.values[:, 0] - np.sin(2 * t))) <= 1e-6
    exact = (np.sin(2 * t) - 2 * np.sin(t)) / -3.0
    assert np.max(np.abs(xp.values[:, 0] - exact)) <= 1e-9


@pytest.fixture(scope="module")
def x2_dirichlet():
    return LinearBVP(LinearOperator.of("0", "0", "1"), DIRICHLET, G1001)


def test_solve_zero_data(x2_dirichlet):
    assert sup_norm(x2_dirichlet.solve(0.0, [0.0, 0.0])) == 0.0


def test_solve_quadratic(x2_dirichlet):
    x = x2_dirichlet.solve(1.0, [0.0, 0.0])
    t = G1001.nodes
    assert np.max(np.abs(x.values[:, 0] - t * (t - 1) / 2)) <= 1e-6
    assert sup_norm(x) == pytest.approx(0.125, abs=1e-6)


def test_solve_affine(x2_dirichlet):
    x = x2_dirichlet.solve(0.0, [0.0, 2.0])
    assert np.max(np.abs(x.values[:, 0] - 2 * G1001.nodes)) <= 1e-8


def test_quadratic_convergence_is_at_roundoff():
    # the discretization is exact on this polynomial solution, so the errors
    # sit at the rounding floor for every grid
    for m in (51, 101, 201, 401):
        g = Grid(m)
        x = LinearBVP(LinearOperator.of("0", "0", "1"), DIRICHLET, g).solve(1.0, [0.0, 0.0])
        assert np.max(np.abs(x.values[:, 0] - g.nodes * (g.nodes - 1) / 2)) <= 1e-13


def test_convergence_order_non_polynomial():
    # x'' = e^t, x(0) = x(1) = 0  =>  x = e^t - 1 - (e - 1) t
    ms = np.array([51, 101, 201, 401])
    errs = []
    for m in ms:
        g = Grid(m)
        t = g.nodes
        x = LinearBVP(LinearOperator.of("0", "0", "1"), DIRICHLET, g).solve(np.exp, [0.0, 0.0])
        errs.append(np.max(np.abs(x.values[:, 0] - (np.exp(t) - 1 - (np.e - 1) * t))))
    order = np.polyfit(np.log(1.0 / (ms - 1)), np.log(errs), 1)[0]
    assert order >= 3.5


@lru_cache(maxsize=1)
def _mixed_problem():
    Lop = LinearOperator.of("1 + t", "sin(t)", "2 + t^2")
    Bop = BoundaryOperator.multipoint([0.0, 0.4, 1.0], [[[1, 0.5], [0, 0]], [[0, 0], [0.3, 0]], [[0, 0], [1, -1]]])
    return LinearBVP(Lop, Bop, G1001)


@given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
@settings(max_examples=15, deadline=None)
def test_solve_is_linear(seed, alpha):
    lin = _mixed_problem()
    rng = np.random.default_rng(seed)
    t = G1001.nodes
    c1, c2 = rng.normal(size=3), rng.normal(size=3)
    h1 = c1[0] + c1[1] * np.cos(3 * t) + c1[2] * t**2
    h2 = c2[0] + c2[1] * np.sin(2 * t) + c2[2] * t
    v1, v2 = rng.normal(size=2), rng.normal(size=2)
    lhs = lin.solve(alpha * h1 + h2, alpha * v1 + v2)
    rhs = lin.solve(h1, v1) * alpha + lin.solve(h2, v2)
    assert sup_norm(lhs - rhs) <= 1e-9 * (1 + abs(alpha))


def test_left_inverse(rng):
    lin = _mixed_problem()
    t = G1001.nodes
    for _ in range(3):
        a, b, w = rng.normal(size=3)
        funcs = [
            lambda s: a * np.sin(w * s) + b * s**3,
            lambda s: a * w * np.cos(w * s) + 3 * b * s**2,
            lambda s: -a * w * w * np.sin(w * s) + 6 * b * s,
        ]
        x0 = Trajectory.from_callables(G1001, funcs[:2])
        coeffs = lin.Lop.values(t)
        h = sum(coeffs[i] * funcs[i](t) for i in range(3))
        v = apply_B(lin.Bop, x0)
        x = lin.solve(h, v)
        assert sup_norm(x - x0) <= 1e-5
        np.testing.assert_allclose(apply_B(lin.Bop, x), v, atol=1e-10)
