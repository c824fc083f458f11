import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsbvp.boundary import BoundaryOperator, apply_B
from rsbvp.funcspace import Grid, random_trajectory, sup_norm
from rsbvp.measures import (
    ZERO_MEASURE,
    BVMeasure,
    DensityPiece,
    Jump,
    from_multipoint,
    stieltjes,
    total_variation,
)
from rsbvp.exprlang import parse_scalar

from conftest import poly_trajectory


def test_step_law_example():
    x = poly_trajectory(Grid(101), [0, 1], 2)
    assert stieltjes(x, BVMeasure.step(0.5, 2.0)) == 1.0


def test_zero_measure():
    assert stieltjes(lambda t: np.exp(t), ZERO_MEASURE) == 0.0
    assert total_variation(ZERO_MEASURE) == 0.0


def test_density_one():
    x = poly_trajectory(Grid(101), [0, 1], 1)
    assert stieltjes(x, BVMeasure.with_density("1")) == pytest.approx(0.5, abs=1e-12)


def test_partial_density_piece():
    # int_{0.25}^{0.6} t * 2 dt = 0.6^2 - 0.25^2
    x = poly_trajectory(Grid(101), [0, 1], 2)
    w = BVMeasure(density=(DensityPiece(parse_scalar("2", ("t",)), 0.25, 0.6),))
    assert stieltjes(x, w) == pytest.approx(0.36 - 0.0625, abs=1e-12)


def test_total_variation_examples():
    assert total_variation(BVMeasure.step(0.3, 2.0)) == 2.0
    w = BVMeasure.from_jumps([(0.2, 1.0), (0.8, -1.0)], [DensityPiece(parse_scalar("1", ("t",)))])
    assert total_variation(w) == pytest.approx(3.0, abs=1e-12)


def test_jump_invariants():
    w = BVMeasure.from_jumps([(0.7, 1.0), (0.2, 2.0), (0.7, 0.5), (0.4, 0.0)])
    assert [j.t for j in w.jumps] == [0.2, 0.7]
    assert w.jumps[1].beta == 1.5
    with pytest.raises(ValueError):
        BVMeasure(jumps=(Jump(0.5, 1.0), Jump(0.2, 1.0)))
    with pytest.raises(ValueError):
        BVMeasure(jumps=(Jump(1.5, 1.0),))


def test_array_and_callable_integrands():
    g = Grid(201)
    w = BVMeasure.from_jumps([(0.0, 1.0), (1.0, 1.0)], [DensityPiece(parse_scalar("t", ("t",)))])
    f = np.cos
    expected = np.cos(0) + np.cos(1) + (np.cos(1) + np.sin(1) - 1)
    assert stieltjes(f, w, grid=g) == pytest.approx(expected, abs=1e-10)
    assert stieltjes(f(g.nodes), w) == pytest.approx(expected, abs=1e-10)


@given(st.integers(0, 2**32 - 1), st.floats(-10, 10))
@settings(max_examples=50, deadline=None)
def test_linearity(seed, alpha):
    rng = np.random.default_rng(seed)
    g = Grid(101)
    x, y = random_trajectory(g, 2, rng), random_trajectory(g, 2, rng)
    w = BVMeasure.from_jumps(
        list(zip(rng.uniform(0, 1, 3), rng.normal(size=3))),
        [DensityPiece(parse_scalar("1 - t", ("t",))), DensityPiece(parse_scalar("t^2", ("t",)), 0.1, 0.45)],
    )
    lhs = stieltjes(x * alpha + y, w)
    rhs = alpha * stieltjes(x, w) + stieltjes(y, w)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(alpha)) * 10)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_bounded_by_total_variation(seed):
    rng = np.random.default_rng(seed)
    g = Grid(101)
    x = random_trajectory(g, 2, rng)
    w = BVMeasure.from_jumps(
        list(zip(rng.uniform(0, 1, 4), rng.normal(size=4))),
        [DensityPiece(parse_scalar("sin(5*t)", ("t",)))],
    )
    # node maxima of x may undercut the interpolant between nodes; allow that slack
    fmax = max(sup_norm(x), float(np.max(np.abs(x.eval(np.linspace(0, 1, 5001))))))
    assert abs(stieltjes(x, w)) <= total_variation(w, g) * fmax * (1 + 1e-9)


def test_multipoint_identity():
    ws = from_multipoint([0.0], [np.eye(2)])
    assert ws[0][0].jumps == (Jump(0.0, 1.0),)
    assert ws[1][1].jumps == (Jump(0.0, 1.0),)
    assert ws[0][1].is_zero and ws[1][0].is_zero
    x = poly_trajectory(Grid(11), [3, 5, 1], 2)
    np.testing.assert_allclose(apply_B(BoundaryOperator(ws), x), [3.0, 5.0])


def test_multipoint_dirichlet():
    x = poly_trajectory(Grid(11), [0.5, 0, 2], 2)
    Bop = BoundaryOperator(from_multipoint([0.0, 1.0], [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]))
    np.testing.assert_allclose(apply_B(Bop, x), [0.5, 2.5])


def test_multipoint_zero():
    ws = from_multipoint([0.4], [np.zeros((2, 2))])
    assert all(w.is_zero for row in ws for w in row)


def test_multipoint_shape_errors():
    with pytest.raises(ValueError):
        from_multipoint([0.0, 1.0], [np.eye(2)])
    with pytest.raises(ValueError):
        from_multipoint([0.0, 1.0], [np.eye(2), np.eye(3)])
    with pytest.raises(ValueError):
        from_multipoint([1.2], [np.eye(2)])
