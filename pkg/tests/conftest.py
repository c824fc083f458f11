import numpy as np
import pytest

from rsbvp.boundary import BoundaryOperator
from rsbvp.funcspace import Grid, Trajectory
from rsbvp.problem import load_fixture


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def semilinear():
    return load_fixture("semilinear")


@pytest.fixture(scope="session")
def bounded_g_plain():
    return load_fixture("bounded_g_plain")


def poly_trajectory(grid: Grid, coeffs, order: int) -> Trajectory:
    """Trajectory of the polynomial sum_k coeffs[k] t^k with exact derivatives."""
    p = np.polynomial.Polynomial(coeffs)
    return Trajectory(grid, np.column_stack([p.deriv(j)(grid.nodes) for j in range(order)]))


DIRICHLET = BoundaryOperator.dirichlet()


def make_spec(coefficients=("0", "0", "1"), boundary=None, **nonlinear):
    """ProblemSpec from problem-file style pieces (Dirichlet by default)."""
    from rsbvp.problem import problem_from_dict

    numerics = {k: nonlinear.pop(k) for k in list(nonlinear) if k in ("m", "tol", "seed", "probes", "samples", "max_iter", "ball_cap")}
    doc = {
        "operator": {"coefficients": list(coefficients)},
        "boundary": boundary or {"points": [0.0, 1.0], "matrices": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]},
        "nonlinear": nonlinear,
        "numerics": numerics,
    }
    return problem_from_dict(doc, "test")
