"""Solve and certify nonlinear scalar boundary value problems with
Riemann-Stieltjes boundary conditions."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .exprlang import eval_functional, eval_scalar, parse_functional, parse_scalar  # noqa: E402
from .funcspace import Grid, Trajectory, axpy, quad, sup_norm  # noqa: E402
from .measures import BVMeasure, from_multipoint, stieltjes, total_variation  # noqa: E402
from .boundary import BoundaryOperator, apply_B, b0_bound_check, boundary_matrix  # noqa: E402
from .linode import (  # noqa: E402
    LinearBVP,
    LinearOperator,
    fundamental_system,
    particular_solution,
    solve_linear_bvp,
)
from .problem import GOperator, ProblemSpec, load_fixture, load_problem  # noqa: E402
from .solver import residual, solve_full, solve_semilinear  # noqa: E402
from .certify import (  # noqa: E402
    Certificate,
    ball_certificate,
    certify,
    compute_A0,
    compute_M0,
    contraction_certificate,
    estimate_lipschitz,
    lipschitz_K,
    sublinearity_probe,
)
