"""Fixed-point engines for the semilinear and the full problem, and the
independent residual check."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BallViolation, NonConvergenceError
from .funcspace import Trajectory, derivative_consistency, sup_norm
from .problem import ProblemSpec
from .boundary import apply_B

log = logging.getLogger(__name__)

DAMPING_FLOOR = 1.0 / 16.0
_EPS = np.finfo(float).eps


def _roundoff_floor(x: Trajectory) -> float:
    # steps this small are rounding noise; no tolerance below it is reachable
    return 100.0 * _EPS * max(1.0, sup_norm(x))


@dataclass(frozen=True)
class Residual:
    ode: float
    bc: float
    t_max: float  # node where the ODE defect peaks
    consistency: float = 0.0  # mismatch between stored derivative columns

    @property
    def worst(self) -> float:
        return max(self.ode, self.bc)


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: Trajectory
    iterations: int
    converged: bool
    increments: tuple = ()
    ratios: tuple = ()
    apriori_bound: float = math.nan
    aposteriori_bound: float = math.nan
    residual: Optional[Residual] = None
    inner_iterations: int = 0
    damping: tuple = ()
    certificate: object = field(default=None, repr=False)


def _nth_derivative(col: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order finite-difference derivative of nodal samples."""
    f = col
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


def residual(spec: ProblemSpec, x: Trajectory, h=None, v=None) -> Residual:
    """Defect of ``x`` in the ODE (interior nodes) and in the boundary rows.

    The top derivative comes from finite differences of column n-1, not from
    stored data.  With ``h``/``v`` given, they replace G(x)/phi(x) on the
    right-hand side (the semilinear problem).
    """
    n, grid = spec.n, x.grid
    t = grid.nodes
    coeffs = spec.Lop.values(t)
    lx = coeffs[n] * _nth_derivative(x.values[:, n - 1], grid.h)
    for i in range(n):
        lx = lx + coeffs[i] * x.values[:, i]
    rhs = spec.G(x) if h is None else np.broadcast_to(np.asarray(h(t) if callable(h) else h, float), t.shape)
    defect = np.abs(lx + spec.psi_of(x) - rhs)[1:-1]
    k = int(np.argmax(defect))
    bc_rhs = spec.phi_of(x) if v is None else np.asarray(v, dtype=float)
    bc = np.abs(apply_B(spec.Bop, x) + spec.eta_of(x) - bc_rhs)
    return Residual(float(defect[k]), float(np.max(bc)), float(t[k + 1]), derivative_consistency(x))


def _sampled(h, grid):
    if callable(h):
        h = h(grid.nodes)
    return np.broadcast_to(np.asarray(h, dtype=float), (grid.m,))


def picard_map(spec: ProblemSpec, x: Trajectory, h, v) -> Trajectory:
    """One application of ``x -> L^{-1}(h - psi(x), v - eta(x))``."""
    hs = _sampled(h, spec.grid)
    return spec.linear.solve(hs - spec.psi_of(x), np.asarray(v, float) - spec.eta_of(x))


def solve_semilinear(spec: ProblemSpec, h, v, q: float | None, *, x0: Trajectory | None = None,
                     tol: float | None = None, max_iter: int | None = None) -> SolveReport:
    """Picard iteration for ``L x + psi(x) = h``, ``B x + eta(x) = v``.

    Stops once the step falls below ``tol (1 - q) / q``, which bounds the
    distance to the fixed point by ``tol``.  ``q=None`` runs uncertified:
    the step itself is compared with ``tol`` and no error bounds are given.
    """
    if q is not None and not 0.0 <= q < 1.0:
        raise ValueError(f"contraction constant must lie in [0, 1), got {q}")
    tol = spec.tol if tol is None else tol
    max_iter = spec.max_iter if max_iter is None else max_iter
    grid = spec.grid
    hs = _sampled(h, grid)
    v = np.asarray(v, dtype=float).reshape(spec.n)
    x = Trajectory.zeros(grid, spec.n) if x0 is None else x0
    if q is None:
        stop = tol
    else:
        stop = math.inf if q == 0.0 else tol * (1.0 - q) / q
    increments = []
    converged = False
    for k in range(1, max_iter + 1):
        x_new = picard_map(spec, x, hs, v)
        increments.append(sup_norm(x_new - x))
        x = x_new
        if increments[-1] <= max(stop, _roundoff_floor(x)):
            converged = True
            break
    ratios = tuple(b / a for a, b in zip(increments, increments[1:]) if a > 0)
    if not converged:
        if ratios and ratios[-1] >= 1.0 and q is None:
            msg = (f"Picard iteration diverging after {max_iter} steps with observed ratio "
                   f"{ratios[-1]:.3g} >= 1; the map is not a contraction here")
        elif ratios and ratios[-1] >= 1.0:
            msg = (f"Picard iteration stalled after {max_iter} steps with observed ratio "
                   f"{ratios[-1]:.3g} >= 1; the declared Lipschitz constants understate the problem")
        else:
            msg = f"Picard iteration hit the cap of {max_iter} steps (last step {increments[-1]:.3g})"
        raise NonConvergenceError(msg, x, increments)
    k = len(increments)
    if q is None:
        apriori = apost = math.nan
    else:
        apriori = q**k / (1.0 - q) * increments[0]
        apost = q / (1.0 - q) * increments[-1]
    return SolveReport(
        solution=x, iterations=k, converged=True, increments=tuple(increments),
        ratios=ratios, apriori_bound=apriori, aposteriori_bound=apost,
        residual=residual(spec, x, hs, v),
    )


def solve_inverse(spec: ProblemSpec, h, v, q: float, **kw) -> Trajectory:
    """``(L - Psi)^{-1}(h, v)``."""
    return solve_semilinear(spec, h, v, q, **kw).solution


def _anderson_step(xs, fs, lam):
    dX = np.column_stack([b - a for a, b in zip(xs, xs[1:])])
    dF = np.column_stack([b - a for a, b in zip(fs, fs[1:])])
    gamma, *_ = np.linalg.lstsq(dF, fs[-1], rcond=None)
    return xs[-1] + lam * fs[-1] - (dX + lam * dF) @ gamma


def solve_full(spec: ProblemSpec, q: float | None, *, ball: float | None = None,
               x0: Trajectory | None = None, tol: float | None = None,
               max_iter: int | None = None, anderson: int | None = None) -> SolveReport:
    """Damped outer iteration ``x <- (1-lam) x + lam T(x)``, with
    ``T(x) = (L - Psi)^{-1}(G(x), phi(x))``.

    The damping halves whenever the fixed-point residual grows (floor 1/16);
    ``anderson > 0`` mixes in Anderson acceleration over that many past steps.
    With ``ball`` set, an iterate leaving ``||x|| <= ball`` aborts the run.
    """
    tol = spec.tol if tol is None else tol
    max_iter = spec.outer_max_iter if max_iter is None else max_iter
    window = spec.anderson if anderson is None else anderson
    inner_tol = tol / 10.0
    grid, shape = spec.grid, (spec.m, spec.n)
    x = Trajectory.zeros(grid, spec.n) if x0 is None else x0
    lam, prev = 1.0, math.inf
    hist_x, hist_f, residuals, lams = [], [], [], []
    inner_total = 0
    warm = None

    def check_ball(z, j):
        # iterates are only accurate to the solve tolerance
        if ball is not None and sup_norm(z) > ball * (1 + 1e-9) + max(tol, 1e-12):
            raise BallViolation(
                f"iterate {j} has norm {sup_norm(z):.6g} outside the certified ball "
                f"M = {ball:.6g}; the ball invariance failed numerically",
                z, residuals,
            )

    for j in range(max_iter + 1):
        check_ball(x, j)
        inner = solve_semilinear(spec, spec.G(x), spec.phi_of(x), q, x0=warm, tol=inner_tol)
        inner_total += inner.iterations
        tx = warm = inner.solution
        r = sup_norm(tx - x)
        residuals.append(r)
        if r <= max(tol, _roundoff_floor(tx)):
            check_ball(tx, j + 1)
            return SolveReport(
                solution=tx, iterations=j + 1, converged=True, increments=tuple(residuals),
                ratios=tuple(b / a for a, b in zip(residuals, residuals[1:]) if a > 0),
                residual=residual(spec, tx), inner_iterations=inner_total, damping=tuple(lams),
            )
        if j == max_iter:
            break
        if r > prev:
            lam = max(lam / 2.0, DAMPING_FLOOR)
        prev = r
        lams.append(lam)
        damped = (1.0 - lam) * x.values + lam * tx.values
        if window > 0:
            hist_x.append(x.values.ravel())
            hist_f.append((tx.values - x.values).ravel())
            hist_x, hist_f = hist_x[-(window + 1):], hist_f[-(window + 1):]
            if len(hist_x) >= 2:
                cand = _anderson_step(hist_x, hist_f, lam).reshape(shape)
                if np.all(np.isfinite(cand)) and (ball is None or np.max(np.abs(cand[:, 0])) <= ball):
                    damped = cand
        x = Trajectory(grid, damped)
    raise NonConvergenceError(
        f"outer iteration did not converge in {max_iter} steps (fixed-point residual "
        f"{residuals[-1]:.3g} > tol {tol:.3g}). This is a failure of the iteration, not "
        "evidence that no solution exists: the ball condition guarantees existence, "
        "not convergence of this scheme",
        x, residuals,
    )
