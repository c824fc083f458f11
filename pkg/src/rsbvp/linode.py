"""Linear core: kernel basis, Wronskians, variation of parameters, and the
inverse of the pair (L, B)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryMatrix, BoundaryOperator, apply_B, boundary_matrix
from .errors import HypothesisViolation
from .exprlang import ScalarExpr, parse_scalar
from .funcspace import Grid, Trajectory, cumulative_quad, sup_norm

MAX_ORDER = 6


@dataclass(frozen=True)
class LinearOperator:
    """``[Lx](t) = sum_i a_i(t) x^(i)(t)``; ``coefficients`` lists a_0 .. a_n."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(
            c if isinstance(c, ScalarExpr) else parse_scalar(str(c), ("t",))
            for c in self.coefficients
        )
        if len(coeffs) < 2:
            raise ValueError("need coefficients a_0 .. a_n with n >= 1")
        if len(coeffs) - 1 > MAX_ORDER:
            raise ValueError(f"order {len(coeffs) - 1} exceeds the supported maximum {MAX_ORDER}")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def of(cls, *srcs) -> "LinearOperator":
        return cls(tuple(srcs))

    @property
    def n(self) -> int:
        return len(self.coefficients) - 1

    def values(self, t) -> np.ndarray:
        """Coefficient samples, shape (n+1, len(t))."""
        t = np.asarray(t, dtype=float)
        return np.array([np.broadcast_to(c(t=t), t.shape) for c in self.coefficients])


def check_leading(Lop: LinearOperator, t) -> np.ndarray:
    an = Lop.values(t)[-1]
    if np.any(an == 0) or not (np.all(an > 0) or np.all(an < 0)):
        raise HypothesisViolation("leading coefficient a_n vanishes or changes sign on [0, 1]")
    return an


@dataclass(frozen=True, eq=False)
class FundamentalSystem:
    """Normalized kernel basis with Wronskian data.

    ``matrix[i, j, k]`` is u_k^(j)(t_i); ``scale`` is the factor s the raw
    basis was divided by; ``cofactors[:, k]`` is W_k.
    """

    grid: Grid
    matrix: np.ndarray
    scale: float
    wronskian: np.ndarray
    cofactors: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def basis(self) -> tuple:
        return tuple(Trajectory(self.grid, self.matrix[:, :, k]) for k in range(self.n))

    @property
    def raw_wronskian(self) -> np.ndarray:
        return self.wronskian * self.scale**self.n

    @property
    def min_abs_wronskian(self) -> float:
        return float(np.min(np.abs(self.wronskian)))


def _companion(coeffs):
    """Companion matrices for coefficient samples of shape (n+1, k)."""
    n = coeffs.shape[0] - 1
    k = coeffs.shape[1]
    A = np.zeros((k, n, n))
    A[:, np.arange(n - 1), np.arange(1, n)] = 1.0
    A[:, n - 1, :] = -(coeffs[:n] / coeffs[n]).T
    return A


def fundamental_system(Lop: LinearOperator, grid: Grid) -> FundamentalSystem:
    """Integrate the n canonical initial value problems with classical RK4,
    then rescale so the basis sup norms sum to one."""
    n, m, h = Lop.n, grid.m, grid.h
    half = np.linspace(0.0, 1.0, 2 * m - 1)
    check_leading(Lop, half)
    A = _companion(Lop.values(half))
    Y = np.empty((m, n, n))
    Y[0] = np.eye(n)
    y = Y[0]
    comp = np.zeros((n, n))  # Kahan compensation for the state update
    for i in range(m - 1):
        a0, ah, a1 = A[2 * i], A[2 * i + 1], A[2 * i + 2]
        k1 = a0 @ y
        k2 = ah @ (y + 0.5 * h * k1)
        k3 = ah @ (y + 0.5 * h * k2)
        k4 = a1 @ (y + h * k3)
        incr = (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4) - comp
        new = y + incr
        comp = (new - y) - incr
        y = new
        Y[i + 1] = y
    if not np.all(np.isfinite(Y)):
        raise HypothesisViolation("non-finite state while integrating the kernel basis")
    scale = float(sum(sup_norm(Y[:, 0, k]) for k in range(n)))
    Y /= scale
    W = np.linalg.det(Y)
    if not (np.all(W > 0) or np.all(W < 0)) or np.min(np.abs(W)) < 1e-300:
        raise HypothesisViolation("Wronskian vanishes on the grid")
    Wk = np.empty((m, n))
    en = np.zeros(n)
    en[-1] = 1.0
    for k in range(n):
        Z = Y.copy()
        Z[:, :, k] = en
        Wk[:, k] = np.linalg.det(Z)
    return FundamentalSystem(grid, Y, scale, W, Wk)


def _sample(h, grid: Grid) -> np.ndarray:
    if callable(h):
        h = h(grid.nodes)
    return np.broadcast_to(np.asarray(h, dtype=float), (grid.m,))


class LinearBVP:
    """Precomputed data for repeated solves of ``Lx = h, Bx = v``."""

    def __init__(self, Lop: LinearOperator, Bop: BoundaryOperator, grid: Grid, F=None, BM=None):
        if Bop.n != Lop.n:
            raise ValueError(f"operator order {Lop.n} but {Bop.n} boundary rows")
        self.Lop, self.Bop, self.grid = Lop, Bop, grid
        self.F = F if F is not None else fundamental_system(Lop, grid)
        self.BM = BM if BM is not None else boundary_matrix(Bop, self.F)
        an = check_leading(Lop, grid.nodes)
        self._vp_weights = self.F.cofactors / (an * self.F.wronskian)[:, None]

    @property
    def n(self) -> int:
        return self.Lop.n

    def particular(self, h) -> Trajectory:
        hs = _sample(h, self.grid)
        integrals = cumulative_quad(hs[:, None] * self._vp_weights, self.grid.h)
        return Trajectory(self.grid, np.einsum("ijk,ik->ij", self.F.matrix, integrals))

    def kernel_element(self, d) -> np.ndarray:
        return np.einsum("ijk,k->ij", self.F.matrix, np.asarray(d, dtype=float))

    def solve(self, h, v) -> Trajectory:
        xp = self.particular(h)
        r = np.asarray(v, dtype=float).reshape(self.n) - apply_B(self.Bop, xp)
        d = np.linalg.solve(self.BM.entries, r)
        return Trajectory(self.grid, xp.values + self.kernel_element(d))


def particular_solution(F: FundamentalSystem, Lop: LinearOperator, h) -> Trajectory:
    """Variation of parameters: ``x_p = sum_k u_k int_0^t h W_k / (a_n W)``."""
    an = check_leading(Lop, F.grid.nodes)
    hs = _sample(h, F.grid)
    weights = F.cofactors / (an * F.wronskian)[:, None]
    integrals = cumulative_quad(hs[:, None] * weights, F.grid.h)
    return Trajectory(F.grid, np.einsum("ijk,ik->ij", F.matrix, integrals))


def solve_linear_bvp(F, Lop, Bop, h, v, BM: BoundaryMatrix | None = None) -> Trajectory:
    return LinearBVP(Lop, Bop, F.grid, F, BM).solve(h, v)
