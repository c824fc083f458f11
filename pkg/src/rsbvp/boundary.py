"""The linear boundary operator, its matrix on a kernel basis, and B0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DerivativeOrderError, SingularBoundaryMatrix
from .funcspace import sup_norm
from .measures import ZERO_MEASURE, BVMeasure, from_multipoint, stieltjes, total_variation

COND_LIMIT = 1e12


@dataclass(frozen=True)
class BoundaryOperator:
    """Row i is ``sum_j int x^(j) d omega[i][j]`` (j counted from 0)."""

    measures: tuple

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.measures)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("boundary measures must form a non-empty square array")
        object.__setattr__(self, "measures", rows)

    @property
    def n(self) -> int:
        return len(self.measures)

    @classmethod
    def zero(cls, n: int) -> "BoundaryOperator":
        return cls(tuple(tuple(ZERO_MEASURE for _ in range(n)) for _ in range(n)))

    @classmethod
    def multipoint(cls, points, matrices) -> "BoundaryOperator":
        return cls(from_multipoint(points, matrices))

    @classmethod
    def dirichlet(cls) -> "BoundaryOperator":
        """x(0) and x(1) for a second-order problem."""
        return cls.multipoint([0.0, 1.0], [[[1, 0], [0, 0]], [[0, 0], [1, 0]]])

    def __add__(self, other: "BoundaryOperator") -> "BoundaryOperator":
        if other.n != self.n:
            raise ValueError("boundary operators of different size")
        return BoundaryOperator(
            tuple(
                tuple(a + b for a, b in zip(ra, rb))
                for ra, rb in zip(self.measures, other.measures)
            )
        )

    def total_variations(self, grid=None) -> np.ndarray:
        return np.array([[total_variation(w, grid) for w in row] for row in self.measures])


def apply_B(Bop: BoundaryOperator, x) -> np.ndarray:
    """Evaluate the boundary operator on a Trajectory."""
    n = Bop.n
    for i, row in enumerate(Bop.measures):
        for j, w in enumerate(row):
            if not w.is_zero and j >= x.order:
                raise DerivativeOrderError(
                    f"boundary row {i} needs derivative {j}, trajectory has order {x.order}"
                )
    return np.array(
        [
            sum(stieltjes(x, w, j) for j, w in enumerate(row) if not w.is_zero)
            for row in Bop.measures
        ],
        dtype=float,
    ).reshape(n)


@dataclass(frozen=True, eq=False)
class BoundaryMatrix:
    entries: np.ndarray
    inverse: np.ndarray
    b0: float
    cond: float
    basis: tuple = ()


def boundary_matrix(Bop: BoundaryOperator, F) -> BoundaryMatrix:
    """Columns are B applied to the (normalized) basis; B0 = ||inverse||_inf."""
    if Bop.n != len(F.basis):
        raise ValueError(f"boundary operator has {Bop.n} rows, basis has {len(F.basis)}")
    entries = np.column_stack([apply_B(Bop, u) for u in F.basis])
    try:
        inverse = np.linalg.inv(entries)
    except np.linalg.LinAlgError:
        raise SingularBoundaryMatrix("boundary matrix is singular") from None
    cond = float(np.linalg.norm(entries, np.inf) * np.linalg.norm(inverse, np.inf))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularBoundaryMatrix(
            f"boundary matrix condition estimate {cond:.3g} exceeds {COND_LIMIT:.0e}"
        )
    b0 = float(np.max(np.sum(np.abs(inverse), axis=1)))
    return BoundaryMatrix(entries, inverse, b0, cond, tuple(F.basis))


@dataclass(frozen=True)
class B0Report:
    trials: int
    max_ratio: float
    b0: float

    @property
    def ok(self) -> bool:
        return self.max_ratio <= self.b0 + 1e-10


def combination_norm(BM: BoundaryMatrix, v) -> float:
    """sup norm of the kernel element u^T B^{-1} v."""
    d = BM.inverse @ np.asarray(v, dtype=float)
    col0 = sum(dk * u.values[:, 0] for dk, u in zip(d, BM.basis))
    return sup_norm(col0)


def b0_bound_check(BM: BoundaryMatrix, trials: int = 1000, seed: int = 0) -> B0Report:
    """Check ``||u^T B^{-1} v|| <= B0 |v|_inf`` on random v; report the worst ratio."""
    rng = np.random.default_rng(seed)
    n = BM.entries.shape[0]
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(n)
        vn = np.max(np.abs(v))
        if vn > 0:
            worst = max(worst, combination_norm(BM, v) / vn)
    return B0Report(trials, worst, BM.b0)
