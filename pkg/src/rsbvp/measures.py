"""Bounded-variation integrators (finite jumps plus a density) and
Riemann-Stieltjes integrals against them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exprlang import ScalarExpr, parse_scalar
from .funcspace import DEFAULT_M, Grid, Trajectory, quad

_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class Jump:
    t: float
    beta: float


@dataclass(frozen=True)
class DensityPiece:
    """Density ``expr(t)`` supported on ``[a, b]``."""

    expr: ScalarExpr
    a: float = 0.0
    b: float = 1.0

    @property
    def full(self) -> bool:
        return self.a == 0.0 and self.b == 1.0


@dataclass(frozen=True)
class BVMeasure:
    jumps: tuple = ()
    density: tuple = ()

    def __post_init__(self):
        locs = [j.t for j in self.jumps]
        if any(not 0.0 <= s <= 1.0 for s in locs):
            raise ValueError(f"jump locations must lie in [0, 1]: {locs}")
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError(f"jump locations must be strictly increasing: {locs}")
        for p in self.density:
            if not 0.0 <= p.a < p.b <= 1.0:
                raise ValueError(f"density piece [{p.a}, {p.b}] not inside [0, 1]")

    @classmethod
    def from_jumps(cls, pairs, density=()):
        """Sort (t, beta) pairs, merge equal locations and drop zero weights."""
        merged: dict[float, float] = {}
        for t, beta in pairs:
            merged[float(t)] = merged.get(float(t), 0.0) + float(beta)
        jumps = tuple(Jump(t, b) for t, b in sorted(merged.items()) if b != 0.0)
        return cls(jumps, tuple(density))

    @classmethod
    def step(cls, t0: float, beta: float = 1.0):
        return cls.from_jumps([(t0, beta)])

    @classmethod
    def with_density(cls, src: str, a: float = 0.0, b: float = 1.0):
        return cls((), (DensityPiece(parse_scalar(src, ("t",)), a, b),))

    def __add__(self, other: "BVMeasure") -> "BVMeasure":
        pairs = [(j.t, j.beta) for j in self.jumps + other.jumps]
        return BVMeasure.from_jumps(pairs, self.density + other.density)

    @property
    def is_zero(self) -> bool:
        return not self.jumps and not self.density


ZERO_MEASURE = BVMeasure()


def _density_values(piece: DensityPiece, t):
    return np.broadcast_to(np.asarray(piece.expr(t=t), dtype=float), np.shape(t))


def _cell_nodes(a, b, grid: Grid):
    """Gauss-Legendre nodes/weights on [a, b], split at the grid nodes."""
    inner = grid.nodes[(grid.nodes > a) & (grid.nodes < b)]
    edges = np.concatenate(([a], inner, [b]))
    lo, hi = edges[:-1, None], edges[1:, None]
    pts = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
    wts = 0.5 * (hi - lo) * _GL_W
    return pts.ravel(), wts.ravel()


def _sampler(f, j, grid):
    """Return (grid, nodal values, pointwise evaluator) for the integrand."""
    if isinstance(f, Trajectory):
        return f.grid, f.values[:, j], lambda s: f.eval(s, j)
    if callable(f):
        grid = grid or Grid(DEFAULT_M)
        vals = np.broadcast_to(np.asarray(f(grid.nodes), dtype=float), (grid.m,))
        return grid, vals, lambda s: np.asarray(f(s), dtype=float)
    vals = np.asarray(f, dtype=float)
    g = Grid(vals.shape[0])
    return g, vals, lambda s: np.interp(s, g.nodes, vals)


def stieltjes(f, omega: BVMeasure, j: int = 0, grid: Grid | None = None) -> float:
    """Integral of f over [0, 1] against ``omega``.

    ``f`` is a Trajectory (column ``j`` is integrated), a vectorized callable
    of t, or an array of nodal samples.  A jump of weight beta at t0
    contributes ``beta * f(t0)`` whatever the side continuity of omega.
    """
    if omega.is_zero:
        return 0.0
    g, nodal, point = _sampler(f, j, grid)
    total = 0.0
    if omega.jumps:
        locs = np.array([jp.t for jp in omega.jumps])
        betas = np.array([jp.beta for jp in omega.jumps])
        total += float(betas @ np.atleast_1d(point(locs)))
    for piece in omega.density:
        if piece.full:
            total += quad(nodal * _density_values(piece, g.nodes))
        else:
            pts, wts = _cell_nodes(piece.a, piece.b, g)
            total += float(wts @ (point(pts) * _density_values(piece, pts)))
    return total


def total_variation(omega: BVMeasure, grid: Grid | None = None) -> float:
    grid = grid or Grid(DEFAULT_M)
    tv = float(sum(abs(jp.beta) for jp in omega.jumps))
    for piece in omega.density:
        if piece.full:
            tv += quad(np.abs(_density_values(piece, grid.nodes)))
        else:
            pts, wts = _cell_nodes(piece.a, piece.b, grid)
            tv += float(wts @ np.abs(_density_values(piece, pts)))
    return tv


def from_multipoint(points, matrices):
    """Measures realizing ``sum_i B_i xbar(t_i)``; returns an n x n tuple of tuples.

    Entry (r, c) carries a jump of weight (B_i)[r, c] at each t_i.
    """
    mats = [np.atleast_2d(np.asarray(b, dtype=float)) for b in matrices]
    if len(mats) != len(points):
        raise ValueError(f"{len(points)} points but {len(mats)} matrices")
    if not mats:
        raise ValueError("at least one point is required")
    n = mats[0].shape[0]
    for b in mats:
        if b.shape != (n, n):
            raise ValueError(f"matrix shape {b.shape} does not match ({n}, {n})")
    for t in points:
        if not 0.0 <= float(t) <= 1.0:
            raise ValueError(f"multipoint location {t} outside [0, 1]")
    return tuple(
        tuple(
            BVMeasure.from_jumps([(t, b[r, c]) for t, b in zip(points, mats)])
            for c in range(n)
        )
        for r in range(n)
    )
