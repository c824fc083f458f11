"""Uniform-grid trajectories: a function on [0, 1] with its first n-1 derivatives."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DerivativeOrderError, ShapeMismatchError

DEFAULT_M = 1001


@dataclass(frozen=True)
class Grid:
    m: int = DEFAULT_M

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"a grid needs at least 2 nodes, got {self.m}")

    @property
    def h(self) -> float:
        return 1.0 / (self.m - 1)

    @property
    def nodes(self) -> np.ndarray:
        return _nodes(self.m)


@lru_cache(maxsize=64)
def _nodes(m):
    t = np.linspace(0.0, 1.0, m)
    t[0], t[-1] = 0.0, 1.0
    t.flags.writeable = False
    return t


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Nodal values of x, x', ..., x^(n-1); column j of ``values`` is x^(j)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.m:
            raise ShapeMismatchError(
                f"trajectory has {v.shape[0]} rows, grid has {self.grid.m} nodes"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("trajectory values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def order(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def eval(self, t, j: int = 0):
        """Interpolate x^(j) at ``t`` (scalar or array).

        Cubic Hermite using column j+1 as slopes; linear for the top column.
        Grid nodes return the stored value exactly.
        """
        if not 0 <= j < self.order:
            raise DerivativeOrderError(f"derivative order {j} not in [0, {self.order - 1}]")
        t_arr = np.asarray(t, dtype=float)
        if np.any((t_arr < 0.0) | (t_arr > 1.0)):
            raise ValueError("evaluation point outside [0, 1]")
        m, h = self.grid.m, self.grid.h
        nodes = self.grid.nodes
        i = np.clip(np.floor(t_arr / h).astype(int), 0, m - 2)
        s = (t_arr - nodes[i]) / h
        y0, y1 = self.values[i, j], self.values[i + 1, j]
        if j + 1 < self.order:
            d0, d1 = self.values[i, j + 1], self.values[i + 1, j + 1]
            s2, s3 = s * s, s * s * s
            out = (
                (2 * s3 - 3 * s2 + 1) * y0
                + (s3 - 2 * s2 + s) * h * d0
                + (-2 * s3 + 3 * s2) * y1
                + (s3 - s2) * h * d1
            )
        else:
            out = (1 - s) * y0 + s * y1
        k = np.clip(np.rint(t_arr * (m - 1)).astype(int), 0, m - 1)
        on_node = nodes[k] == t_arr
        out = np.where(on_node, self.values[k, j], out)
        return float(out) if out.ndim == 0 else out

    def __add__(self, other):
        return axpy(1.0, self, other)

    def __sub__(self, other):
        return axpy(-1.0, other, self)

    def __mul__(self, alpha):
        return Trajectory(self.grid, alpha * self.values)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, grid: Grid, order: int) -> "Trajectory":
        return cls(grid, np.zeros((grid.m, order)))

    @classmethod
    def from_callables(cls, grid: Grid, funcs) -> "Trajectory":
        """Build from callables [x, x', ...] evaluated at the nodes."""
        t = grid.nodes
        cols = [np.broadcast_to(np.asarray(f(t), dtype=float), t.shape) for f in funcs]
        return cls(grid, np.column_stack(cols))


def sup_norm(x) -> float:
    """Max of |x| over the nodes (column 0 only for trajectories)."""
    if isinstance(x, Trajectory):
        x = x.values[:, 0]
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def axpy(alpha: float, x: Trajectory, y: Trajectory) -> Trajectory:
    if x.grid != y.grid or x.values.shape != y.values.shape:
        raise ShapeMismatchError("axpy needs trajectories on the same grid and order")
    return Trajectory(x.grid, alpha * x.values + y.values)


@lru_cache(maxsize=64)
def _quad_numerators(m: int) -> np.ndarray:
    # integer weights over the common denominator 6 (m - 1)
    if m < 2:
        raise ValueError("need at least 2 nodes")
    c = np.zeros(m)
    k = m if m % 2 == 1 else m - 1
    if k >= 3:
        c[0:k:2] += 4.0
        c[1:k:2] += 8.0
        c[0] -= 2.0
        c[k - 1] -= 2.0
    if k != m:
        c[m - 2] += 3.0
        c[m - 1] += 3.0
    c.flags.writeable = False
    return c


@lru_cache(maxsize=64)
def quad_weights(m: int) -> np.ndarray:
    """Composite Simpson weights on [0, 1]; a trapezoid panel closes even m."""
    w = _quad_numerators(m) / (6.0 * (m - 1))
    w.flags.writeable = False
    return w


def quad(f) -> float:
    """Integrate nodal samples over [0, 1] (uniform grid implied by length)."""
    f = np.asarray(f, dtype=float)
    m = f.shape[0]
    return float(_quad_numerators(m) @ f / (6.0 * (m - 1)))


def cumulative_quad(f, h: float) -> np.ndarray:
    """Running integral from 0 of nodal samples along axis 0.

    Each cell uses the cubic through four neighbouring nodes (one-sided at the
    ends), so the result is fourth-order accurate at every node.
    """
    f = np.asarray(f, dtype=float)
    m = f.shape[0]
    out = np.zeros_like(f)
    if m < 4:
        out[1:] = np.cumsum(0.5 * h * (f[1:] + f[:-1]), axis=0)
        return out
    cell = np.empty((m - 1,) + f.shape[1:])
    cell[0] = 9 * f[0] + 19 * f[1] - 5 * f[2] + f[3]
    cell[1:-1] = -f[:-3] + 13 * f[1:-2] + 13 * f[2:-1] - f[3:]
    cell[-1] = f[-4] - 5 * f[-3] + 19 * f[-2] + 9 * f[-1]
    out[1:] = np.cumsum(cell * (h / 24.0), axis=0)
    return out


def derivative_consistency(x: Trajectory) -> float:
    """Largest mismatch between column j and the running integral of column j+1."""
    worst = 0.0
    for j in range(x.order - 1):
        rebuilt = x.values[0, j] + cumulative_quad(x.values[:, j + 1], x.grid.h)
        worst = max(worst, sup_norm(rebuilt - x.values[:, j]))
    return worst


def random_trajectory(grid: Grid, order: int, rng, norm: float | None = None, modes: int = 6):
    """A smooth random trigonometric polynomial with exact derivative columns.

    With ``norm`` given, the result is rescaled so its sup norm equals it.
    """
    t = grid.nodes
    k = np.arange(modes + 1)
    a = rng.standard_normal(modes + 1) / (1.0 + k) ** 2
    b = rng.standard_normal(modes + 1) / (1.0 + k) ** 2
    w = k * np.pi
    wt = np.outer(w, t)
    cols = []
    for j in range(order):
        # d^j/dt^j cos(wt) = w^j cos(wt + j*pi/2); 0**0 == 1 keeps the constant mode
        phase = j * np.pi / 2
        cols.append((a * w**j) @ np.cos(wt + phase) + (b * w**j) @ np.sin(wt + phase))
    x = Trajectory(grid, np.column_stack(cols))
    if norm is not None:
        s = sup_norm(x)
        x = x * (norm / s) if s > 0 else x
    return x


def write_csv(x: Trajectory, path, banner: str | None = None) -> None:
    """Columns t, x, x1, ... at 17 significant digits.  A banner goes first
    as ``#`` comment lines, which :func:`read_csv` skips."""
    header = ["t", "x"] + [f"x{j}" for j in range(1, x.order)]
    with open(path, "w", newline="") as fh:
        if banner:
            for line in banner.splitlines():
                fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for t, row in zip(x.grid.nodes, x.values):
            fh.write(",".join("%.17g" % v for v in (t, *row)) + "\n")


def read_csv(path, grid: Grid | None = None, order: int | None = None) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise ShapeMismatchError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if header[:2] != ["t", "x"]:
        raise ShapeMismatchError(f"{path}: header must start with t,x")
    try:
        data = np.array([[float(v) for v in r] for r in body if r], dtype=float)
    except ValueError as exc:
        raise ShapeMismatchError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ShapeMismatchError(f"{path}: ragged rows")
    file_grid = Grid(data.shape[0])
    if grid is not None and grid != file_grid:
        raise ShapeMismatchError(f"{path}: {file_grid.m} rows, problem grid has {grid.m} nodes")
    if order is not None and data.shape[1] - 1 != order:
        raise ShapeMismatchError(
            f"{path}: {data.shape[1] - 1} value columns, problem order is {order}"
        )
    if not np.allclose(data[:, 0], file_grid.nodes, atol=1e-12):
        raise ShapeMismatchError(f"{path}: t column is not the uniform grid on [0, 1]")
    return Trajectory(file_grid, data[:, 1:])
