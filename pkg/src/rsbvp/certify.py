"""Constants of the existence theory and the checks built on them.

A0 bounds the Green's operator of the linear problem with homogeneous
boundary data, B0 the boundary-data part; with declared Lipschitz
constants K1 (psi) and K2 (eta), q = A0 K1 + B0 K2 < 1 makes the
semilinear solve a contraction, K = max(A0, B0) / (1 - q) bounds its
Lipschitz constant, and a radius M with ||G(x)|| <= (M - M0) / K on the
ball ||x|| <= M gives existence for the full problem.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import CertificateFailed, NonConvergenceError, RsbvpError
from .exprlang import Functional, ScalarExpr
from .funcspace import Grid, Trajectory, quad_weights, random_trajectory, sup_norm
from .linode import LinearBVP
from .problem import ProblemSpec
from .report import dump_toml
from .solver import solve_semilinear

log = logging.getLogger(__name__)

SUBLINEAR_NORMS = (10.0, 100.0, 1000.0, 10000.0)


def compute_A0(lin: LinearBVP, probes: int = 201) -> float:
    """Estimate ``max_t int_0^1 |G(t, s)| ds`` for the Green's function of
    ``Lx = h, Bx = 0``.

    The kernel column at each probe node s_j is recovered by solving with a
    hat function centred at s_j and dividing by the hat's mass.
    """
    grid = lin.grid
    t = grid.nodes
    s = np.linspace(0.0, 1.0, probes)
    width = 1.0 / (probes - 1)
    zero = np.zeros(lin.n)
    kernel = np.empty((grid.m, probes))
    for j, sj in enumerate(s):
        hat = np.maximum(0.0, 1.0 - np.abs(t - sj) / width)
        mass = width if 0 < j < probes - 1 else width / 2
        kernel[:, j] = lin.solve(hat, zero).values[:, 0] / mass
    return float(np.max(np.abs(kernel) @ quad_weights(probes)))


def contraction_certificate(a0: float, b0: float, k1: float, k2: float):
    """Return ``(q, passed)`` with ``q = a0 k1 + b0 k2``; passed iff q < 1."""
    if min(a0, b0, k1, k2) < 0:
        raise ValueError("constants must be non-negative")
    q = a0 * k1 + b0 * k2
    return q, q < 1.0


def lipschitz_K(a0: float, b0: float, q: float) -> float:
    if q >= 1.0:
        raise CertificateFailed(f"contraction constant q = {q:.6g} >= 1; no Lipschitz bound")
    return max(a0, b0) / (1.0 - q)


@dataclass(frozen=True)
class LipschitzEstimate:
    estimate: float  # a lower bound on the true constant
    declared: Optional[float] = None
    samples: int = 0

    @property
    def exceeds_declared(self) -> bool:
        return self.declared is not None and self.estimate > self.declared * (1 + 1e-9)


def _rng(seed, tag):
    return np.random.default_rng([int(seed), tag])


def estimate_lipschitz(f, box=(-10.0, 10.0), samples: int = 100_000, seed: int = 0,
                       declared: float | None = None, grid: Grid | None = None,
                       order: int = 1) -> LipschitzEstimate:
    """Sampled lower bound on a Lipschitz constant.

    ``f`` is a ScalarExpr in x (box = (lo, hi) range of x) or a sequence of
    Functionals (box = radius in sup norm; distances use |.|_inf on R^n).
    Half the pairs are independent, half are close pairs at random scales.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    rng = _rng(seed, 1)
    if isinstance(f, ScalarExpr):
        lo, hi = box
        width = hi - lo
        a = rng.uniform(lo, hi, samples)
        b = rng.uniform(lo, hi, samples)
        half = samples // 2
        delta = width * 10.0 ** rng.uniform(-6, 0, samples - half) * rng.choice([-1, 1], samples - half)
        b[half:] = np.clip(a[half:] + delta, lo, hi)
        keep = a != b
        a, b = a[keep], b[keep]
        env_a, env_b = {"x": a}, {"x": b}
        if f.uses("t"):
            tt = rng.uniform(0, 1, a.size)
            env_a["t"] = env_b["t"] = tt
        fa = np.broadcast_to(f(**env_a), a.shape)
        fb = np.broadcast_to(f(**env_b), b.shape)
        est = float(np.max(np.abs(fa - fb) / np.abs(a - b))) if a.size else 0.0
        if declared is not None and est > declared * (1 + 1e-9):
            log.warning("sampled Lipschitz estimate %.6g exceeds declared %.6g", est, declared)
        return LipschitzEstimate(est, declared, samples)
    funcs: Sequence[Functional] = [f] if isinstance(f, Functional) else list(f)
    if all(fn.is_zero or not fn.parts for fn in funcs):
        return LipschitzEstimate(0.0, declared, samples)
    grid = grid or Grid()
    radius = float(box if np.isscalar(box) else max(abs(box[0]), abs(box[1])))
    est = 0.0
    for k in range(samples):
        x = random_trajectory(grid, order, rng, radius * rng.uniform(0, 1))
        if k % 2:
            y = random_trajectory(grid, order, rng, radius * rng.uniform(0, 1))
        else:
            y = x + random_trajectory(grid, order, rng, radius * 10.0 ** rng.uniform(-6, 0))
        dist = sup_norm(x - y)
        if dist > 0:
            diff = max(abs(fn(x) - fn(y)) for fn in funcs)
            est = max(est, diff / dist)
    if declared is not None and est > declared * (1 + 1e-9):
        log.warning("sampled Lipschitz estimate %.6g exceeds declared %.6g", est, declared)
    return LipschitzEstimate(est, declared, samples)


def compute_M0(spec: ProblemSpec, q: float) -> float:
    """Sup norm of the unique solution with zero data."""
    try:
        rep = solve_semilinear(spec, 0.0, np.zeros(spec.n), q)
    except NonConvergenceError as exc:
        raise RsbvpError(
            f"internal inconsistency: certified contraction (q = {q:.6g}) did not converge: {exc}"
        ) from exc
    return sup_norm(rep.solution)


@dataclass(frozen=True)
class BallResult:
    radius: Optional[float]
    status: str  # "pass" or "unknown"
    mode: str  # "user-bound" or "sampled-sweep"
    bound: Optional[float] = None  # C: declared or sampled sup of ||G(x)||
    empirical: bool = False


def _in_ball(grid, n, rng, radius, first):
    return random_trajectory(grid, n, rng, radius if first else radius * rng.uniform(0, 1))


def ball_certificate(spec: ProblemSpec, k: float, m0: float, C: float | None = None,
                     samples: int | None = None, cap: float | None = None) -> BallResult:
    """Find a radius M with ``||G(x)|| <= (M - M0) / K`` for ``||x|| <= M``.

    With a declared global bound C on ``||G(x)||`` the answer is
    ``M = M0 + K C``.  Otherwise candidate radii double from max(1, 2 M0)
    and the condition is checked on random trajectories; such a pass is
    empirical only.
    """
    C = spec.C if C is None else C
    if C is None and spec.forcing_pair_is_zero:
        C = 0.0
    if C is not None:
        return BallResult(m0 + k * C, "pass", "user-bound", C)
    samples = spec.samples if samples is None else samples
    cap = spec.ball_cap if cap is None else cap
    rng = _rng(spec.seed, 2)
    radius = max(1.0, 2.0 * m0)
    while radius <= cap:
        worst = max(
            spec.forcing_norm(_in_ball(spec.grid, spec.n, rng, radius, i == 0))
            for i in range(samples)
        )
        if worst <= (radius - m0) / k:
            return BallResult(radius, "pass", "sampled-sweep", worst, empirical=True)
        radius *= 2.0
    return BallResult(None, "unknown", "sampled-sweep")


@dataclass(frozen=True)
class Sublinearity:
    norms: tuple
    ratios: tuple

    @property
    def decreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.ratios, self.ratios[1:]))

    @property
    def sublinear(self) -> bool:
        """Advisory: ratios non-increasing and down at least tenfold."""
        return self.decreasing and self.ratios[-1] <= 0.1 * self.ratios[0]


def sublinearity_probe(spec: ProblemSpec, norms=SUBLINEAR_NORMS, samples: int = 20,
                       seed: int | None = None) -> Sublinearity:
    """Max of ``||G(x)|| / ||x||`` over random x at each norm."""
    rng = _rng(spec.seed if seed is None else seed, 3)
    ratios = []
    for r in norms:
        worst = max(
            spec.forcing_norm(random_trajectory(spec.grid, spec.n, rng, r)) / r
            for _ in range(samples)
        )
        ratios.append(worst)
    return Sublinearity(tuple(float(r) for r in norms), tuple(ratios))


@dataclass(frozen=True, eq=False)
class Certificate:
    a0: float
    b0: float
    k1: float
    k2: float
    q: float
    contraction: str
    existence: str
    k: Optional[float] = None
    m0: Optional[float] = None
    m: Optional[float] = None
    ball: Optional[BallResult] = None
    scale: float = math.nan
    min_abs_wronskian: float = math.nan
    boundary_matrix: np.ndarray = field(default=None, repr=False)
    boundary_inverse: np.ndarray = field(default=None, repr=False)
    cond: float = math.nan
    psi_lipschitz: Optional[LipschitzEstimate] = None
    eta_lipschitz: Optional[LipschitzEstimate] = None
    sublinearity: Optional[Sublinearity] = None
    seed: int = 0
    grid_m: int = 0
    probes: int = 0
    name: str = ""

    @property
    def passed(self) -> bool:
        return self.contraction == "pass"

    def to_dict(self) -> dict:
        doc = {
            "tool": "rsbvp",
            "version": __version__,
            "problem": self.name,
            "seed": self.seed,
            "grid_m": self.grid_m,
            "probes": self.probes,
            "norm_on_Rn": "max",
            "norm_on_pairs": "sup(h) + max|v|",
        }
        doc["constants"] = {
            "a0": self.a0, "a0_status": "numerical", "b0": self.b0,
            "k1": self.k1, "k2": self.k2, "q": self.q,
            "k": self.k, "m0": self.m0, "m": self.m,
        }
        doc["verdicts"] = {
            "contraction": self.contraction,
            "existence": self.existence,
            "ball_mode": self.ball.mode if self.ball else "none",
            "ball_empirical": bool(self.ball.empirical) if self.ball else False,
            "ball_bound_C": self.ball.bound if self.ball else None,
        }
        diag = {
            "normalization_scale": self.scale,
            "min_abs_wronskian": self.min_abs_wronskian,
            "boundary_condition_estimate": self.cond,
            "boundary_matrix": self.boundary_matrix,
            "boundary_inverse": self.boundary_inverse,
        }
        if self.psi_lipschitz is not None:
            diag["psi_lipschitz_lower_bound"] = self.psi_lipschitz.estimate
            diag["psi_lipschitz_exceeds_declared"] = self.psi_lipschitz.exceeds_declared
        if self.eta_lipschitz is not None:
            diag["eta_lipschitz_lower_bound"] = self.eta_lipschitz.estimate
            diag["eta_lipschitz_exceeds_declared"] = self.eta_lipschitz.exceeds_declared
        if self.sublinearity is not None:
            diag["sublinearity_norms"] = self.sublinearity.norms
            diag["sublinearity_ratios"] = self.sublinearity.ratios
            diag["sublinear_trend"] = self.sublinearity.sublinear
        doc["diagnostics"] = diag
        return doc

    def to_toml(self) -> str:
        return dump_toml(self.to_dict())


def certify(spec: ProblemSpec, *, lipschitz_samples: int = 20_000, functional_samples: int = 200,
            sublinearity_samples: int = 20) -> Certificate:
    """Run the whole chain: basis, boundary matrix, A0, q, K, M0, M.

    Hypothesis violations (vanishing a_n or Wronskian, singular boundary
    matrix) propagate as exceptions.
    """
    lin = spec.linear
    a0 = compute_A0(lin, spec.probes)
    b0 = lin.BM.b0
    q, ok = contraction_certificate(a0, b0, spec.k1, spec.k2)
    psi_est = estimate_lipschitz(spec.psi, (-10.0, 10.0), lipschitz_samples, spec.seed, spec.k1)
    eta_est = estimate_lipschitz(spec.eta, 10.0, functional_samples, spec.seed, spec.k2,
                                 grid=spec.grid, order=spec.n)
    sub = sublinearity_probe(spec, samples=sublinearity_samples)
    common = dict(
        a0=a0, b0=b0, k1=spec.k1, k2=spec.k2, q=q,
        scale=lin.F.scale, min_abs_wronskian=lin.F.min_abs_wronskian,
        boundary_matrix=lin.BM.entries, boundary_inverse=lin.BM.inverse, cond=lin.BM.cond,
        psi_lipschitz=psi_est, eta_lipschitz=eta_est, sublinearity=sub,
        seed=spec.seed, grid_m=spec.m, probes=spec.probes, name=spec.name,
    )
    if not ok:
        return Certificate(contraction="fail", existence="fail", **common)
    k = lipschitz_K(a0, b0, q)
    m0 = compute_M0(spec, q)
    ball = ball_certificate(spec, k, m0)
    return Certificate(contraction="pass", existence=ball.status, k=k, m0=m0, m=ball.radius,
                       ball=ball, **common)
