"""Problem description and problem-file loading.

A problem is ``L x + psi(x) = G(x)`` on [0, 1] with boundary conditions
``B x + eta(x) = phi(x)``.  Problem files are TOML with the sections
``[operator]``, ``[boundary]``, ``[nonlinear]`` and ``[numerics]``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .boundary import BoundaryOperator
from .errors import ProblemFileError, RsbvpError
from .exprlang import ZERO, Functional, ScalarExpr, parse_functional, parse_scalar
from .funcspace import DEFAULT_M, Grid, Trajectory, quad_weights, sup_norm
from .linode import LinearBVP, LinearOperator
from .measures import BVMeasure, DensityPiece

G_KINDS = ("zero", "pointwise", "integral")


@dataclass(frozen=True)
class GOperator:
    """The right-hand side operator.

    ``pointwise``: G(x)(t) = g(t, x(t)); ``integral``: G(x)(t) = int_0^1 k(t, x(s)) ds.
    ``forcing`` adds a fixed function of t (used for manufactured solutions).
    """

    kind: str = "zero"
    expr: Optional[ScalarExpr] = None
    forcing: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in G_KINDS:
            raise ValueError(f"unknown G kind {self.kind!r}; expected one of {G_KINDS}")
        if self.kind != "zero" and self.expr is None:
            raise ValueError(f"G kind {self.kind!r} needs an expression")

    @property
    def is_zero(self) -> bool:
        return self.forcing is None and (self.kind == "zero" or self.expr.is_zero)

    def with_forcing(self, f: Callable) -> "GOperator":
        old = self.forcing
        new = f if old is None else (lambda t: old(t) + f(t))
        return replace(self, forcing=new)

    def __call__(self, x: Trajectory) -> np.ndarray:
        t = x.grid.nodes
        xs = x.values[:, 0]
        out = np.zeros_like(t)
        if self.kind == "pointwise":
            out = out + self.expr(t=t, x=xs)
        elif self.kind == "integral":
            w = quad_weights(x.grid.m)
            if self.expr.uses("t"):
                out = out + self.expr(t=t[:, None], x=xs[None, :]) @ w
            else:
                out = out + float(np.broadcast_to(self.expr(x=xs), xs.shape) @ w)
        if self.forcing is not None:
            out = out + self.forcing(t)
        return np.broadcast_to(out, t.shape).astype(float)

    def describe(self) -> str:
        if self.kind == "zero":
            s = "0"
        elif self.kind == "pointwise":
            s = f"g(t, x(t)) = {self.expr}"
        else:
            s = f"int_0^1 k(t, x(s)) ds, k = {self.expr}"
        return s + (" + forcing(t)" if self.forcing is not None else "")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    Lop: LinearOperator
    Bop: BoundaryOperator
    psi: ScalarExpr = ZERO
    eta: tuple = ()
    phi: tuple = ()
    G: GOperator = GOperator()
    k1: float = 0.0
    k2: float = 0.0
    C: Optional[float] = None
    m: int = DEFAULT_M
    tol: float = 1e-10
    max_iter: int = 500
    outer_max_iter: int = 500
    seed: int = 0
    probes: int = 201
    samples: int = 100
    anderson: int = 0
    ball_cap: float = 1e6
    name: str = "problem"

    def __post_init__(self):
        n = self.Lop.n
        if self.Bop.n != n:
            raise ValueError(f"operator order {n} but {self.Bop.n} boundary rows")
        zero = Functional()
        eta = tuple(self.eta) or (zero,) * n
        phi = tuple(self.phi) or (zero,) * n
        if len(eta) != n or len(phi) != n:
            raise ValueError(f"eta and phi need {n} components each")
        for f in eta + phi:
            if f.max_order > n - 1:
                raise ValueError(f"functional {f} uses a derivative above order {n - 1}")
        if self.k1 < 0 or self.k2 < 0:
            raise ValueError("Lipschitz constants must be non-negative")
        if self.C is not None and self.C < 0:
            raise ValueError("the bound C must be non-negative")
        if not 5 <= self.m:
            raise ValueError("grid needs at least 5 nodes")
        if not 3 <= self.probes <= self.m:
            raise ValueError(f"probe count must lie in [3, m], got {self.probes}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "phi", phi)

    @property
    def n(self) -> int:
        return self.Lop.n

    @property
    def grid(self) -> Grid:
        return Grid(self.m)

    @cached_property
    def linear(self) -> LinearBVP:
        return LinearBVP(self.Lop, self.Bop, self.grid)

    def with_numerics(self, **changes) -> "ProblemSpec":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self

    @property
    def forcing_pair_is_zero(self) -> bool:
        return self.G.is_zero and all(f.is_zero for f in self.phi)

    def psi_of(self, x: Trajectory) -> np.ndarray:
        xs = x.values[:, 0]
        return np.broadcast_to(self.psi(x=xs), xs.shape)

    def eta_of(self, x: Trajectory) -> np.ndarray:
        return np.array([f(x) for f in self.eta])

    def phi_of(self, x: Trajectory) -> np.ndarray:
        return np.array([f(x) for f in self.phi])

    def forcing_norm(self, x: Trajectory) -> float:
        """``||G(x)||_inf + |phi(x)|_inf``, the norm of the forcing pair."""
        return sup_norm(self.G(x)) + float(np.max(np.abs(self.phi_of(x))))


# ---------------------------------------------------------------- file loading

_SECTIONS = {
    "name": None,
    "operator": {"n", "coefficients"},
    "boundary": {"omega", "points", "matrices"},
    "nonlinear": {"psi", "eta", "phi", "G", "k1", "k2", "C"},
    "numerics": {
        "m", "tol", "max_iter", "outer_max_iter", "seed", "probes",
        "samples", "anderson", "ball_cap",
    },
}


def _keys(table, allowed, where):
    if not isinstance(table, dict):
        raise ProblemFileError(f"{where}: expected a table")
    unknown = set(table) - set(allowed)
    if unknown:
        raise ProblemFileError(f"{where}: unknown key(s) {sorted(unknown)}")


def _measure(spec, where) -> BVMeasure:
    _keys(spec, {"jumps", "density"}, where)
    jumps = []
    for k, jp in enumerate(spec.get("jumps", [])):
        _keys(jp, {"t", "beta"}, f"{where}.jumps[{k}]")
        if set(jp) != {"t", "beta"}:
            raise ProblemFileError(f"{where}.jumps[{k}]: needs t and beta")
        jumps.append((float(jp["t"]), float(jp["beta"])))
    dens = spec.get("density")
    pieces = []
    if isinstance(dens, str):
        pieces.append(DensityPiece(parse_scalar(dens, ("t",))))
    elif isinstance(dens, list):
        for k, p in enumerate(dens):
            _keys(p, {"a", "b", "expr"}, f"{where}.density[{k}]")
            pieces.append(
                DensityPiece(parse_scalar(p["expr"], ("t",)), float(p.get("a", 0.0)), float(p.get("b", 1.0)))
            )
    elif dens is not None:
        raise ProblemFileError(f"{where}.density: expected a string or a list of pieces")
    return BVMeasure.from_jumps(jumps, pieces)


def _require(table, key, where):
    if key not in table:
        raise ProblemFileError(f"{where}: missing required key {key!r}")
    return table[key]


def problem_from_dict(doc: dict, name: str = "problem") -> ProblemSpec:
    try:
        return _problem_from_dict(doc, name)
    except ProblemFileError:
        raise
    except (RsbvpError, ValueError, TypeError, KeyError) as exc:
        raise ProblemFileError(f"{name}: {exc}") from exc


def _problem_from_dict(doc, name):
    _keys(doc, _SECTIONS, "problem")
    op = _require(doc, "operator", "problem")
    _keys(op, _SECTIONS["operator"], "[operator]")
    coeffs = _require(op, "coefficients", "[operator]")
    n = int(op.get("n", len(coeffs) - 1))
    if len(coeffs) != n + 1:
        raise ProblemFileError(f"[operator]: n = {n} needs {n + 1} coefficients, got {len(coeffs)}")
    Lop = LinearOperator(tuple(parse_scalar(str(c), ("t",)) for c in coeffs))

    bd = _require(doc, "boundary", "problem")
    _keys(bd, _SECTIONS["boundary"], "[boundary]")
    Bop = None
    if "omega" in bd:
        rows = bd["omega"]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ProblemFileError(f"[boundary].omega must be {n} x {n}")
        Bop = BoundaryOperator(
            tuple(
                tuple(_measure(w, f"[boundary].omega[{i}][{j}]") for j, w in enumerate(r))
                for i, r in enumerate(rows)
            )
        )
    if "points" in bd or "matrices" in bd:
        mp = BoundaryOperator.multipoint(
            _require(bd, "points", "[boundary]"), _require(bd, "matrices", "[boundary]")
        )
        if mp.n != n:
            raise ProblemFileError(f"[boundary]: multipoint matrices must be {n} x {n}")
        Bop = mp if Bop is None else Bop + mp
    if Bop is None:
        raise ProblemFileError("[boundary]: give omega and/or points + matrices")

    nl = doc.get("nonlinear", {})
    _keys(nl, _SECTIONS["nonlinear"], "[nonlinear]")
    psi = parse_scalar(str(nl.get("psi", "0")), ("x",))
    eta = tuple(parse_functional(str(s), n) for s in nl.get("eta", ["0"] * n))
    phi = tuple(parse_functional(str(s), n) for s in nl.get("phi", ["0"] * n))
    gspec = nl.get("G", {"kind": "zero"})
    if isinstance(gspec, dict):
        kind = gspec.get("kind", "zero")
        key = {"zero": None, "pointwise": "g", "integral": "k"}.get(kind)
        if kind not in G_KINDS:
            raise ProblemFileError(f"[nonlinear].G: unknown kind {kind!r}")
        _keys(gspec, {"kind"} | ({key} if key else set()), "[nonlinear].G")
        G = GOperator(kind, parse_scalar(str(_require(gspec, key, "[nonlinear].G")), ("t", "x")) if key else None)
    else:
        raise ProblemFileError("[nonlinear].G must be a table")

    num = doc.get("numerics", {})
    _keys(num, _SECTIONS["numerics"], "[numerics]")
    casts = {"m": int, "max_iter": int, "outer_max_iter": int, "seed": int, "probes": int,
             "samples": int, "anderson": int, "tol": float, "ball_cap": float}
    numerics = {k: casts[k](v) for k, v in num.items()}
    C = nl.get("C")
    return ProblemSpec(
        Lop=Lop, Bop=Bop, psi=psi, eta=eta, phi=phi, G=G,
        k1=float(nl.get("k1", 0.0)), k2=float(nl.get("k2", 0.0)),
        C=None if C is None else float(C),
        name=str(doc.get("name", name)), **numerics,
    )


def load_problem(path) -> ProblemSpec:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc
    return problem_from_dict(doc, path.stem)


FIXTURE_DIR = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    p = FIXTURE_DIR / (name if name.endswith(".toml") else name + ".toml")
    if not p.exists():
        raise FileNotFoundError(f"no packaged fixture named {name!r}")
    return p


def load_fixture(name: str) -> ProblemSpec:
    return load_problem(fixture_path(name))
