"""Manufactured solutions: pick an exact x*(t), build the forcing that makes
it solve a given problem, solve on a sequence of grids and measure the error."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import sympy

from .boundary import apply_B
from .errors import CertificateFailed
from .exprlang import BinOp, Call, Const, Neg, Num, ScalarExpr, Var, parse_scalar
from .funcspace import Grid, Trajectory, quad_weights
from .problem import ProblemSpec

MMS_GRIDS = (101, 201, 401, 801)
_REFERENCE_M = 4001  # quadrature grid for integral kernels applied to x*

_T = sympy.Symbol("t", real=True)
_SYMPY_FUNCS = {
    "sin": sympy.sin, "cos": sympy.cos, "tan": sympy.tan, "exp": sympy.exp,
    "log": sympy.log, "sqrt": sympy.sqrt, "abs": sympy.Abs, "atan": sympy.atan,
    "tanh": sympy.tanh,
}


def to_sympy(node, symbols: dict):
    """Translate an expression tree into a sympy expression."""
    if isinstance(node, Num):
        return sympy.nsimplify(node.value) if float(node.value).is_integer() else sympy.Float(node.value)
    if isinstance(node, Const):
        return {"pi": sympy.pi, "e": sympy.E}[node.name]
    if isinstance(node, Var):
        return symbols[node.name]
    if isinstance(node, Neg):
        return -to_sympy(node.operand, symbols)
    if isinstance(node, BinOp):
        a, b = to_sympy(node.left, symbols), to_sympy(node.right, symbols)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return a**b
    if isinstance(node, Call):
        if node.func not in _SYMPY_FUNCS:
            raise ValueError(f"no symbolic form for {node.func!r}")
        return _SYMPY_FUNCS[node.func](*(to_sympy(a, symbols) for a in node.args))
    raise TypeError(f"cannot translate {type(node).__name__}")


def exact_derivatives(exact, n: int) -> list:
    """Vectorized callables for x*, x*', ..., x*^(n)."""
    if not isinstance(exact, ScalarExpr):
        exact = parse_scalar(str(exact), ("t",))
    expr = to_sympy(exact.node, {"t": _T})
    funcs = []
    for _ in range(n + 1):
        f = sympy.lambdify(_T, expr, "numpy")
        funcs.append(lambda t, f=f: np.broadcast_to(np.asarray(f(np.asarray(t, float)), float), np.shape(t)).copy())
        expr = sympy.diff(expr, _T)
    return funcs


def _exact_G(spec: ProblemSpec, x0):
    """``t -> G(x*)(t)`` evaluated without the solve grid."""
    G = spec.G
    if G.kind == "zero":
        return lambda t: np.zeros_like(np.asarray(t, float))
    if G.kind == "pointwise":
        return lambda t: np.broadcast_to(G.expr(t=t, x=x0(t)), np.shape(t))
    s = np.linspace(0.0, 1.0, _REFERENCE_M)
    w = quad_weights(_REFERENCE_M)
    xs = x0(s)

    def kernel_integral(t):
        t = np.asarray(t, float)
        return np.broadcast_to(G.expr(t=t[:, None], x=xs[None, :]), (t.size, s.size)) @ w

    return kernel_integral


def manufacture(spec: ProblemSpec, exact) -> tuple[ProblemSpec, list]:
    """Return a problem solved by ``exact`` and the derivative callables.

    The ODE defect of x* goes into a forcing term added to G and the
    boundary defect shifts each phi_i by a constant.
    """
    n = spec.n
    d = exact_derivatives(exact, n)
    g_exact = _exact_G(spec, d[0])
    Lop, psi = spec.Lop, spec.psi

    def forcing(t):
        t = np.asarray(t, float)
        coeffs = Lop.values(t)
        lx = sum(coeffs[i] * d[i](t) for i in range(n + 1))
        return lx + np.broadcast_to(psi(x=d[0](t)), t.shape) - g_exact(t)

    ref = Trajectory.from_callables(Grid(_REFERENCE_M), d[:n])
    shift = apply_B(spec.Bop, ref) + spec.eta_of(ref) - spec.phi_of(ref)
    phi = tuple(f.shifted(float(c)) for f, c in zip(spec.phi, shift))
    return replace(spec, G=spec.G.with_forcing(forcing), phi=phi), d


@dataclass(frozen=True)
class MMSResult:
    grids: tuple
    errors: tuple
    order: float  # least-squares slope of log(error) against log(h)
    iterations: tuple
    apriori_bounds: tuple

    def table(self) -> str:
        lines = ["m,h,error,iterations"]
        for m, e, k in zip(self.grids, self.errors, self.iterations):
            lines.append(f"{m},{1.0 / (m - 1):.17g},{e:.17g},{k}")
        return "\n".join(lines) + "\n"


def fitted_order(grids, errors) -> float:
    h = 1.0 / (np.asarray(grids, float) - 1.0)
    e = np.asarray(errors, float)
    if e.size < 2 or np.any(e <= 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def mms_study(spec: ProblemSpec, exact, grids=MMS_GRIDS, tol: float = 1e-13) -> MMSResult:
    """Solve the manufactured problem on each grid and report sup-norm errors
    at the nodes.  Requires the contraction certificate to pass on every grid."""
    from .certify import compute_A0, contraction_certificate
    from .solver import solve_full, solve_semilinear

    made, d = manufacture(spec, exact)
    errors, iters, bounds = [], [], []
    for m in grids:
        sm = made.with_numerics(m=int(m), probes=min(spec.probes, int(m)), tol=tol)
        lin = sm.linear
        q, ok = contraction_certificate(compute_A0(lin, sm.probes), lin.BM.b0, sm.k1, sm.k2)
        if not ok:
            raise CertificateFailed(f"contraction constant q = {q:.6g} >= 1 on the m = {m} grid")
        if spec.G.is_zero and all(f.is_zero or not f.parts for f in spec.phi):
            # G and phi do not depend on x: one semilinear solve is the answer
            rep = solve_semilinear(sm, sm.G(Trajectory.zeros(sm.grid, sm.n)),
                                   sm.phi_of(Trajectory.zeros(sm.grid, sm.n)), q, tol=tol)
        else:
            rep = solve_full(sm, q, tol=tol)
        exact_nodes = d[0](sm.grid.nodes)
        errors.append(float(np.max(np.abs(rep.solution.values[:, 0] - exact_nodes))))
        iters.append(rep.iterations)
        bounds.append(rep.apriori_bound)
    return MMSResult(tuple(int(m) for m in grids), tuple(errors), fitted_order(grids, errors),
                     tuple(iters), tuple(bounds))
