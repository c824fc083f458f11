"""End-to-end acceptance checks against closed-form oracles.

Each test prints a single ``PASS``/``FAIL`` line (visible under ``pytest -v``)
before asserting, so a run shows every criterion's outcome.
"""

import subprocess
import sys

import numpy as np
import pytest

from rsbvp.boundary import BoundaryOperator, apply_B
from rsbvp.certify import certify, compute_A0, sublinearity_probe
from rsbvp.funcspace import Grid, random_trajectory, sup_norm
from rsbvp.linode import LinearBVP, LinearOperator
from rsbvp.measures import BVMeasure, from_multipoint, stieltjes
from rsbvp.mms import mms_study
from rsbvp.problem import load_fixture
from rsbvp.solver import picard_map, solve_full, solve_semilinear

DIRICHLET = BoundaryOperator.dirichlet()


def _verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def semilinear():
    spec = load_fixture("semilinear")
    return spec, certify(spec)


@pytest.fixture(scope="module")
def bounded():
    spec = load_fixture("bounded_g_plain")
    return spec, certify(spec)


def _random_forcing(spec, rng):
    """A smooth h of random size and a random boundary vector."""
    h = random_trajectory(spec.grid, 1, rng, rng.uniform(0.0, 5.0)).values[:, 0]
    return h, rng.uniform(-2.0, 2.0, spec.n)


def test_step_measure_integral(capsys):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(50):
        t0, beta = rng.uniform(0, 1), rng.uniform(-5, 5)
        a, w, p, c = rng.normal(size=4)

        def f(t):
            return a * np.sin(3 * w * t + p) + c * np.exp(t)

        worst = max(worst, abs(stieltjes(f, BVMeasure.step(t0, beta)) - beta * f(t0)))
    _verdict(capsys, 1, worst <= 1e-9, f"step-measure integral, worst error {worst:.3g} over 50 cases")


def test_linear_core_accuracy(capsys):
    def solve(rhs, m):
        g = Grid(m)
        return g.nodes, LinearBVP(LinearOperator.of("0", "0", "1"), DIRICHLET, g).solve(rhs, [0.0, 0.0])

    t, x = solve(1.0, 1001)
    err_1001 = np.max(np.abs(x.values[:, 0] - t * (t - 1) / 2))
    ms = np.array([51, 101, 201, 401])
    quad_errs, exp_errs = [], []
    for m in ms:
        t, x = solve(1.0, m)
        quad_errs.append(np.max(np.abs(x.values[:, 0] - t * (t - 1) / 2)))
        t, x = solve(np.exp, m)
        exp_errs.append(np.max(np.abs(x.values[:, 0] - (np.exp(t) - 1 - (np.e - 1) * t))))
    h = 1.0 / (ms - 1)
    exp_order = np.polyfit(np.log(h), np.log(exp_errs), 1)[0]
    # the scheme integrates the quadratic exactly, so its error has no h
    # dependence to fit; the order is read off a non-polynomial solution
    at_roundoff = max(quad_errs) <= 1e-12
    ok = err_1001 <= 1e-6 and at_roundoff and exp_order >= 3.5
    _verdict(capsys, 2, ok,
             f"x''=1 error {err_1001:.3g} at m=1001, max {max(quad_errs):.3g} over m=51..401; "
             f"x''=e^t order {exp_order:.3f}")


def test_boundary_constants(capsys):
    lin = LinearBVP(LinearOperator.of("0", "0", "1"), DIRICHLET, Grid(1001))
    BM = lin.BM
    basis_sum = sum(sup_norm(u) for u in lin.F.basis)
    ok = (np.array_equal(BM.entries, [[0.5, 0.0], [0.5, 0.5]]) and BM.b0 == 4.0
          and basis_sum <= 1 + 1e-12)
    _verdict(capsys, 3, ok, f"boundary matrix {BM.entries.tolist()}, B0 = {BM.b0!r}, sum |u_i| = {basis_sum!r}")


def test_green_sup(capsys):
    a_second = compute_A0(LinearBVP(LinearOperator.of("0", "0", "1"), DIRICHLET, Grid(1001)), 201)
    first = LinearBVP(LinearOperator.of("0", "1"), BoundaryOperator.multipoint([0.0], [[[1.0]]]), Grid(1001))
    a_first = compute_A0(first, 201)
    ok = abs(a_second - 0.125) <= 1e-3 and abs(a_first - 1.0) <= 1e-3
    _verdict(capsys, 4, ok, f"A0 = {a_second:.6f} (x''), {a_first:.6f} (x')")


def test_contraction_suite(semilinear, capsys):
    spec, cert = semilinear
    q = cert.q
    rng = np.random.default_rng(5)
    worst_ratio = 0.0
    for _ in range(100):
        h, v = _random_forcing(spec, rng)
        x1 = random_trajectory(spec.grid, 2, rng, rng.uniform(0, 20))
        x2 = random_trajectory(spec.grid, 2, rng, rng.uniform(0, 20))
        d = sup_norm(picard_map(spec, x1, h, v) - picard_map(spec, x2, h, v))
        worst_ratio = max(worst_ratio, d / sup_norm(x1 - x2))
    h, v = _random_forcing(spec, rng)
    a = solve_semilinear(spec, h, v, q).solution
    b = solve_semilinear(spec, h, v, q, x0=random_trajectory(spec.grid, 2, rng, 50.0)).solution
    gap = sup_norm(a - b)
    mms = mms_study(spec, "sin(pi*t)", grids=(spec.m,), tol=spec.tol)
    err, bound = mms.errors[0], mms.apriori_bounds[0]
    ok = q < 1 and worst_ratio <= q * (1 + 1e-6) and gap <= 2 * spec.tol and err <= bound + 1e-6
    _verdict(capsys, 5, ok,
             f"q = {q:.6f}, worst step ratio {worst_ratio:.6f}, two-start gap {gap:.3g}, "
             f"manufactured error {err:.3g} vs a-priori bound {bound:.3g}")


def test_solution_map_lipschitz(semilinear, capsys):
    spec, cert = semilinear
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        h1, v1 = _random_forcing(spec, rng)
        h2, v2 = _random_forcing(spec, rng)
        x1 = solve_semilinear(spec, h1, v1, cert.q).solution
        x2 = solve_semilinear(spec, h2, v2, cert.q).solution
        data = np.max(np.abs(h1 - h2)) + np.max(np.abs(v1 - v2))
        worst = max(worst, sup_norm(x1 - x2) / (cert.k * data))
    _verdict(capsys, 6, worst <= 1 + 1e-6, f"K = {cert.k:.6f}, worst ||dx|| / (K ||d(h,v)||) = {worst:.6f}")


def test_ball_suite(bounded, capsys):
    spec, cert = bounded
    exact_radius = cert.m == cert.m0 + cert.k * 1.0
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(100):
        r = cert.m if i == 0 else cert.m * rng.uniform(0, 1)
        x = random_trajectory(spec.grid, spec.n, rng, r)
        tx = solve_semilinear(spec, spec.G(x), spec.phi_of(x), cert.q).solution
        worst = max(worst, sup_norm(tx))
    rep = solve_full(spec, cert.q, ball=cert.m)
    # x = 0 solves this fixture; the forced variant has a non-trivial solution
    forced = load_fixture("bounded_g")
    fcert = certify(forced)
    frep = solve_full(forced, fcert.q, ball=fcert.m)
    ok = (exact_radius and worst <= cert.m + 1e-6 and rep.converged and rep.residual.worst <= 1e-5
          and frep.converged and frep.residual.worst <= 1e-5)
    _verdict(capsys, 7, ok,
             f"M = {cert.m!r} (M0 + K = {cert.m0 + cert.k!r}), worst image norm {worst:.6f}, "
             f"residuals {rep.residual.worst:.3g} and {frep.residual.worst:.3g} (forced, "
             f"||x|| = {sup_norm(frep.solution):.4f})")


def test_sublinearity(bounded, capsys):
    spec, _ = bounded
    probe = sublinearity_probe(spec)
    ok = probe.norms == (10.0, 100.0, 1000.0, 10000.0) and probe.decreasing and probe.ratios[-1] < 1e-3
    ratios = ", ".join(f"{r:.3g}" for r in probe.ratios)
    _verdict(capsys, 8, ok, f"||G(x)||/||x|| at 1e1..1e4: {ratios}")


def test_multipoint_assembly(capsys):
    rng = np.random.default_rng(9)
    grid = Grid(1001)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(1, 5))
        points = rng.uniform(0, 1, k)
        points[rng.random(k) < 0.2] = 0.0  # endpoints and repeats
        points[rng.random(k) < 0.2] = 1.0
        mats = rng.normal(size=(k, n, n))
        x = random_trajectory(grid, n, rng, rng.uniform(0.1, 10))
        assembled = apply_B(BoundaryOperator(from_multipoint(points, mats)), x)
        direct = sum(b @ np.array([x.eval(t, j) for j in range(n)]) for t, b in zip(points, mats))
        worst = max(worst, np.max(np.abs(assembled - direct)))
    _verdict(capsys, 9, worst <= 1e-10, f"multipoint assembly, worst gap {worst:.3g} over 50 configurations")


def test_determinism(tmp_path, capsys):
    def run(tag):
        cert = tmp_path / f"cert{tag}.toml"
        csv = tmp_path / f"x{tag}.csv"
        for argv in (["certify", "fixture:bounded_g", "--seed", "3", "-o", str(cert)],
                     ["solve", "fixture:bounded_g", "--seed", "3", "-o", str(csv)]):
            subprocess.run([sys.executable, "-m", "rsbvp", *argv], check=True, capture_output=True)
        return cert.read_bytes(), csv.read_bytes(), csv.with_suffix(".report.toml").read_bytes()

    first, second = run("a"), run("b")
    _verdict(capsys, 10, first == second, "certify and solve outputs byte-identical across two processes")
