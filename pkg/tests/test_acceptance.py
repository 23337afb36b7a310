"""Acceptance criteria 1-13; each test prints one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from utilmax.market import (MeasureQ, binomial, kl_divergence, martingale_polytope, random_tree,
                            trinomial)
from utilmax.market.levy import levy_moment_check
from utilmax.market.localize import compound_poisson_paths, level_sets, sigma_localize
from utilmax.orlicz import cosh_young, luxemburg_norm, power_young
from utilmax.solvers import (approx_sequence, duality_certificate, primal_gradient,
                             primal_objective, sampled_market, solve_dual, solve_primal)
from utilmax.solvers.approx import oracle_strategy
from utilmax.utility import ConjugateFunction, Exponential, Power, Quadratic, ShiftedLog, \
    TruncatedLinear
from utilmax.verify import check_entropy_mixture, complete_value

KL = (1 / 3) * math.log(2 / 3) + (2 / 3) * math.log(4 / 3)
N_TREES = 200
UTILITIES = (Exponential(1.0), Quadratic(), TruncatedLinear(1.0))


@pytest.fixture
def report(capsys):
    def emit(criterion: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\ncriterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def batch():
    """Solve the 200 seeded random trees under each utility; solver time only."""
    rng = np.random.default_rng(7)
    trees = [random_tree(rng) for _ in range(N_TREES)]
    out, elapsed = [], 0.0
    for tree in trees:
        poly = martingale_polytope(tree)
        for U in UTILITIES:
            t0 = time.perf_counter()
            pr = solve_primal(tree, U, 0.0)
            du = solve_dual(tree, U, 0.0, primal=pr, poly=poly)
            elapsed += time.perf_counter() - t0
            out.append((tree, poly, U, pr, du))
    return out, elapsed


def test_criterion_01_conjugate_pair(report):
    t0 = time.perf_counter()
    U = Exponential(1.0)
    ys = np.linspace(0.1, 10.0, 100)
    numeric = ConjugateFunction(U, mode="numeric")(ys)
    closed = ys * np.log(ys) - ys + 1
    # independent brute-force supremum as a third opinion
    brute = np.array([-minimize_scalar(lambda x: -(1 - math.exp(-x) - x * y),
                                       bounds=(-20, 20), method="bounded",
                                       options={"xatol": 1e-12}).fun for y in ys])
    err = float(np.abs(numeric - closed).max())
    dt = time.perf_counter() - t0
    ok = err <= 1e-8 and float(np.abs(brute - closed).max()) <= 1e-8 and dt < 1.0
    report(1, ok, f"max |V_num - V_closed| = {err:.2e} on 100 y in [0.1, 10], {dt:.2f} s")


def test_criterion_02_strong_duality(batch, report):
    items, elapsed = batch
    worst = max(abs(du.value - pr.value) / (1 + abs(pr.value)) for *_, pr, du in items)
    ok = worst <= 1e-6 and elapsed < 60.0
    report(2, ok, f"{len(items)} instances, worst relative gap {worst:.2e}, "
                  f"solver time {elapsed:.1f} s")


def test_criterion_03_certificates(batch, report):
    items, _ = batch
    worst = dict(fenchel=0.0, budget=0.0, vertex=-math.inf, supermartingale=-math.inf)
    for tree, poly, U, pr, du in items:
        cert = duality_certificate(tree, U, 0.0, pr, du, poly=poly)
        worst["fenchel"] = max(worst["fenchel"], cert.max_fenchel)
        worst["budget"] = max(worst["budget"], abs(cert.budget_residual))
        worst["vertex"] = max(worst["vertex"], -cert.min_vertex_slack)
        worst["supermartingale"] = max(worst["supermartingale"], cert.max_supermartingale)
    ok = all(v <= 1e-8 for v in worst.values())
    report(3, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_04_binomial_closed_form(report):
    tree = binomial()
    U = Exponential(1.0)
    pr = solve_primal(tree, U, 0.0)
    du = solve_dual(tree, U, 0.0, primal=pr)
    # grid-search oracle for the strategy
    hs = np.linspace(0, 1, 100_001)
    vals = 0.5 * (1 - np.exp(-hs)) + 0.5 * (1 - np.exp(0.5 * hs))
    h_grid = hs[int(np.argmax(vals))]
    errs = {
        "H": abs(pr.H[0, 0] - math.log(2) / 1.5),
        "u": abs(pr.value - (1 - math.exp(-KL))),
        "Q": float(np.abs(du.q_hat * tree.p_leaf - [1 / 3, 2 / 3]).max()),
        "y": abs(du.y_hat - math.exp(-KL)),
    }
    ok = all(v <= 1e-8 for v in errs.values()) and abs(h_grid - math.log(2) / 1.5) <= 1e-5
    report(4, ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f", grid H {h_grid:.5f}")


def test_criterion_05_minimal_entropy(report):
    tree = trinomial()
    U = Exponential(1.0)
    du = solve_dual(tree, U, 0.0, primal=solve_primal(tree, U, 0.0))
    V, p = martingale_polytope(tree).vertices, tree.p_leaf
    res = minimize_scalar(lambda t: kl_divergence(MeasureQ(t * V[0] + (1 - t) * V[1], p)),
                          bounds=(0, 1), method="bounded", options={"xatol": 1e-14})
    q_kl = (res.x * V[0] + (1 - res.x) * V[1]) * p
    err = float(np.abs(du.q_hat * p - q_kl).max())
    report(5, err <= 1e-6, f"max coordinate difference {err:.2e}")


def test_criterion_06_quadratic_least_squares(report):
    tree = binomial()
    pr = solve_primal(tree, Quadratic(), 0.0)
    dS = np.array([1.0, -0.5])
    h_ls = np.linalg.lstsq(dS[:, None] * np.sqrt(tree.p_leaf)[:, None],
                           np.sqrt(tree.p_leaf), rcond=None)[0][0]
    err = abs(pr.H[0, 0] - h_ls)
    report(6, err <= 1e-10, f"H = {pr.H[0, 0]:.12f}, least squares {h_ls:.12f}, diff {err:.1e}")


def test_criterion_07_value_chain(batch, report):
    items, _ = batch
    worst, count = -math.inf, 0
    for tree, poly, U, pr, _ in items:
        for z in poly.vertices:
            worst = max(worst, pr.value - complete_value(MeasureQ(z, tree.p_leaf), U, 0.0))
            count += 1
    report(7, worst <= 1e-8, f"{count} vertex comparisons, max u_primal - u_Q = {worst:.2e}")


def test_criterion_08_mixture_inequality(report):
    rng = np.random.default_rng(42)
    utils = (Exponential(1.0), ShiftedLog(1.0), Power(0.5), Quadratic())
    worst = -math.inf
    for k in range(1000):
        n = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(n))
        Q1 = MeasureQ.from_probs(rng.dirichlet(np.ones(n)), p)
        Q2 = MeasureQ.from_probs(rng.dirichlet(np.ones(n)), p)
        y1, y2 = np.exp(rng.uniform(-2, 2, size=2))
        lam = float(rng.uniform())
        rep = check_entropy_mixture(Q1, Q2, y1, y2, lam, utils[k % len(utils)])
        worst = max(worst, rep.worst)
    report(8, worst <= 1e-10, f"1000 tuples, max lhs - rhs = {worst:.2e}")


def test_criterion_09_localization(report):
    t0 = time.perf_counter()
    paths = compound_poisson_paths(100_000, seed=42)
    psi = power_young(1.0)
    cert = sigma_localize(paths, psi, level_sets(paths, [4.0, math.inf]))
    dt = time.perf_counter() - t0
    # independent recomputation of E[Psi((phi . S)^*_T)]
    gains = np.cumsum(cert.phi * np.diff(paths[:, :, 0], axis=1), axis=1)
    direct = float(np.mean(np.abs(gains).max(axis=1)))
    ok = (cert.ok and cert.expectation <= cert.bound
          and abs(direct - cert.expectation) <= 1e-12 * (1 + direct) and dt < 10.0)
    report(9, ok, f"E = {cert.expectation:.6f} <= 2(1+b_1) = {cert.bound:.6f}, {dt:.2f} s")


def test_criterion_10_luxemburg_contract(report):
    rng = np.random.default_rng(42)
    psis = (power_young(2.0), power_young(1.0), cosh_young())
    worst_contract, worst_hom = 0.0, 0.0
    for k in range(100):
        psi = psis[k % 3]
        x = rng.standard_normal(int(rng.integers(5, 200))) * rng.uniform(0.1, 3)
        N = luxemburg_norm(psi, x)
        worst_contract = max(worst_contract, psi.mean(x, np.full(x.size, 1 / x.size), N))
        c = float(rng.uniform(0.1, 10))
        worst_hom = max(worst_hom, abs(luxemburg_norm(psi, c * x) - c * N) / (c * N))
    ok = worst_contract <= 1.0 and worst_hom <= 1e-10
    report(10, ok, f"max E[Psi(X/N)] = {worst_contract:.12f}, homogeneity {worst_hom:.1e}")


def test_criterion_11_approximation(report):
    tree = binomial()
    U = Exponential(0.05)
    pr = solve_primal(tree, U, 0.0)
    tr = approx_sequence(tree, pr.H, U, n_max=64)
    bound = math.ceil(float(np.abs(pr.H).max()))
    tree_ok = tr.threshold is not None and tr.threshold <= bound
    sm = sampled_market(seed=42)
    rep = approx_sequence(sm, oracle_strategy(sm), Quadratic(), n_max=64)
    bumps = rep.non_monotone_steps()
    samp_ok = (rep.prob_deviation[-1] < 1e-3 and rep.utility_l1[-1] < 1e-3 and max(bumps) <= 2)
    report(11, tree_ok and samp_ok,
           f"tree zero from n = {tr.threshold} (max|H| = {np.abs(pr.H).max():.3f}); sampled "
           f"P-dev {rep.prob_deviation[-1]:.1e}, L1 {rep.utility_l1[-1]:.1e}, bumps {bumps}")


def test_criterion_12_gradient(report):
    rng = np.random.default_rng(42)
    worst = 0.0
    for k in range(30):
        tree = random_tree(rng)
        U = (Exponential(1.0), Quadratic(), ShiftedLog(1.0))[k % 3]
        m = tree.gain_matrix.shape[1]
        h = rng.standard_normal(m) * 0.05
        g = primal_gradient(tree, U, 0.2, h)
        fd = np.array([(primal_objective(tree, U, 0.2, h + 1e-5 * e)
                        - primal_objective(tree, U, 0.2, h - 1e-5 * e)) / 2e-5 for e in np.eye(m)])
        worst = max(worst, float(np.abs(fd - g).max()) / max(float(np.abs(g).max()), 1.0))
    report(12, worst <= 1e-6, f"30 instances, max relative FD error {worst:.1e}")


def test_criterion_13_levy_threshold(report):
    worst = 0.0
    for eta in (0.7, 2.0, 3.7):
        lo, hi = 0.01 * eta, 2 * eta
        assert levy_moment_check("double-exponential", {"eta": eta}, "exp", lo).finite
        assert not levy_moment_check("double-exponential", {"eta": eta}, "exp", hi).finite
        while hi - lo > 1e-8:
            mid = 0.5 * (lo + hi)
            if levy_moment_check("double-exponential", {"eta": eta}, "exp", mid).finite:
                lo = mid
            else:
                hi = mid
        worst = max(worst, abs(0.5 * (lo + hi) - eta))
    report(13, worst <= 1e-6, f"eta in (0.7, 2, 3.7), max |boundary - eta| = {worst:.1e}")
