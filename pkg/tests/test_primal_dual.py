import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from utilmax.market import (MeasureQ, binomial, generalized_entropy, kl_divergence,
                            martingale_polytope, random_tree, trinomial)
from utilmax.market.tree import ScenarioTree
from utilmax.solvers import (PrimalUnbounded, primal_gradient, primal_objective,
                             recover_strategy, solve, solve_dual, solve_primal)
from utilmax.utility import DomainError, Exponential, Quadratic, ShiftedLog, TruncatedLinear

LN2_15 = math.log(2) / 1.5


def grid_argmax(fun, lo, hi, n=4001):
    """Grid search followed by bounded refinement."""
    hs = np.linspace(lo, hi, n)
    k = int(np.argmax([fun(h) for h in hs]))
    res = minimize_scalar(lambda h: -fun(h), bounds=(hs[max(k - 1, 0)], hs[min(k + 1, n - 1)]),
                          method="bounded", options={"xatol": 1e-13})
    return res.x, -res.fun


def test_binomial_exponential(binom):
    U = Exponential(1.0)
    pr = solve_primal(binom, U, 0.0)
    h_or, u_or = grid_argmax(lambda h: 0.5 * (1 - math.exp(-h)) + 0.5 * (1 - math.exp(0.5 * h)),
                             -2, 2)
    assert pr.H[0, 0] == pytest.approx(h_or, abs=1e-7)
    assert pr.H[0, 0] == pytest.approx(LN2_15, abs=1e-10)
    assert pr.value == pytest.approx(u_or, abs=1e-12)
    assert pr.value == pytest.approx(0.055059, abs=5e-7)
    assert pr.grad_norm <= 1e-10


def test_trinomial_exponential(trinom):
    U = Exponential(1.0)
    pr = solve_primal(trinom, U, 0.0)
    fun = lambda h: np.mean([1 - math.exp(-h * d) for d in (1.0, 0.0, -0.5)])  # noqa: E731
    h_or, u_or = grid_argmax(fun, -2, 2)
    assert pr.H[0, 0] == pytest.approx(h_or, abs=1e-7)
    assert pr.H[0, 0] == pytest.approx(LN2_15, abs=1e-10)
    assert pr.value == pytest.approx(0.036706, abs=5e-7)


def test_quadratic_matches_least_squares(binom):
    pr = solve_primal(binom, Quadratic(), 0.0)
    dS = np.array([1.0, -0.5])
    p = binom.p_leaf
    h_ls = np.dot(p, dS) / np.dot(p, dS**2)
    assert h_ls == pytest.approx(0.4)
    assert pr.H[0, 0] == pytest.approx(h_ls, abs=1e-10)
    assert pr.value == pytest.approx(0.05, abs=1e-12)


def test_binomial_dual(binom):
    U = Exponential(1.0)
    pr = solve_primal(binom, U, 0.0)
    du = solve_dual(binom, U, 0.0, primal=pr)
    np.testing.assert_allclose(du.q_hat * binom.p_leaf, [1 / 3, 2 / 3], atol=1e-10)
    assert du.y_hat == pytest.approx(0.944941, abs=5e-7)
    assert du.value == pytest.approx(pr.value, abs=1e-10)
    np.testing.assert_allclose(du.Z, np.exp(-pr.f_hat), atol=1e-9)
    assert du.consistent


def kl_minimiser(tree):
    """Minimise KL over the segment between the two trinomial vertices."""
    V = martingale_polytope(tree).vertices
    p = tree.p_leaf
    f = lambda t: kl_divergence(MeasureQ(t * V[0] + (1 - t) * V[1], p))  # noqa: E731
    res = minimize_scalar(f, bounds=(0, 1), method="bounded", options={"xatol": 1e-14})
    return (res.x * V[0] + (1 - res.x) * V[1]) * p


def test_trinomial_dual_is_minimal_entropy(trinom):
    U = Exponential(1.0)
    du = solve_dual(trinom, U, 0.0, primal=solve_primal(trinom, U, 0.0))
    q = du.q_hat * trinom.p_leaf
    np.testing.assert_allclose(q, kl_minimiser(trinom), atol=1e-6)
    np.testing.assert_allclose(q, [0.21799, 0.34603, 0.43598], atol=5e-6)
    assert 2 * q[0] + q[1] + 0.5 * q[2] == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("U", [Exponential(1.0), Quadratic(), ShiftedLog(1.0),
                               TruncatedLinear(1.0)], ids=lambda u: u.spec())
def test_unique_measure_market(binom, U):
    du = solve_dual(binom, U, 0.0, primal=solve_primal(binom, U, 0.0))
    np.testing.assert_allclose(du.q_hat * binom.p_leaf, [1 / 3, 2 / 3], atol=1e-9)


def test_weak_duality_everywhere(rng):
    for _ in range(10):
        tree = random_tree(rng)
        poly = martingale_polytope(tree)
        U = Exponential(1.0)
        for _ in range(5):
            H = rng.standard_normal((tree.n_nodes, tree.d))
            h = tree.pack(H)
            y = float(rng.uniform(0.1, 3))
            for v in poly.vertices:
                lhs = primal_objective(tree, U, 0.2, h)
                rhs = 0.2 * y + generalized_entropy(MeasureQ(v, tree.p_leaf), U, y)
                assert lhs <= rhs + 1e-10


def test_gradient_against_finite_differences(rng):
    for U in (Exponential(1.0), Quadratic(), ShiftedLog(1.0)):
        tree = random_tree(rng)
        m = tree.gain_matrix.shape[1]
        for _ in range(10):
            h = rng.standard_normal(m) * 0.05
            g = primal_gradient(tree, U, 0.2, h)
            fd = np.empty(m)
            for j in range(m):
                e = np.zeros(m)
                e[j] = 1e-5
                fd[j] = (primal_objective(tree, U, 0.2, h + e)
                         - primal_objective(tree, U, 0.2, h - e)) / 2e-5
            assert np.abs(fd - g).max() <= 1e-6 * max(np.abs(g).max(), 1.0)


def test_exponential_scale_covariance(rng):
    tree = random_tree(rng)
    a = solve(tree, Exponential(1.0), 0.0)
    b = solve(tree, Exponential(2.5), 0.0)
    # strategies may be non-unique on redundant assets; terminal wealth is unique
    np.testing.assert_allclose(b[0].f_hat, a[0].f_hat / 2.5, atol=1e-8)
    np.testing.assert_allclose(b[1].q_hat, a[1].q_hat, atol=1e-8)


def test_marginal_identity_on_strictly_concave(rng):
    for U in (Exponential(1.0), ShiftedLog(1.0)):
        for _ in range(5):
            tree = random_tree(rng)
            pr, du, _ = solve(tree, U, 0.1)
            np.testing.assert_allclose(du.Z, U.marginal(pr.f_hat), atol=1e-8)


def test_arbitrage_ray_is_reported():
    tree = ScenarioTree.from_nodes([
        {"id": 0, "parent": None, "t": 0, "p_cond": 1, "prices": [1.0]},
        {"id": 1, "parent": 0, "t": 1, "p_cond": 0.3, "prices": [2.0]},
        {"id": 2, "parent": 0, "t": 1, "p_cond": 0.3, "prices": [1.0]},
        {"id": 3, "parent": 0, "t": 1, "p_cond": 0.4, "prices": [1.0]}])
    assert not martingale_polytope(tree).empty
    with pytest.raises(PrimalUnbounded) as exc:
        solve_primal(tree, Exponential(1.0), 0.0)
    ray = exc.value.ray
    gains = tree.gain_matrix @ tree.pack(ray)
    assert gains.min() >= -1e-12 and gains.max() > 0


def test_satiated_primal():
    tree = trinomial()
    pr = solve_primal(tree, TruncatedLinear(1.0), 1.5)
    assert pr.satiated and pr.value == 1.0
    assert np.all(pr.H == 0)


def test_domain_error():
    with pytest.raises(DomainError):
        solve_primal(binomial(), ShiftedLog(1.0), -1.0)


# ------------------------------------------------------------- replication


def test_recover_binomial(binom):
    Q = MeasureQ.from_probs([1 / 3, 2 / 3], binom.p_leaf)
    rep = recover_strategy(binom, Q, np.array([LN2_15, -LN2_15 / 2]), 0.0)
    assert rep.H[0, 0] == pytest.approx(LN2_15, abs=1e-12)
    assert rep.support_residual <= 1e-12 and rep.attainable


def test_recover_cash(trinom):
    V = martingale_polytope(trinom).vertices
    rep = recover_strategy(trinom, MeasureQ(V.mean(0), trinom.p_leaf), np.full(3, 0.4), 0.4)
    np.testing.assert_allclose(rep.H, 0.0, atol=1e-14)
    assert rep.attainable


def test_recover_round_trip(rng):
    for _ in range(10):
        tree = random_tree(rng)
        pr, du, _ = solve(tree, Exponential(1.0), 0.0)
        rep = recover_strategy(tree, MeasureQ(du.q_hat, tree.p_leaf), pr.f_hat, 0.0)
        assert rep.attainable
        assert rep.martingale_residual <= 1e-10
        from utilmax.market import wealth_process
        X = wealth_process(tree, rep.H, 0.0)[tree.leaves]
        np.testing.assert_allclose(X, pr.f_hat, atol=1e-8)
