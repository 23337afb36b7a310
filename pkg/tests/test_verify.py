import math

import numpy as np
import pytest

from utilmax.market import MeasureQ, martingale_polytope, random_tree, wealth_process
from utilmax.market.entropy import generalized_entropy
from utilmax.solvers import DualSolution, PrimalSolution, solve, solve_complete, solve_primal
from utilmax.utility import Exponential, Linear, ShiftedLog, TruncatedLinear
from utilmax.verify import (CheckReport, check_entropy_mixture, check_inada_growth,
                            check_satiation_gap, check_satiation_set, check_supermartingale,
                            check_value_chain, complete_value, reports_to_csv)

P = np.array([0.5, 0.5])
Q13 = MeasureQ.from_probs([1 / 3, 2 / 3], P)
U_EXP = Exponential(1.0)


def test_report_semantics():
    rep = CheckReport("demo", 1e-8)
    assert rep.passed and rep.worst == -math.inf
    rep.add("a", 1e-9)
    assert rep.passed
    rep.add("b", 1e-7)
    assert not rep.passed and rep.failures == [("b", 1e-7)]
    assert rep.summary().startswith("FAIL demo")
    text = reports_to_csv([rep])
    assert text.splitlines() == ["check,location,residual,pass", "demo,a,1e-09,1",
                                 "demo,b,1e-07,0"]


# ------------------------------------------------------------- value chain


def test_value_chain_binomial_equality(binom):
    rep = check_value_chain(binom, U_EXP, 0.0)
    assert rep.passed
    # unique measure: every row is the same equality
    np.testing.assert_allclose([r for _, r in rep.rows], 0.0, atol=1e-10)


def test_value_chain_trinomial_against_direct_vertices(trinom):
    rep = check_value_chain(trinom, U_EXP, 0.0)
    assert rep.passed
    u = solve_primal(trinom, U_EXP, 0.0).value
    kl = (1 / 3) * math.log(2 / 3) + (2 / 3) * math.log(4 / 3)
    # mid-only vertex: cash on the charged state, U(+inf) = 1 elsewhere
    u_mid = (1 / 3) * 0.0 + 2 / 3
    # up/down vertex: a binomial market on two states plus U(+inf) on the middle one
    u_ud = (2 / 3) * (1 - math.exp(-kl)) + 1 / 3
    rows = dict(rep.rows)
    assert sorted([rows["vertex[0]"], rows["vertex[1]"]]) == pytest.approx(
        sorted([u - u_mid, u - u_ud]), abs=1e-10)
    assert u == pytest.approx(0.036706, abs=5e-7)


def test_value_chain_cash_strategy(trinom):
    rep = check_value_chain(trinom, U_EXP, 0.3, primal_value=float(U_EXP(0.3)))
    assert rep.passed and rep.worst < 0


def test_complete_value_zero_density():
    Q = MeasureQ(np.array([0.0, 3.0, 0.0]), np.full(3, 1 / 3))
    U = TruncatedLinear(1.0)
    for x in (-0.5, 0.0, 0.5):
        assert complete_value(Q, U, x) == pytest.approx(float(U(x)) / 3 + 2 / 3, abs=1e-12)


# ------------------------------------------------------------- supermartingale


def test_supermartingale_optimal_strategy(rng):
    for _ in range(5):
        tree = random_tree(rng)
        pr = solve_primal(tree, U_EXP, 0.0)
        rep = check_supermartingale(tree, pr.H, martingale_polytope(tree))
        assert rep.passed and abs(rep.worst) <= 1e-10


def test_supermartingale_any_strategy(rng):
    tree = random_tree(rng)
    poly = martingale_polytope(tree)
    for _ in range(5):
        H = rng.standard_normal((tree.n_nodes, tree.d)) * 10
        assert check_supermartingale(tree, H, poly).passed


def test_supermartingale_corrupted_node(binom):
    H = np.zeros((binom.n_nodes, 1))
    X = wealth_process(binom, H, 0.0)
    X[binom.internal[0]] -= 0.1       # root below its children: gain 0.1 under Q
    rep = check_supermartingale(binom, H, martingale_polytope(binom), wealth=X)
    assert not rep.passed
    assert rep.worst == pytest.approx(0.1)
    root = binom.ids[0] if binom.ids else 0
    assert all(loc.endswith(f"@{root}") for loc, _ in rep.failures)


def test_supermartingale_vertex_reduction(rng):
    """Mixture verdicts never disagree with vertex verdicts."""
    for _ in range(10):
        tree = random_tree(rng)
        poly = martingale_polytope(tree)
        X = rng.standard_normal(tree.n_nodes)
        v = check_supermartingale(tree, None, poly.vertices, wealth=X)
        m = check_supermartingale(tree, None, poly, wealth=X, seed=int(rng.integers(1000)))
        if v.passed:
            assert m.passed


def test_reports_reproducible(trinom):
    a = check_value_chain(trinom, U_EXP, 0.0, seed=42)
    b = check_value_chain(trinom, U_EXP, 0.0, seed=42)
    assert a.rows == b.rows


# ------------------------------------------------------------- Inada and satiation


def test_inada_exponential():
    assert check_inada_growth(Q13, U_EXP).passed


def test_inada_linear_fails():
    rep = check_inada_growth(MeasureQ.reference(P), Linear())
    assert not rep.passed


def test_inada_shifted_log_ratios_decrease():
    U = ShiftedLog(1.0)
    assert check_inada_growth(Q13, U).passed
    xs = 2.0 ** np.arange(12)
    ratios = [solve_complete(Q13, U, float(x)).value / x for x in xs]
    assert np.all(np.diff(ratios) < 0)


def test_satiation_gap_truncated_linear():
    U = TruncatedLinear(1.0)
    rep = check_satiation_gap(Q13, U, [0.0, 1.0])
    assert rep.passed
    assert solve_complete(Q13, U, 0.0).value == pytest.approx(0.25)
    assert solve_complete(Q13, U, 1.0).value == pytest.approx(1.0)


def test_satiation_gap_exponential():
    assert check_satiation_gap(Q13, U_EXP, np.linspace(-2, 20, 12)).passed


# ------------------------------------------------------------- entropy mixture


def test_mixture_degenerate_cases(rng):
    rep = check_entropy_mixture(Q13, Q13, 0.7, 0.7, 0.4, U_EXP)
    assert rep.passed and rep.worst == pytest.approx(0.0, abs=1e-12)
    Q2 = MeasureQ.from_probs([0.6, 0.4], P)
    rep = check_entropy_mixture(Q13, Q2, 0.5, 2.0, 1.0, U_EXP)
    assert rep.worst == pytest.approx(0.0, abs=1e-12)


def test_mixture_against_direct_sums(rng):
    for _ in range(20):
        q1, q2 = rng.dirichlet([1, 1]), rng.dirichlet([1, 1])
        Q1, Q2 = MeasureQ.from_probs(q1, P), MeasureQ.from_probs(q2, P)
        lam, y1, y2 = 0.3, 0.5, 2.0
        yt = 1 / (lam / y1 + (1 - lam) / y2)
        a = yt * lam / y1
        mix = lam * q1 + (1 - lam) * q2
        V = lambda y: y * np.log(y) - y + 1  # noqa: E731
        lhs = float(np.sum(P * V(yt * mix / P)))
        rhs = a * float(np.sum(P * V(y1 * q1 / P))) + (1 - a) * float(np.sum(P * V(y2 * q2 / P)))
        rep = check_entropy_mixture(Q1, Q2, y1, y2, lam, U_EXP)
        assert rep.passed
        assert rep.worst == pytest.approx(lhs - rhs, abs=1e-12)
        assert generalized_entropy(Q1, U_EXP, y1) == pytest.approx(
            float(np.sum(P * V(y1 * q1 / P))), abs=1e-12)


# ------------------------------------------------------------- satiation set


def test_satiation_set_exponential(binom):
    pr, du, _ = solve(binom, U_EXP, 0.0)
    rep = check_satiation_set(pr, du, U_EXP, binom.p_leaf)
    assert rep.passed and not rep.notes


def test_satiation_set_boundary_mass(binom):
    U = TruncatedLinear(1.0)
    pr, du, _ = solve(binom, U, 0.0)
    rep = check_satiation_set(pr, du, U, binom.p_leaf)
    assert rep.passed
    assert any("boundary mass 0.5" in n for n in rep.notes)


def test_satiation_set_zero_density_state():
    """Three states, density charging only the middle one."""
    U = TruncatedLinear(1.0)
    p = np.full(3, 1 / 3)
    q = np.array([0.0, 3.0, 0.0])
    x = 0.2
    f = np.array([1.0, x, 1.0])       # uncharged states are pushed to the satiation point
    assert float(np.dot(p, U(f))) == pytest.approx(complete_value(MeasureQ(q, p), U, x))
    dual = DualSolution(1.0, q, q.copy(), 0.0, x)
    primal = PrimalSolution(np.zeros((1, 1)), f, float(np.dot(p, U(f))), x)
    rep = check_satiation_set(primal, dual, U, p)
    assert rep.passed and not rep.notes
    bad = PrimalSolution(np.zeros((1, 1)), np.array([0.5, x, 1.0]), 0.0, x)
    rep = check_satiation_set(bad, dual, U, p)
    assert not rep.passed and [loc for loc, _ in rep.failures] == ["leaf[0]"]


def test_satiation_set_satiated_regime(trinom):
    U = TruncatedLinear(1.0)
    pr, du, _ = solve(trinom, U, 2.0)
    rep = check_satiation_set(pr, du, U, trinom.p_leaf)
    assert rep.passed and "SATIATED" in rep.notes[0]


def test_inada_bounded_dual_domain():
    """v_Q is infinite for large y but finite near 0, and the ratio still decays."""
    U = TruncatedLinear(1.0)
    assert not math.isfinite(float(np.dot(Q13.p, U.conjugate(1.0 * Q13.density))))
    rep = check_inada_growth(Q13, U)
    assert rep.passed and any("finite from" in n for n in rep.notes)
