import itertools

import numpy as np
import pytest

from utilmax.market import (MeasureQ, binomial, check_simple_martingale, is_martingale_measure,
                            martingale_polytope, random_measures, random_tree, trinomial,
                            wealth_process)
from utilmax.market.tree import ScenarioTree


def brute_vertices(tree):
    """Basic feasible solutions of {A z = b, z >= 0} by subset enumeration."""
    p = tree.p_leaf
    A = np.vstack([(tree.gain_matrix * p[:, None]).T, p[None, :]])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    n = A.shape[1]
    r = np.linalg.matrix_rank(A)
    found = []
    for size in range(1, r + 1):
        for S in itertools.combinations(range(n), size):
            sub = A[:, S]
            if np.linalg.matrix_rank(sub) < size:
                continue
            z_S, *_ = np.linalg.lstsq(sub, b, rcond=None)
            if np.abs(sub @ z_S - b).max() > 1e-9 or z_S.min() < -1e-12:
                continue
            z = np.zeros(n)
            z[list(S)] = np.maximum(z_S, 0)
            if not any(np.allclose(z, v, atol=1e-9) for v in found):
                found.append(z)
    return np.array(found)


def as_set(V):
    return sorted(tuple(np.round(v, 9)) for v in V)


def test_binomial_unique_measure():
    tree = binomial()
    poly = martingale_polytope(tree)
    assert len(poly.vertices) == 1
    q = poly.vertices[0] * tree.p_leaf
    np.testing.assert_allclose(q, [1 / 3, 2 / 3], atol=1e-14)


def test_trinomial_vertices():
    tree = trinomial()
    poly = martingale_polytope(tree)
    probs = poly.vertices * tree.p_leaf
    assert as_set(probs) == as_set([[1 / 3, 0, 2 / 3], [0, 1, 0]])
    assert not poly.equivalent_exists or poly.contains(np.ones(3) * 0 + poly.interior_point())


def test_increasing_prices_give_empty_polytope():
    tree = ScenarioTree.from_nodes([
        {"id": 0, "parent": None, "t": 0, "p_cond": 1, "prices": [1.0]},
        {"id": 1, "parent": 0, "t": 1, "p_cond": 0.5, "prices": [2.0]},
        {"id": 2, "parent": 0, "t": 1, "p_cond": 0.5, "prices": [1.5]}])
    poly = martingale_polytope(tree)
    assert poly.empty
    assert poly.diagnostics


def test_vertices_match_brute_force_enumeration():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 25:
        tree = random_tree(rng)
        if tree.leaves.size > 12:
            continue
        poly = martingale_polytope(tree)
        assert as_set(poly.vertices) == as_set(brute_vertices(tree))
        checked += 1


def test_membership_two_routes():
    tree = binomial()
    rep = is_martingale_measure(tree, MeasureQ.from_probs([1 / 3, 2 / 3], tree.p_leaf))
    assert rep.is_member and rep.routes_agree
    rep = is_martingale_measure(tree, MeasureQ.from_probs([0.5, 0.5], tree.p_leaf))
    assert not rep.is_member and rep.routes_agree
    assert rep.max_residual == pytest.approx(0.25)


def test_membership_agrees_with_polytope(rng):
    for _ in range(15):
        tree = random_tree(rng)
        poly = martingale_polytope(tree)
        for z in random_measures(poly, rng, 4):
            assert is_martingale_measure(tree, z).is_member
        z = rng.dirichlet(np.ones(tree.leaves.size)) / tree.p_leaf
        rep = is_martingale_measure(tree, z)
        assert rep.routes_agree
        assert rep.is_member == poly.contains(z)


def test_simple_martingale_residuals(rng):
    tree = binomial()
    H = np.ones((3, 1))
    res = check_simple_martingale(tree, MeasureQ.from_probs([0.5, 0.5], tree.p_leaf), H)
    assert res[0] == pytest.approx(0.25)
    assert np.all(check_simple_martingale(tree, np.array([2.0, 0.0]), np.zeros((3, 1))) == 0)
    for _ in range(10):
        tree = random_tree(rng)
        poly = martingale_polytope(tree)
        H = rng.standard_normal((tree.n_nodes, tree.d))
        for v in poly.vertices:
            assert np.abs(check_simple_martingale(tree, v, H, 0.3)).max() <= 1e-10


def test_support_function_is_vertex_max(rng):
    tree = trinomial()
    poly = martingale_polytope(tree)
    f = rng.standard_normal(3)
    best, _ = poly.support(f)
    assert best == pytest.approx(max(v @ (tree.p_leaf * f) for v in poly.vertices))


def test_vertex_expectations_of_wealth_are_x(rng):
    tree = random_tree(rng)
    poly = martingale_polytope(tree)
    H = rng.standard_normal((tree.n_nodes, tree.d))
    X = wealth_process(tree, H, 0.7)[tree.leaves]
    np.testing.assert_allclose(poly.vertices @ (tree.p_leaf * X), 0.7, atol=1e-10)
