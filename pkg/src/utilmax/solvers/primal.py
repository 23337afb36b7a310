"""Incomplete-market primal problem ``sup_H E_P[U(x + H . S_T)]`` on a tree."""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog

from ..market.polytope import martingale_polytope
from ..market.tree import ScenarioTree
from ..utility import DomainError, UtilityFunction
from .common import (DEFAULT_TOL, INF, ArbitrageError, ConvergenceError, PrimalSolution,
                     PrimalUnbounded, Tolerances, is_piecewise_linear)

__all__ = ["solve_primal", "primal_objective", "primal_gradient", "arbitrage_ray"]

LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def primal_objective(tree: ScenarioTree, U: UtilityFunction, x: float, h) -> float:
    """``E_P[U(x + G h)]`` for a packed strategy ``h``."""
    f = x + tree.gain_matrix @ np.asarray(h, dtype=float)
    with np.errstate(invalid="ignore"):
        return float(np.dot(tree.p_leaf, U(f)))


def primal_gradient(tree: ScenarioTree, U: UtilityFunction, x: float, h) -> np.ndarray:
    """Gradient ``G^T (p U'(x + G h))`` of the primal objective (smooth families)."""
    G = tree.gain_matrix
    f = x + G @ np.asarray(h, dtype=float)
    return G.T @ (tree.p_leaf * U.marginal(f))


def arbitrage_ray(tree: ScenarioTree) -> np.ndarray | None:
    """A packed strategy with ``G h >= 0`` and ``E_P[G h] > 0``, if one exists."""
    G, p = tree.gain_matrix, tree.p_leaf
    m = G.shape[1]
    # maximise E_P[G h] subject to G h >= 0 and G h <= 1
    res = linprog(-(p @ G), A_ub=np.vstack([-G, G]),
                  b_ub=np.concatenate([np.zeros(len(p)), np.ones(len(p))]),
                  bounds=[(None, None)] * m, method="highs")
    if res.status == 0 and -res.fun > 1e-9:
        return res.x
    return None


def _check_market(tree: ScenarioTree):
    poly = martingale_polytope(tree)
    if poly.empty:
        raise ArbitrageError("; ".join(poly.diagnostics) or "no martingale measure")
    ray = arbitrage_ray(tree)
    if ray is not None:
        raise PrimalUnbounded("arbitrage: a costless strategy gains with positive probability; "
                              "the supremum is not attained", tree.unpack(ray))
    return poly


def solve_primal(tree: ScenarioTree, U: UtilityFunction, x: float,
                 tol: Tolerances = DEFAULT_TOL, max_iter: int = 200) -> PrimalSolution:
    """Optimal strategy and terminal wealth (damped Newton or an exact LP)."""
    if not x > U.x_lo:
        raise DomainError(f"x = {x} is not above the domain infimum {U.x_lo}")
    _check_market(tree)
    n_leaf = tree.leaves.size
    if x >= U.x_bliss:
        f = np.full(n_leaf, float(x))
        return PrimalSolution(np.zeros((tree.n_nodes, tree.d)), f, float(U.sup_value), x,
                              method="satiated", satiated=True,
                              notes=["SATIATED: x >= satiation point, cash attains U(+inf)"])
    if is_piecewise_linear(U):
        return _solve_lp(tree, U, x)
    if not U.smooth:
        raise NotImplementedError("no primal method for non-smooth, non-piecewise-linear U")
    return _solve_newton(tree, U, x, tol, max_iter)


def _solve_newton(tree, U, x, tol, max_iter) -> PrimalSolution:
    G, p = tree.gain_matrix, tree.p_leaf
    m = G.shape[1]
    h = np.zeros(m)

    def state(h):
        f = x + G @ h
        with np.errstate(invalid="ignore", over="ignore"):
            val = float(np.dot(p, U(f)))
        return f, val

    f, val = state(h)
    it, gnorm, polish = 0, INF, 0
    for it in range(1, max_iter + 1):
        mu = U.marginal(f)
        g = G.T @ (p * mu)
        gnorm = float(np.abs(g).max(initial=0.0))
        scale = max(float(np.dot(p, mu)), 1e-300)
        converged = gnorm <= tol.gradient * max(1.0, scale) or gnorm / scale <= tol.gradient
        Hn = G.T @ (G * (p * -U.curvature(f))[:, None])   # negative Hessian, PSD
        reg = 1e-13 * (1.0 + float(np.abs(Hn).max(initial=0.0)))
        step = np.linalg.lstsq(Hn + reg * np.eye(m), g, rcond=None)[0]
        if converged:
            # polish: the gradient test alone leaves wealth errors along flat directions
            move = float(np.abs(G @ step).max(initial=0.0))
            if polish >= 5 or move <= 1e-14 * (1.0 + float(np.abs(f).max(initial=0.0))):
                break
            f_new, v_new = state(h + step)
            g_new = G.T @ (p * U.marginal(f_new))
            if not (math.isfinite(v_new) and np.abs(g_new).max(initial=0.0) <= gnorm):
                break
            h, f, val, polish = h + step, f_new, v_new, polish + 1
            continue
        slope = float(g @ step)
        if not slope > 0:
            step, slope = g / max(float(np.abs(Hn).max(initial=1.0)), 1e-300), float(g @ g)
        t, accepted = 1.0, False
        for _ in range(60):
            f_new, v_new = state(h + t * step)
            if math.isfinite(v_new) and v_new >= val + 1e-4 * t * slope:
                accepted = True
                break
            # near the optimum the Armijo gain drowns in rounding: accept if the gradient shrinks
            if math.isfinite(v_new) and v_new >= val - 4e-16 * (1 + abs(val)):
                g_new = G.T @ (p * U.marginal(f_new))
                if np.abs(g_new).max(initial=0.0) < gnorm:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            raise ConvergenceError(f"line search failed at iteration {it} (|grad| = {gnorm:.3e})")
        h = h + t * step
        f, val = f_new, v_new
    else:
        raise ConvergenceError(f"iteration cap {max_iter} reached (|grad| = {gnorm:.3e})")
    gnorm = float(np.abs(G.T @ (p * U.marginal(f))).max(initial=0.0))
    return PrimalSolution(tree.unpack(h), f, val, x, it, gnorm, "newton")


def _solve_lp(tree, U, x) -> PrimalSolution:
    """Maximise ``E_P[w]`` with ``w <= a_j (x + G h) + c_j`` for every piece."""
    G, p = tree.gain_matrix, tree.p_leaf
    n, m = G.shape
    rows, rhs = [], []
    for a, c in U.pieces:
        # w - a G h <= a x + c
        rows.append(np.hstack([-a * G, np.eye(n)]))
        rhs.append(np.full(n, a * x + c))
    cost = np.concatenate([np.zeros(m), -p])
    res = linprog(cost, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs),
                  bounds=[(None, None)] * (m + n), method="highs-ds", options=LP_OPTIONS)
    if res.status == 3:
        raise PrimalUnbounded("LP unbounded", np.zeros((tree.n_nodes, tree.d)))
    if res.status != 0:
        raise ConvergenceError(f"LP failed: {res.message}")
    h = res.x[:m]
    f = x + G @ h
    value = float(np.dot(p, U(f)))
    return PrimalSolution(tree.unpack(h), f, value, x, int(res.nit), 0.0, "lp")
