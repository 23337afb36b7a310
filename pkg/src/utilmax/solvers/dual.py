"""Dual problem ``min_{Z >= 0, martingale} x E_P[Z] + E_P[V(Z)]`` on a tree.

``Z = y dQ/dP`` is unnormalised, so the feasible set is the polyhedral cone
``{Z >= 0 : M Z = 0}`` with ``M`` the martingale rows of the polytope.  Smooth
families use a log-barrier Newton method on the nullspace of ``M``,
restricted to the leaves some martingale measure charges; piecewise-linear
families use an exact LP in epigraph form.  Every solve is run twice (warm
and cold start, or two LP algorithms) and the values must agree.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from ..market.polytope import MartingalePolytope, martingale_polytope
from ..market.tree import ScenarioTree
from ..utility import DomainError, UtilityFunction
from .common import (DEFAULT_TOL, INF, ArbitrageError, ConvergenceError, DualInfeasible,
                     DualSolution, PrimalSolution, Tolerances, is_piecewise_linear, pwl_knots)

__all__ = ["solve_dual", "dual_value"]

AGREE_TOL = 1e-8
LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def dual_value(tree: ScenarioTree, U: UtilityFunction, x: float, Z) -> float:
    """``x E_P[Z] + E_P[V(Z)]``."""
    Z = np.asarray(Z, dtype=float)
    v = np.asarray(U.conjugate(Z), dtype=float)
    if np.any(v == INF):
        return INF
    p = tree.p_leaf
    return float(x * np.dot(p, Z) + np.dot(p, v))


def _cold_density(poly: MartingalePolytope) -> np.ndarray:
    if poly.vertices is not None:
        return poly.vertices.mean(axis=0)
    z = poly.interior_point()
    if z is None:
        raise ArbitrageError("no martingale measure")
    return z


def solve_dual(tree: ScenarioTree, U: UtilityFunction, x: float,
               primal: PrimalSolution | None = None, poly: MartingalePolytope | None = None,
               tol: Tolerances = DEFAULT_TOL) -> DualSolution:
    """Optimal ``(y_hat, Q_hat)``; warm-started from ``U'(f_hat)`` when a primal is given."""
    if not x > U.x_lo:
        raise DomainError(f"x = {x} is not above the domain infimum {U.x_lo}")
    poly = poly or martingale_polytope(tree)
    if poly.empty:
        raise ArbitrageError("; ".join(poly.diagnostics) or "no martingale measure")
    cold = _cold_density(poly)
    if x >= U.x_bliss:
        Z = np.zeros(tree.leaves.size)
        return DualSolution(0.0, cold, Z, float(U.sup_value), x, "satiated",
                            float(U.sup_value), True, 0, ["SATIATED: y_hat = 0"])
    if is_piecewise_linear(U):
        return _solve_lp(tree, U, x, poly, cold)
    if not U.smooth:
        raise NotImplementedError("no dual method for non-smooth, non-piecewise-linear U")
    return _solve_barrier(tree, U, x, poly, cold, primal)


# ---------------------------------------------------------------------------
# smooth families


class _Barrier:
    """Nullspace log-barrier Newton on the support of the martingale measures."""

    def __init__(self, tree, U, x, poly, cold):
        self.U, self.x = U, x
        p = tree.p_leaf
        self.support = cold > 1e-12
        if U.conjugate(0.0) == INF and not self.support.all():
            raise DualInfeasible("V(0) is infinite but some scenario carries zero mass "
                                 "under every martingale measure")
        S = self.support
        self.p = p[S]
        M = poly.martingale_rows[:, S]
        self.N = null_space(M) if M.size else np.eye(int(S.sum()))
        self.n_full = p.size
        self.cold = cold[S]

    def objective(self, Z, mu):
        v = np.asarray(self.U.conjugate(Z), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = float(np.dot(self.p, self.x * Z + v - mu * np.log(Z)))
        return out if math.isfinite(out) and Z.min() > 0 else INF

    def grad_hess(self, Z, mu):
        U, p = self.U, self.p
        g = p * (self.x + U.conjugate_slope(Z) - mu / Z)
        hdiag = p * (U.conjugate_curvature(Z) + mu / Z**2)
        return self.N.T @ g, self.N.T @ (self.N * hdiag[:, None])

    def start(self, Z0):
        """Project ``Z0`` onto the feasible subspace; blend with the cold start to stay positive."""
        proj = self.N @ (self.N.T @ Z0)
        cold = self.cold * max(float(np.dot(self.p, Z0)), 1e-3)
        if proj.min() > 0:
            return proj
        for t in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0):
            Z = (1 - t) * proj + t * cold
            if Z.min() > 0:
                return Z
        return cold

    def solve(self, Z0, mu0=1e-2, mu_min=1e-16, max_newton=100, shrink=0.01):
        Z = self.start(Z0)
        mu, iters = mu0, 0
        while True:
            for _ in range(max_newton):
                g, H = self.grad_hess(Z, mu)
                step = -np.linalg.lstsq(H, g, rcond=None)[0]
                dec = float(-g @ step)
                if dec <= 1e-24 * (1 + abs(self.objective(Z, mu))):
                    break
                dZ = self.N @ step
                neg = dZ < 0
                t = min(1.0, 0.99 * float(np.min(-Z[neg] / dZ[neg]))) if neg.any() else 1.0
                f0 = self.objective(Z, mu)
                accepted = False
                while t > 1e-20:
                    if self.objective(Z + t * dZ, mu) <= f0 - 0.25 * t * dec:
                        accepted = True
                        break
                    t *= 0.5
                if not accepted:
                    # decrease lost in rounding: take the step if it shrinks the gradient
                    t = min(1.0, 0.99 * float(np.min(-Z[neg] / dZ[neg]))) if neg.any() else 1.0
                    g_new, _ = self.grad_hess(Z + t * dZ, mu)
                    if not np.abs(g_new).max() < np.abs(g).max():
                        break
                Z = Z + t * dZ
                iters += 1
            if mu <= mu_min:
                return Z, iters
            mu = max(mu * shrink, mu_min)

    def full(self, Zs):
        Z = np.zeros(self.n_full)
        Z[self.support] = Zs
        return Z


def _solve_barrier(tree, U, x, poly, cold, primal) -> DualSolution:
    bar = _Barrier(tree, U, x, poly, cold)
    y0 = float(U.marginal(np.array([x]))[0]) if x > U.x_lo else 1.0
    y0 = y0 if y0 > 0 else 1.0
    Zc, it_c = bar.solve(bar.cold * y0)
    Z_cold = bar.full(Zc)
    cold_val = dual_value(tree, U, x, Z_cold)
    notes = []
    Z, it, method = Z_cold, it_c, "barrier-newton(cold)"
    if primal is not None and not primal.satiated:
        warm = np.asarray(U.marginal(primal.f_hat), dtype=float)[bar.support]
        warm = np.maximum(warm, 1e-12 * max(float(warm.max(initial=0.0)), 1e-300))
        Zw, it_w = bar.solve(warm, mu0=1e-6)
        Z_warm = bar.full(Zw)
        warm_val = dual_value(tree, U, x, Z_warm)
        if warm_val <= cold_val:
            Z, it, method = Z_warm, it_w, "barrier-newton(warm)"
        value, other = min(warm_val, cold_val), max(warm_val, cold_val)
    else:
        value, other = cold_val, cold_val
    consistent = abs(other - value) <= AGREE_TOL * (1 + abs(value))
    if not consistent:
        notes.append(f"warm and cold dual values differ by {other - value:.3e}")
    if not math.isfinite(value):
        raise ConvergenceError("dual objective is not finite at the computed point")
    y = float(np.dot(tree.p_leaf, Z))
    q = Z / y if y > 0 else cold
    return DualSolution(y, q, Z, value, x, method, cold_val, consistent, it, notes)


# ---------------------------------------------------------------------------
# piecewise-linear families


def _solve_lp(tree, U, x, poly, cold) -> DualSolution:
    """Epigraph LP: minimise ``E_P[x Z + w]`` with ``w >= u_k - x_k Z`` at every knot."""
    xs, us, a_min, a_max = pwl_knots(U)
    p = tree.p_leaf
    n = p.size
    M = poly.martingale_rows
    cost = np.concatenate([x * p, p])
    A_eq = np.hstack([M, np.zeros((M.shape[0], n))])
    b_eq = np.zeros(M.shape[0])
    if xs.size:
        rows = [np.hstack([-xk * np.eye(n), -np.eye(n)]) for xk in xs]
        A_ub = np.vstack(rows)
        b_ub = np.concatenate([np.full(n, -uk) for uk in us])
        w_bounds = [(None, None)] * n
    else:  # single affine piece a x + c: V(a) = c
        A_ub, b_ub = None, None
        c0 = U.pieces[0][1]
        w_bounds = [(c0, c0)] * n
    bounds = [(a_min, a_max)] * n + w_bounds
    results = []
    for method in ("highs-ds", "highs-ipm"):
        res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method=method, options=LP_OPTIONS)
        if res.status == 2:
            raise DualInfeasible("no martingale Z keeps V finite")
        if res.status != 0:
            raise ConvergenceError(f"dual LP ({method}) failed: {res.message}")
        Z = np.clip(res.x[:n], a_min, a_max)
        results.append((dual_value(tree, U, x, Z), Z, method))
    (v1, Z, m1), (v2, _, _) = results
    consistent = abs(v1 - v2) <= AGREE_TOL * (1 + abs(v1))
    notes = [] if consistent else [f"LP algorithms disagree by {v2 - v1:.3e}"]
    y = float(np.dot(p, Z))
    q = Z / y if y > 0 else cold
    return DualSolution(y, q, Z, v1, x, "lp", v2, consistent, 0, notes)
