"""Complete-market problem: maximise ``E_P[U(X)]`` subject to ``E_Q[X] <= x``.

The value is ``u_Q(x) = min_{y >= 0} {x y + v_Q(y)}``.  Smooth families
solve the first-order condition in ``y`` (bracketing, bisection, Newton
polish); piecewise-linear families evaluate the piecewise-linear objective at
its kinks; anything else falls back to golden-section search in ``log y``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from ..market.entropy import generalized_entropy
from ..market.polytope import MeasureQ
from ..utility import DomainError, UtilityFunction
from .common import INF, CompleteSolution, NoFiniteEntropy, is_piecewise_linear, pwl_knots

__all__ = ["solve_complete", "dual_objective"]


def dual_objective(Q: MeasureQ, U: UtilityFunction, x: float, y: float) -> float:
    """``x y + v_Q(y)`` (``y = 0`` gives ``U(+inf)``)."""
    if y == 0:
        return float(U.sup_value)
    return x * y + generalized_entropy(Q, U, y)


def _slope(Q: MeasureQ, U: UtilityFunction, x: float, y: float) -> float:
    z = Q.density
    pos = z > 0
    return x + float(np.dot(Q.p[pos] * z[pos], U.conjugate_slope(y * z[pos])))


def _curv(Q: MeasureQ, U: UtilityFunction, y: float) -> float:
    z = Q.density
    pos = z > 0
    return float(np.dot(Q.p[pos] * z[pos] ** 2, U.conjugate_curvature(y * z[pos])))


def _minimise_smooth(Q, U, x) -> float:
    """Root of ``x + E_Q[V'(y dQ/dP)] = 0`` or 0 when the slope is positive at 0+."""
    g = lambda y: _slope(Q, U, x, y)  # noqa: E731
    if g(1.0) > 0:
        hi, lo = 1.0, 0.5
        while g(lo) > 0:
            hi, lo = lo, lo * 0.5
            if lo < 1e-300:
                return 0.0
    else:
        lo, hi = 1.0, 2.0
        while g(hi) <= 0:
            lo, hi = hi, hi * 2.0
            if hi > 1e300:
                raise NoFiniteEntropy("dual objective decreases without bound")
    y = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(3):  # Newton polish
        c = _curv(Q, U, y)
        if not c > 0:
            break
        step = g(y) / c
        if not math.isfinite(step) or abs(step) > 0.5 * y:
            break
        y -= step
    return y


def _minimise_pwl(Q, U, x) -> float:
    """Exact minimiser of the piecewise-linear ``x y + v_Q(y)`` over its kinks."""
    xs, us, a_min, a_max = pwl_knots(U)
    z = Q.density
    pos = z[z > 0]
    lo = a_min / pos.min() if a_min > 0 else 0.0
    hi = a_max / pos.max()
    if a_min > 0 and np.any(z == 0):
        raise NoFiniteEntropy("V(0) is infinite and Q has a zero-density state")
    if lo > hi * (1 + 1e-15):
        raise NoFiniteEntropy("no y makes v_Q finite")
    slopes = np.concatenate([[a_min, a_max], _kink_slopes(U)])
    cands = {lo, hi}
    for s in slopes:
        for zz in pos:
            y = s / zz
            if lo <= y <= hi:
                cands.add(float(y))
    best_y, best = None, INF
    for y in sorted(cands):
        val = dual_objective(Q, U, x, y) if y > 0 else float(U.sup_value)
        if val < best:
            best_y, best = y, val
    return best_y


def _kink_slopes(U) -> np.ndarray:
    return np.array([a for a, _ in U.pieces], dtype=float)


def _minimise_golden(Q, U, x) -> float:
    f = lambda t: dual_objective(Q, U, x, math.exp(t))  # noqa: E731
    res = optimize.minimize_scalar(f, bracket=(-5.0, 0.0, 5.0), method="golden",
                                   options={"xtol": 1e-12})
    return float(math.exp(res.x))


def _pointwise(U: UtilityFunction, Q: MeasureQ, x: float, y: float) -> tuple[np.ndarray, list[str]]:
    """Maximisers of ``U(X) - X y z`` with ties broken so that ``E_Q[X] = x``."""
    notes = []
    z = Q.density
    lo = np.empty(z.size)
    hi = np.empty(z.size)
    for i, zz in enumerate(z):
        lo[i], hi[i] = U.argmax_interval(y * zz)
    # zero-density states: smallest satiating wealth
    free = z == 0
    if np.any(free):
        lo[free] = np.where(np.isfinite(lo[free]), lo[free], U.x_bliss)
        hi[free] = lo[free]
        if np.any(~np.isfinite(lo[free])):
            notes.append("zero-density state with unbounded optimal wealth (no satiation point)")
    if np.all(lo == hi):
        return lo, notes
    q = Q.probs
    hi_f = np.where(np.isfinite(hi), hi, np.where(np.isfinite(lo), lo, 0.0))
    lo_f = lo

    def spend(s):
        X = np.maximum(hi_f - s, lo_f)
        return float(np.dot(q, X)) - x

    if spend(0.0) <= 0 or y == 0:
        return hi_f.copy(), notes
    s_hi = 1.0
    while spend(s_hi) > 0:
        s_hi *= 2.0
        if s_hi > 1e300:
            notes.append("budget cannot bind within the optimal sets")
            return np.maximum(hi_f - s_hi, lo_f), notes
    s = optimize.brentq(spend, 0.0, s_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    return np.maximum(hi_f - s, lo_f), notes


def solve_complete(Q: MeasureQ, U: UtilityFunction, x: float) -> CompleteSolution:
    """Optimal value, scaling ``y`` and wealth in the market priced by ``Q``."""
    if not x > U.x_lo:
        raise DomainError(f"x = {x} is not above the domain infimum {U.x_lo}")
    if x >= U.x_bliss:
        X = np.full(Q.density.size, float(x))
        return CompleteSolution(float(U.sup_value), 0.0, X, float(np.dot(Q.p, U(X))),
                                Q.expect(X), ["satiated: x >= satiation point"])
    if U.conjugate(0.0) == INF and np.any(Q.density == 0):
        raise NoFiniteEntropy("V(0) is infinite and Q has a zero-density state")
    if is_piecewise_linear(U):
        y = _minimise_pwl(Q, U, x)
    elif U.smooth:
        y = _minimise_smooth(Q, U, x)
    else:
        y = _minimise_golden(Q, U, x)
    value = dual_objective(Q, U, x, y)
    if not math.isfinite(value):
        raise NoFiniteEntropy("v_Q is infinite at the minimiser")
    X, notes = _pointwise(U, Q, x, y)
    with np.errstate(invalid="ignore"):
        eu = float(np.dot(Q.p, U(X)))
    return CompleteSolution(float(value), float(y), X, eu, Q.expect(X), notes)
