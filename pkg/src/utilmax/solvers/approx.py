"""Clamped approximating sequences ``H^n = clip(H, -n, n)`` for an optimal strategy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..market.tree import ScenarioTree, wealth_process
from ..utility import Quadratic, UtilityFunction

__all__ = ["ApproxReport", "approx_sequence", "SampledMarket", "sampled_market"]


@dataclass
class ApproxReport:
    n: np.ndarray
    prob_deviation: np.ndarray   # max_t P{|H^n . S_t - H . S_t| > eps}
    utility_l1: np.ndarray       # E_P|U(x + H^n . S_T) - U(x + H . S_T)|
    max_abs_H: float
    threshold: int | None        # first n with both metrics exactly zero

    def non_monotone_steps(self) -> tuple[int, int]:
        return (int(np.sum(np.diff(self.prob_deviation) > 0)),
                int(np.sum(np.diff(self.utility_l1) > 0)))

    def to_dict(self) -> dict:
        return {"n": self.n.tolist(), "prob_deviation": self.prob_deviation.tolist(),
                "utility_l1": self.utility_l1.tolist(), "max_abs_H": self.max_abs_H,
                "threshold": self.threshold}


@dataclass
class SampledMarket:
    """One-period market sampled from a signal ``Y`` known at time 0 and a jump ``J``.

    The price moves by ``J`` (double-exponential); strategies are functions of
    ``Y`` (so they can be unbounded); ``weights`` are the sample probabilities.
    """

    signal: np.ndarray
    jump: np.ndarray
    weights: np.ndarray


def sampled_market(n: int = 100_000, eta: float = 3.0, signal_scale: float = 2.0,
                   seed: int = 42) -> SampledMarket:
    rng = np.random.default_rng(seed)
    Y = rng.laplace(0.0, signal_scale, size=n)
    J = rng.exponential(1.0 / eta, size=n) * rng.choice([-1.0, 1.0], size=n)
    return SampledMarket(Y, J, np.full(n, 1.0 / n))


def _report(n_grid, prob, l1, max_abs):
    both = (prob == 0) & (l1 == 0)
    thr = None
    if both.any():
        # first n after which both metrics stay at zero
        last_bad = np.flatnonzero(~both)
        k = 0 if not last_bad.size else last_bad[-1] + 1
        thr = int(n_grid[k]) if k < n_grid.size else None
    return ApproxReport(n_grid, prob, l1, max_abs, thr)


def approx_sequence(market, H, U: UtilityFunction, x: float = 0.0, n_max: int = 64,
                    eps: float = 1e-6) -> ApproxReport:
    """Both approximation metrics of the clamped strategies for ``n = 1..n_max``.

    ``market`` is a :class:`ScenarioTree` (``H`` of shape (n_nodes, d)) or a
    :class:`SampledMarket` (``H`` one position per sample).
    """
    n_grid = np.arange(1, n_max + 1)
    H = np.asarray(H, dtype=float)
    prob = np.empty(n_max)
    l1 = np.empty(n_max)
    if isinstance(market, ScenarioTree):
        tree = market
        X = wealth_process(tree, H, x)
        uT = U(X[tree.leaves])
        times = [tree.nodes_at(t) for t in range(tree.horizon + 1)]
        for i, n in enumerate(n_grid):
            Xn = wealth_process(tree, np.clip(H, -n, n), x)
            dev = np.abs(Xn - X) > eps
            prob[i] = max(float(tree.prob[idx][dev[idx]].sum()) for idx in times)
            l1[i] = float(np.dot(tree.p_leaf, np.abs(U(Xn[tree.leaves]) - uT)))
        return _report(n_grid, prob, l1, float(np.abs(H).max(initial=0.0)))
    sm = market
    w = sm.weights
    uT = U(x + H * sm.jump)
    for i, n in enumerate(n_grid):
        gain = np.clip(H, -n, n) * sm.jump
        dev = np.abs(gain - H * sm.jump) > eps
        prob[i] = float(w[dev].sum())
        l1[i] = float(np.dot(w, np.abs(U(x + gain) - uT)))
    return _report(n_grid, prob, l1, float(np.abs(H).max(initial=0.0)))


def oracle_strategy(sm: SampledMarket, slope: float = 1.0) -> np.ndarray:
    """Unbounded strategy ``H = slope * Y`` on the sampled market."""
    return slope * sm.signal


DEFAULT_SAMPLED_UTILITY = Quadratic()
