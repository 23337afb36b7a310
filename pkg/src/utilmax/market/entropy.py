"""Generalised relative entropy ``v_Q(y) = E_P[V(y dQ/dP)]``."""
from __future__ import annotations

import math

import numpy as np

from ..utility import ConjugateFunction, UtilityFunction
from .polytope import MeasureQ

__all__ = ["generalized_entropy", "kl_divergence", "mixture_bound"]


def _conj(V):
    return V if isinstance(V, ConjugateFunction) else ConjugateFunction(V)


def generalized_entropy(Q: MeasureQ, V: ConjugateFunction | UtilityFunction, y: float) -> float:
    """``E_P[V(y dQ/dP)]``; zero-density states contribute ``V(0) P(state)``.

    With ``V(0) = +inf`` a single zero-density state makes the value ``+inf``.
    """
    if not y > 0:
        raise ValueError("y must be positive")
    vals = np.asarray(_conj(V)(y * Q.density), dtype=float)
    if np.any(vals == math.inf):
        return math.inf
    return float(np.dot(Q.p, vals))


def kl_divergence(Q: MeasureQ) -> float:
    """``E_P[z ln z]`` with ``0 ln 0 = 0``."""
    z = Q.density
    pos = z > 0
    return float(np.dot(Q.p[pos], z[pos] * np.log(z[pos])))


def mixture_bound(Q1: MeasureQ, Q2: MeasureQ, y1: float, y2: float, lam: float,
                  V: ConjugateFunction | UtilityFunction) -> tuple[float, float]:
    """Both sides of the mixture inequality for ``v``.

    Returns ``(lhs, rhs)`` with ``y~ = 1/(lam/y1 + (1-lam)/y2)``,
    ``alpha = y~ lam / y1``, ``lhs = v_{lam Q1 + (1-lam) Q2}(y~)`` and
    ``rhs = alpha v_{Q1}(y1) + (1-alpha) v_{Q2}(y2)``.
    """
    ytil = 1.0 / (lam / y1 + (1.0 - lam) / y2)
    alpha = ytil * lam / y1
    mix = MeasureQ(lam * Q1.density + (1.0 - lam) * Q2.density, Q1.p)
    lhs = generalized_entropy(mix, V, ytil)
    parts = []
    for w, Q, y in ((alpha, Q1, y1), (1.0 - alpha, Q2, y2)):
        parts.append(0.0 if w == 0 else w * generalized_entropy(Q, V, y))
    return lhs, float(sum(parts))
