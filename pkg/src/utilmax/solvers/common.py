"""Solution records, errors and helpers shared by the solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..utility import UtilityFunction

INF = math.inf


@dataclass(frozen=True)
class Tolerances:
    value_abs: float = 1e-8
    value_rel: float = 1e-8
    feasibility: float = 1e-10
    gradient: float = 1e-10

    def __post_init__(self):
        if min(self.value_abs, self.value_rel, self.feasibility, self.gradient) <= 0:
            raise ValueError("tolerances must be positive")


DEFAULT_TOL = Tolerances()


class SolverError(RuntimeError):
    """Base class for solver failures."""


class ArbitrageError(SolverError):
    """The market admits no martingale measure (empty polytope)."""


class PrimalUnbounded(SolverError):
    """An arbitrage ray makes the primal supremum unattained; ``ray`` is the strategy."""

    def __init__(self, message: str, ray: np.ndarray):
        super().__init__(message)
        self.ray = ray


class NoFiniteEntropy(SolverError):
    """``v_Q`` is infinite on ``(0, inf)``."""


class ConvergenceError(SolverError):
    """Iteration cap or line-search failure."""


class DualInfeasible(SolverError):
    """No ``Z`` with finite dual objective exists."""


@dataclass
class CompleteSolution:
    value: float                 # u_Q(x) = min_y {x y + v_Q(y)}
    y_hat: float
    X: np.ndarray                # pointwise optimal terminal wealth
    expected_utility: float      # E_P[U(X)]
    budget: float                # E_Q[X]
    notes: list[str] = field(default_factory=list)


@dataclass
class PrimalSolution:
    H: np.ndarray                # (n_nodes, d); rows of terminal nodes are zero
    f_hat: np.ndarray            # terminal wealth per leaf
    value: float                 # E_P[U(f_hat)]
    x: float
    iterations: int = 0
    grad_norm: float = 0.0       # sup-norm of the objective gradient
    method: str = ""
    satiated: bool = False
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"value": self.value, "H": self.H.tolist(), "f_hat": self.f_hat.tolist(),
                "iterations": self.iterations, "grad_norm": self.grad_norm,
                "method": self.method, "satiated": self.satiated, "notes": list(self.notes)}


@dataclass
class DualSolution:
    y_hat: float
    q_hat: np.ndarray            # density dQ/dP per leaf
    Z: np.ndarray                # y_hat * q_hat
    value: float                 # x E[Z] + E[V(Z)]
    x: float
    method: str = ""
    cold_value: float | None = None
    consistent: bool = True
    iterations: int = 0
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"value": self.value, "y_hat": self.y_hat, "q_hat": self.q_hat.tolist(),
                "Z": self.Z.tolist(), "method": self.method, "cold_value": self.cold_value,
                "consistent": self.consistent, "iterations": self.iterations,
                "notes": list(self.notes)}


# ---------------------------------------------------------------------------
# piecewise-linear utilities: U = min_j (a_j x + c_j)


def is_piecewise_linear(U: UtilityFunction) -> bool:
    return U.pieces is not None


def pwl_knots(U: UtilityFunction) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Knots ``(x_k, u_k)`` and slope range ``[a_min, a_max]`` of a PWL utility.

    ``V(y) = max_k (u_k - x_k y)`` for ``y`` in the slope range; without knots
    (a single affine piece ``a x + c``) ``V(a) = c``.
    """
    pcs = sorted(U.pieces, key=lambda p: (-p[0], p[1]))
    merged: list[tuple[float, float]] = []
    for a, c in pcs:
        if merged and a == merged[-1][0]:
            continue  # parallel piece with larger intercept never binds
        merged.append((a, c))
    xs, us = [], []
    for (a0, c0), (a1, c1) in zip(merged, merged[1:]):
        xk = (c1 - c0) / (a0 - a1)
        xs.append(xk)
        us.append(a0 * xk + c0)
    return np.asarray(xs), np.asarray(us), merged[-1][0], merged[0][0]


def subgradient_distance(U: UtilityFunction, x: float, y: float, xtol: float = 1e-9) -> float:
    """Distance from ``y`` to the superdifferential of ``U`` on ``[x - dx, x + dx]``.

    ``dx = xtol (1 + |x|)`` absorbs rounding of wealth that sits on a kink.
    """
    if x == INF:
        return max(0.0, y)  # only y = 0 supports U at +inf
    if x < U.x_lo:
        return INF
    dx = xtol * (1.0 + abs(x))
    lo = U.slopes(x + dx)[0]
    hi = U.slopes(max(x - dx, U.x_lo + dx))[1] if x - dx > U.x_lo else INF
    return max(0.0, lo - y, y - hi)


def fenchel_gap(U: UtilityFunction, f: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """``V(Z) - U(f) + f Z`` per state (non-negative), with ``inf * 0 = 0``."""
    f = np.asarray(f, dtype=float)
    Z = np.asarray(Z, dtype=float)
    v = np.asarray(U.conjugate(Z), dtype=float)
    u = np.asarray(U(f), dtype=float)
    with np.errstate(invalid="ignore"):
        fz = np.where(Z == 0, 0.0, f * Z)
        out = v - u + fz
    out[(v == INF) | (u == -INF)] = INF
    return out
