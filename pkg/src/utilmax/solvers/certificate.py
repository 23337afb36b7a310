"""Optimality certificate for a primal/dual pair on a tree."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..market.polytope import MartingalePolytope, martingale_polytope
from ..market.tree import ScenarioTree, wealth_process
from ..utility import UtilityFunction
from .common import DualSolution, PrimalSolution, fenchel_gap, subgradient_distance

__all__ = ["DualityCertificate", "SatiationReport", "duality_certificate", "satiation_report",
           "supermartingale_residuals"]

CERT_TOL = 1e-8
GAP_RTOL = 1e-6


@dataclass
class SatiationReport:
    above_but_charged: np.ndarray    # leaves with f > x_bar + tol and density > tol
    zero_but_below: np.ndarray       # leaves with density <= tol and f < x_bar - tol
    boundary_mass: float             # P{|f - x_bar| <= tol, density > tol}
    boundary_leaves: np.ndarray
    tol: float

    @property
    def ok(self) -> bool:
        return not (self.above_but_charged.size or self.zero_but_below.size)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "above_but_charged": self.above_but_charged.tolist(),
                "zero_but_below": self.zero_but_below.tolist(),
                "boundary_mass": self.boundary_mass,
                "boundary_leaves": self.boundary_leaves.tolist(), "tol": self.tol}


def satiation_report(U: UtilityFunction, f_hat, q_hat, p) -> SatiationReport:
    """Compare ``{f >= x_bar}`` with ``{dQ/dP = 0}`` through two strict inclusions."""
    xb = U.x_bliss
    f = np.asarray(f_hat, dtype=float)
    q = np.asarray(q_hat, dtype=float)
    p = np.asarray(p, dtype=float)
    tol = 1e-8 * (1.0 + (abs(xb) if math.isfinite(xb) else 0.0))
    charged = q > tol
    if math.isfinite(xb):
        above = np.flatnonzero((f > xb + tol) & charged)
        below = np.flatnonzero(~charged & (f < xb - tol))
        bnd = np.flatnonzero((np.abs(f - xb) <= tol) & charged)
    else:
        above = np.empty(0, dtype=int)
        below = np.flatnonzero(~charged)
        bnd = np.empty(0, dtype=int)
    return SatiationReport(above, below, float(p[bnd].sum()), bnd, tol)


def supermartingale_residuals(tree: ScenarioTree, X, densities) -> np.ndarray:
    """``E_Q[X_next | node] - X_node`` for each density (rows) and internal node (cols).

    Nodes with zero Q-mass get 0.  ``X`` is the wealth at every node.
    """
    X = np.asarray(X, dtype=float)
    D = np.atleast_2d(np.asarray(densities, dtype=float))
    out = np.zeros((D.shape[0], tree.internal.size))
    for r, z in enumerate(D):
        m = tree.node_masses(z)
        for k, a in enumerate(tree.internal):
            if m[a] <= 0:
                continue
            kids = tree.children[a]
            out[r, k] = float(np.dot(m[kids], X[kids] - X[a]) / m[a])
    return out


@dataclass
class DualityCertificate:
    gap: float                       # dual value - primal value
    relative_gap: float
    fenchel: np.ndarray              # V(Z) - U(f) + f Z per leaf (>= 0)
    budget_residual: float           # E_Q_hat[f] - x
    vertex_slacks: np.ndarray        # x - E_Q[f] per vertex
    supermartingale: np.ndarray      # vertices x internal nodes
    supergradient: np.ndarray        # distance of Z to the superdifferential of U at f
    satiation: SatiationReport
    dual_consistent: bool
    tol: float = CERT_TOL
    notes: list[str] = field(default_factory=list)

    @property
    def max_fenchel(self) -> float:
        return float(np.max(np.abs(self.fenchel), initial=0.0))

    @property
    def min_vertex_slack(self) -> float:
        return float(np.min(self.vertex_slacks, initial=math.inf))

    @property
    def max_supermartingale(self) -> float:
        return float(np.max(self.supermartingale, initial=0.0))

    @property
    def checks(self) -> dict[str, bool]:
        t = self.tol
        return {
            "gap": abs(self.relative_gap) <= GAP_RTOL,
            "fenchel": self.max_fenchel <= t,
            "budget": abs(self.budget_residual) <= t,
            "vertex_budget": self.min_vertex_slack >= -t,
            "supermartingale": self.max_supermartingale <= t,
            "supergradient": float(np.max(self.supergradient, initial=0.0)) <= t,
            "satiation_set": self.satiation.ok,
            "dual_consistent": self.dual_consistent,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed, "checks": self.checks, "gap": self.gap,
            "relative_gap": self.relative_gap, "max_fenchel_residual": self.max_fenchel,
            "fenchel_residuals": self.fenchel.tolist(), "budget_residual": self.budget_residual,
            "vertex_slacks": self.vertex_slacks.tolist(),
            "max_supermartingale_residual": self.max_supermartingale,
            "supergradient_distance": self.supergradient.tolist(),
            "satiation": self.satiation.to_dict(), "notes": list(self.notes),
        }


def duality_certificate(tree: ScenarioTree, U: UtilityFunction, x: float,
                        primal: PrimalSolution, dual: DualSolution,
                        poly: MartingalePolytope | None = None,
                        tol: float = CERT_TOL) -> DualityCertificate:
    """Gap, Fenchel, budget, vertex, supermartingale and satiation-set checks."""
    poly = poly or martingale_polytope(tree)
    p = tree.p_leaf
    f, Z = primal.f_hat, dual.Z
    gap = dual.value - primal.value
    rel = gap / (1.0 + abs(primal.value))
    fen = fenchel_gap(U, f, Z) * (p > 0)
    budget = float(np.dot(p * dual.q_hat, f) - x)
    notes = list(dual.notes)
    if poly.vertices is not None:
        verts = poly.vertices
        slacks = x - verts @ (p * f)
    else:
        best, arg = poly.support(f)
        verts = np.atleast_2d(arg) if arg is not None else np.empty((0, p.size))
        slacks = np.array([x - best])
        notes.append("vertex list unavailable; slack from the LP support function")
    X = wealth_process(tree, primal.H, x)
    if np.abs(X[tree.leaves] - f).max(initial=0.0) > 1e-9 * (1 + np.abs(f).max(initial=0.0)):
        # wealth not generated by the stored strategy (e.g. a hand-edited payoff)
        notes.append("f_hat differs from x + H . S_T; supermartingale test uses the strategy")
    sm = supermartingale_residuals(tree, X, verts) if len(verts) else np.zeros((0, 0))
    sg = np.array([subgradient_distance(U, fi, zi) if pi > 0 else 0.0
                   for fi, zi, pi in zip(f, Z, p)])
    if dual.y_hat > 0:
        sat = satiation_report(U, f, dual.q_hat, p)
    else:
        sat = SatiationReport(np.empty(0, int), np.empty(0, int), 0.0, np.empty(0, int), 0.0)
        notes.append("SATIATED regime: satiation-set identity not applicable")
    return DualityCertificate(float(gap), float(rel), fen, budget, np.asarray(slacks, float), sm,
                              sg, sat, dual.consistent, tol, notes)
