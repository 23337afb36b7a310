"""Replicating strategy for a terminal payoff by backward induction under ``Q``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..market.polytope import MeasureQ
from ..market.tree import ScenarioTree, wealth_process

__all__ = ["Replication", "recover_strategy"]

ATTAIN_TOL = 1e-8


@dataclass
class Replication:
    H: np.ndarray                    # (n_nodes, d)
    X: np.ndarray                    # conditional-expectation wealth per node
    support_residual: float          # worst one-step fit error on Q-charged children
    off_support_residual: float      # worst fit error elsewhere (not a failure)
    budget_residual: float           # X_root - x
    martingale_residual: float       # worst |E_Q[X_next | node] - X_node|
    attainable: bool
    notes: list[str] = field(default_factory=list)


def recover_strategy(tree: ScenarioTree, Q, f_hat, x: float,
                     tol: float = ATTAIN_TOL) -> Replication:
    """Backward induction ``X_t = E_Q[f_hat | node]`` and per-node hedges.

    On Q-charged nodes the hedge solves ``H . dS_c = X_c - X_node`` over the
    charged children by least squares.  Nodes of zero Q-mass have no
    conditional expectation; there ``(X_node, H)`` is the least-squares fit
    over all children and its residual is reported separately.
    """
    z = np.asarray(Q.density if isinstance(Q, MeasureQ) else Q, dtype=float)
    f = np.asarray(f_hat, dtype=float)
    m = tree.node_masses(z)
    X = np.zeros(tree.n_nodes)
    X[tree.leaves] = f
    H = np.zeros((tree.n_nodes, tree.d))
    sup_res, off_res, mart_res = 0.0, 0.0, 0.0
    for a in tree.internal[::-1]:
        kids = tree.children[a]
        dS = tree.prices[kids] - tree.prices[a]
        if m[a] > 0:
            on = m[kids] > 0
            X[a] = float(np.dot(m[kids], X[kids]) / m[a])
            sol = np.linalg.lstsq(dS[on], X[kids][on] - X[a], rcond=None)[0]
            H[a] = sol
            r = dS @ sol - (X[kids] - X[a])
            sup_res = max(sup_res, float(np.abs(r[on]).max()))
            if (~on).any():
                off_res = max(off_res, float(np.abs(r[~on]).max()))
            mart_res = max(mart_res, abs(float(np.dot(m[kids], X[kids] - X[a]) / m[a])))
        else:
            A = np.hstack([np.ones((kids.size, 1)), dS])
            sol = np.linalg.lstsq(A, X[kids], rcond=None)[0]
            X[a], H[a] = sol[0], sol[1:]
            off_res = max(off_res, float(np.abs(A @ sol - X[kids]).max()))
    scale = 1.0 + float(np.abs(f).max(initial=0.0))
    notes = []
    attainable = sup_res <= tol * scale
    if not attainable:
        notes.append(f"payoff not attainable on the support of Q (residual {sup_res:.3e})")
    # cross-check the telescoped wealth on the support
    W = wealth_process(tree, H, X[0])
    charged = m[tree.leaves] > 0
    path_res = float(np.abs(W[tree.leaves][charged] - f[charged]).max(initial=0.0))
    if path_res > tol * scale:
        attainable = False
        notes.append(f"telescoped wealth misses the payoff by {path_res:.3e}")
    return Replication(H, X, max(sup_res, path_res), off_res, float(X[0] - x), mart_res,
                       attainable, notes)
