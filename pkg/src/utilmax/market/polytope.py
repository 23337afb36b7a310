"""Martingale measures on a scenario tree: constraints, vertices, membership.

Measures are stored as terminal densities ``z = dQ/dP`` on the leaves.  The
set of absolutely continuous martingale measures is the polytope

    { z >= 0 : E_P[z] = 1,  E_P[z 1_node (S_next - S_node)] = 0 for all nodes },

one equality per (non-terminal node, asset).  Its vertices are found node by
node: a measure is extreme exactly when its one-step kernel is an extreme
point of the local simplex slice at every node it charges, so vertices are
compositions of local vertices.  Children whose subtree carries no martingale
measure are forced to zero mass.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .tree import ScenarioTree, wealth_process

__all__ = ["MeasureQ", "MartingalePolytope", "martingale_polytope", "MembershipReport",
           "is_martingale_measure", "check_simple_martingale", "random_measures"]

FEAS_TOL = 1e-10
LEAF_CAP = 64
VERTEX_CAP = 20000


class PolytopeOverflow(RuntimeError):
    """Vertex enumeration exceeded the configured cap."""


@dataclass(frozen=True)
class MeasureQ:
    """Probability ``Q << P`` given by its density on the leaves."""

    density: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "density", np.asarray(self.density, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if self.density.shape != self.p.shape:
            raise ValueError("density and reference probabilities differ in shape")

    @classmethod
    def from_probs(cls, q, p) -> "MeasureQ":
        q, p = np.asarray(q, dtype=float), np.asarray(p, dtype=float)
        return cls(q / p, p)

    @classmethod
    def reference(cls, p) -> "MeasureQ":
        p = np.asarray(p, dtype=float)
        return cls(np.ones_like(p), p)

    @property
    def probs(self) -> np.ndarray:
        return self.density * self.p

    def expect(self, f) -> float:
        return float(np.dot(self.probs, f))

    def is_density(self, tol: float = FEAS_TOL) -> bool:
        return bool(np.all(self.density >= -tol) and abs(self.p @ self.density - 1) <= tol)

    def equivalent(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.density > tol))


def _local_vertices(delta: np.ndarray, tol: float = 1e-12) -> list[np.ndarray]:
    """Vertices of ``{pi >= 0, sum pi = 1, pi @ delta = 0}`` (``delta`` is k x d).

    Basic feasible solutions are enumerated over supports of size at most
    ``d + 1`` with linearly independent columns.
    """
    k, d = delta.shape
    A = np.vstack([np.ones(k), delta.T])
    b = np.zeros(d + 1)
    b[0] = 1.0
    scale = max(1.0, float(np.abs(delta).max(initial=0.0)))
    found: list[np.ndarray] = []
    for size in range(1, min(k, d + 1) + 1):
        for supp in itertools.combinations(range(k), size):
            cols = A[:, supp]
            if np.linalg.matrix_rank(cols, tol=1e-12 * scale * size) < size:
                continue
            sol, *_ = np.linalg.lstsq(cols, b, rcond=None)
            if np.abs(cols @ sol - b).max() > 1e-11 * scale:
                continue
            if sol.min() < -tol:
                continue
            pi = np.zeros(k)
            pi[list(supp)] = np.clip(sol, 0.0, None)
            pi /= pi.sum()
            if not any(np.abs(pi - v).max() <= 1e-12 for v in found):
                found.append(pi)
    return found


def _local_positive(delta: np.ndarray) -> bool:
    """Does the local slice contain a kernel charging every child?"""
    k = delta.shape[0]
    # maximise t subject to pi_j >= t, sum pi = 1, pi @ delta = 0
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
    A_eq = np.vstack([np.append(np.ones(k), 0.0), np.hstack([delta.T, np.zeros((delta.shape[1], 1))])])
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[0] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(k), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * k + [(None, 1.0)], method="highs")
    return bool(res.status == 0 and -res.fun > 1e-12)


@dataclass
class MartingalePolytope:
    """Constraint system ``A z = b, z >= 0`` plus (when enumerated) the vertices.

    ``A`` has one row per (internal node, asset) followed by the
    normalisation row ``p``.  ``vertices`` is an array of densities (rows) or
    ``None`` when the tree exceeds ``leaf_cap``.
    """

    tree: ScenarioTree
    A: np.ndarray
    b: np.ndarray
    vertices: np.ndarray | None
    empty: bool
    equivalent_exists: bool
    diagnostics: list[str] = field(default_factory=list)

    @property
    def martingale_rows(self) -> np.ndarray:
        return self.A[:-1]

    def contains(self, density, tol: float = FEAS_TOL) -> bool:
        z = np.asarray(density, dtype=float)
        return bool(z.min() >= -tol and np.abs(self.A @ z - self.b).max() <= tol)

    def support(self, payoff) -> tuple[float, np.ndarray | None]:
        """``max_Q E_Q[payoff]`` over the polytope and a maximising density."""
        f = np.asarray(payoff, dtype=float)
        if self.empty:
            return -np.inf, None
        p = self.tree.p_leaf
        if self.vertices is not None:
            vals = self.vertices @ (p * f)
            i = int(np.argmax(vals))
            return float(vals[i]), self.vertices[i]
        res = linprog(-(p * f), A_eq=self.A, b_eq=self.b, bounds=(0, None), method="highs")
        if res.status != 0:
            return -np.inf, None
        return float(-res.fun), res.x

    def interior_point(self) -> np.ndarray | None:
        """A density charging as many leaves as possible (max-min LP)."""
        if self.empty:
            return None
        n = self.A.shape[1]
        c = np.zeros(n + 1)
        c[-1] = -1.0
        A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
        A_eq = np.hstack([self.A, np.zeros((self.A.shape[0], 1))])
        res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=self.b,
                      bounds=[(0, None)] * n + [(0, None)], method="highs")
        if res.status != 0:
            return None
        return res.x[:n]

    def sample(self, rng: np.random.Generator, count: int = 16) -> np.ndarray:
        """Random convex mixtures of the vertices (rows are densities)."""
        if self.vertices is None or not len(self.vertices):
            return np.empty((0, self.A.shape[1]))
        w = rng.dirichlet(np.ones(len(self.vertices)), size=count)
        return w @ self.vertices

    def to_dict(self) -> dict:
        return {
            "empty": self.empty,
            "equivalent_exists": self.equivalent_exists,
            "constraints": {"A": self.A.tolist(), "b": self.b.tolist()},
            "vertices": None if self.vertices is None else self.vertices.tolist(),
            "diagnostics": list(self.diagnostics),
        }


def constraint_matrix(tree: ScenarioTree) -> tuple[np.ndarray, np.ndarray]:
    p = tree.p_leaf
    A = np.vstack([(tree.gain_matrix * p[:, None]).T, p[None, :]])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    return A, b


def martingale_polytope(tree: ScenarioTree, leaf_cap: int = LEAF_CAP,
                        vertex_cap: int = VERTEX_CAP) -> MartingalePolytope:
    """Constraint system and exact vertex list of the martingale measures."""
    A, b = constraint_matrix(tree)
    diags: list[str] = []
    n = tree.n_nodes
    viable = np.ones(n, dtype=bool)
    positive = np.ones(n, dtype=bool)
    local: list[list[np.ndarray]] = [[] for _ in range(n)]
    for a in range(n - 1, -1, -1):
        kids = tree.children[a]
        if not kids.size:
            continue
        delta = tree.prices[kids] - tree.prices[a]
        alive = viable[kids]
        positive[a] = bool(alive.all() and positive[kids].all() and _local_positive(delta))
        if not alive.any():
            viable[a] = False
            continue
        sub = _local_vertices(delta[alive])
        if not sub:
            viable[a] = False
            continue
        idx = np.flatnonzero(alive)
        for v in sub:
            pi = np.zeros(kids.size)
            pi[idx] = v
            local[a].append(pi)
    empty = not viable[0]
    if empty:
        where = [tree._loc(a) for a in tree.internal if not viable[a]]
        diags.append("arbitrage: no martingale measure exists (non-viable at "
                     + ", ".join(where[:5]) + ")")
    elif not positive[0]:
        diags.append("no equivalent martingale measure: some scenarios carry zero mass "
                     "under every martingale measure")
    vertices = None
    if not empty:
        if tree.leaves.size > leaf_cap:
            diags.append(f"{tree.leaves.size} leaves exceed cap {leaf_cap}; "
                         "constraint-only representation")
        else:
            try:
                vertices = _compose(tree, local, vertex_cap)
            except PolytopeOverflow as exc:
                diags.append(str(exc))
    return MartingalePolytope(tree, A, b, vertices, empty, (not empty) and positive[0], diags)


def _compose(tree: ScenarioTree, local, vertex_cap: int) -> np.ndarray:
    """All node-mass vectors obtained by choosing a local vertex at charged nodes."""

    def expand(a: int, mass: float) -> list[dict]:
        # returns list of {leaf_pos: mass} for the subtree at a
        kids = tree.children[a]
        if not kids.size:
            return [{int(tree.leaf_index[a]): mass}]
        out = []
        for pi in local[a]:
            parts = [[{}]]
            for c, w in zip(kids, pi):
                if w > 0:
                    parts.append(expand(int(c), mass * w))
            for combo in itertools.product(*parts):
                merged = {}
                for piece in combo:
                    merged.update(piece)
                out.append(merged)
                if len(out) > vertex_cap:
                    raise PolytopeOverflow(f"more than {vertex_cap} vertices")
        return out

    p = tree.p_leaf
    verts = []
    for m in expand(0, 1.0):
        z = np.zeros(p.size)
        for pos, mass in m.items():
            z[pos] = mass
        verts.append(z / p)
    V = np.unique(np.round(np.asarray(verts), 14), axis=0)
    return V


# ---------------------------------------------------------------------------
# membership


@dataclass
class MembershipReport:
    is_member: bool
    residuals: np.ndarray          # E_Q[1_node dS] per (internal node, asset), constraint route
    pricing_residuals: np.ndarray  # same numbers via wealth of unit simple strategies
    max_residual: float
    routes_agree: bool
    valid_density: bool

    def __bool__(self) -> bool:
        return self.is_member


def is_martingale_measure(tree: ScenarioTree, Q, tol: float = FEAS_TOL) -> MembershipReport:
    """Martingale test by constraint residuals and by pricing simple strategies."""
    z = np.asarray(Q.density if isinstance(Q, MeasureQ) else Q, dtype=float)
    p = tree.p_leaf
    r1 = ((tree.gain_matrix * p[:, None]).T @ z).reshape(tree.internal.size, tree.d)
    r2 = np.empty_like(r1)
    leaves = tree.leaves
    for k, a in enumerate(tree.internal):
        for i in range(tree.d):
            H = np.zeros((tree.n_nodes, tree.d))
            H[a, i] = 1.0
            r2[k, i] = np.dot(p * z, wealth_process(tree, H)[leaves])
    valid = bool(z.min() >= -tol and abs(p @ z - 1.0) <= tol)
    worst = float(max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0)))
    agree = bool(np.abs(r1 - r2).max(initial=0.0) <= 1e-12 * (1 + np.abs(r1).max(initial=0.0)))
    return MembershipReport(valid and worst <= tol, r1, r2, worst, agree, valid)


def check_simple_martingale(tree: ScenarioTree, Q, H, x: float = 0.0) -> np.ndarray:
    """``E_Q[X_{t+1} | node] - X_t`` at every internal node (0 where Q(node)=0)."""
    z = np.asarray(Q.density if isinstance(Q, MeasureQ) else Q, dtype=float)
    X = wealth_process(tree, H, x)
    m = tree.node_masses(z)
    out = np.zeros(tree.internal.size)
    for k, a in enumerate(tree.internal):
        if m[a] <= 0:
            continue
        kids = tree.children[a]
        out[k] = float(np.dot(m[kids], X[kids] - X[a]) / m[a])
    return out


def random_measures(poly: MartingalePolytope, rng: np.random.Generator, count: int = 16):
    """Vertices plus ``count`` seeded interior mixtures (the for-all-Q test set)."""
    if poly.vertices is None:
        pt = poly.interior_point()
        return np.empty((0, poly.A.shape[1])) if pt is None else pt[None, :]
    return np.vstack([poly.vertices, poly.sample(rng, count)])
