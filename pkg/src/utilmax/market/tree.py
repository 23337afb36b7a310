"""Finite filtrations as rooted scenario trees with d-dimensional prices."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = ["MarketError", "ScenarioTree", "wealth_process", "maximal_process",
           "random_tree", "binomial", "trinomial"]

PROB_TOL = 1e-9


class MarketError(ValueError):
    """Invalid market specification; ``location`` names the offending node/field."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


@dataclass(frozen=True, eq=False)
class ScenarioTree:
    """Scenario tree stored as parent-linked arrays in topological order.

    Node 0 is the root.  ``prices`` has shape (n_nodes, d).  Strategies are
    arrays of shape (n_nodes, d) whose row ``a`` is the position held over the
    period following node ``a`` (rows of terminal nodes are ignored).
    """

    parent: np.ndarray
    time: np.ndarray
    p_cond: np.ndarray
    prices: np.ndarray
    ids: tuple = field(default=())

    def __post_init__(self):
        n = len(self.parent)
        if self.prices.ndim != 2 or self.prices.shape[0] != n:
            raise MarketError("prices must have shape (n_nodes, d)")
        if n == 0 or self.parent[0] != -1 or np.count_nonzero(self.parent < 0) != 1:
            raise MarketError("tree needs exactly one root, stored first")
        if self.time[0] != 0:
            raise MarketError("root must sit at t = 0", self._loc(0))
        for a in range(1, n):
            pa = self.parent[a]
            if not 0 <= pa < a:
                raise MarketError("parent must precede child", self._loc(a))
            if self.time[a] != self.time[pa] + 1:
                raise MarketError("child time must be parent time + 1", self._loc(a))
            if not self.p_cond[a] > 0:
                raise MarketError("conditional probabilities must be positive", self._loc(a))
        if not np.all(np.isfinite(self.prices)):
            raise MarketError("prices must be finite")
        sums = np.zeros(n)
        np.add.at(sums, self.parent[1:], self.p_cond[1:])
        T = int(self.time.max())
        for a in range(n):
            if self.children[a].size == 0:
                if self.time[a] != T:
                    raise MarketError(f"terminal node before horizon T={T}", self._loc(a))
            elif abs(sums[a] - 1.0) > PROB_TOL:
                raise MarketError(
                    f"children probabilities sum to {sums[a]:.12g}, not 1", self._loc(a))

    def _loc(self, a: int) -> str:
        return f"node {self.ids[a] if self.ids else a}"

    # ------------------------------------------------------------ structure
    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def d(self) -> int:
        return self.prices.shape[1]

    @property
    def horizon(self) -> int:
        return int(self.time.max())

    @cached_property
    def children(self) -> list[np.ndarray]:
        kids = [[] for _ in range(self.n_nodes)]
        for a in range(1, self.n_nodes):
            kids[self.parent[a]].append(a)
        return [np.asarray(k, dtype=int) for k in kids]

    @cached_property
    def internal(self) -> np.ndarray:
        """Non-terminal nodes in topological order."""
        return np.array([a for a in range(self.n_nodes) if self.children[a].size], dtype=int)

    @cached_property
    def leaves(self) -> np.ndarray:
        return np.array([a for a in range(self.n_nodes) if not self.children[a].size], dtype=int)

    @cached_property
    def prob(self) -> np.ndarray:
        """Unconditional P-mass of every node."""
        p = np.empty(self.n_nodes)
        p[0] = 1.0
        for a in range(1, self.n_nodes):
            p[a] = p[self.parent[a]] * self.p_cond[a]
        return p

    @cached_property
    def p_leaf(self) -> np.ndarray:
        return self.prob[self.leaves]

    @cached_property
    def leaf_index(self) -> np.ndarray:
        """Map node id -> position among leaves (-1 for internal nodes)."""
        idx = np.full(self.n_nodes, -1)
        idx[self.leaves] = np.arange(self.leaves.size)
        return idx

    @cached_property
    def descendant_leaves(self) -> list[np.ndarray]:
        """Leaf positions below each node."""
        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for pos, leaf in enumerate(self.leaves):
            a = leaf
            while a >= 0:
                out[a].append(pos)
                a = self.parent[a]
        return [np.asarray(v, dtype=int) for v in out]

    @cached_property
    def gain_matrix(self) -> np.ndarray:
        """``G`` with ``H . S_T = G @ pack(H)`` at the leaves.

        Column ``(k, i)`` (internal node ``internal[k]``, asset ``i``) holds the
        price change of asset ``i`` over the step out of that node along each
        leaf's path, and zero for leaves not below it.
        """
        nI, d = self.internal.size, self.d
        G = np.zeros((self.leaves.size, nI * d))
        for k, a in enumerate(self.internal):
            for c in self.children[a]:
                rows = self.descendant_leaves[c]
                G[np.ix_(rows, range(k * d, (k + 1) * d))] = self.prices[c] - self.prices[a]
        return G

    def pack(self, H) -> np.ndarray:
        """Flatten an (n_nodes, d) strategy to the internal-node vector."""
        H = np.asarray(H, dtype=float).reshape(self.n_nodes, self.d)
        return H[self.internal].ravel()

    def unpack(self, h) -> np.ndarray:
        H = np.zeros((self.n_nodes, self.d))
        H[self.internal] = np.asarray(h, dtype=float).reshape(self.internal.size, self.d)
        return H

    def node_masses(self, density) -> np.ndarray:
        """Q-mass of every node from a terminal density ``dQ/dP``."""
        m = np.zeros(self.n_nodes)
        m[self.leaves] = self.p_leaf * np.asarray(density, dtype=float)
        for a in range(self.n_nodes - 1, 0, -1):
            m[self.parent[a]] += m[a]
        return m

    def nodes_at(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.time == t)

    # ------------------------------------------------------------------ I/O
    @classmethod
    def from_nodes(cls, nodes: Sequence[dict], assets: int | None = None,
                   horizon: int | None = None) -> "ScenarioTree":
        """Build from ``[{id, parent, t, p_cond, prices}, ...]`` in any order."""
        if not nodes:
            raise MarketError("no nodes given")
        try:
            by_id = {}
            for k, nd in enumerate(nodes):
                nid = nd["id"]
                if nid in by_id:
                    raise MarketError("duplicate id", f"nodes[{k}]")
                by_id[nid] = nd
            order = sorted(nodes, key=lambda nd: (int(nd["t"]), str(nd["id"])))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MarketError):
                raise
            raise MarketError(f"missing or malformed field {exc}") from None
        pos = {nd["id"]: k for k, nd in enumerate(order)}
        parent, time, pc, prices = [], [], [], []
        for nd in order:
            loc = f"node {nd['id']}"
            par = nd.get("parent")
            if par is None:
                parent.append(-1)
            elif par not in pos:
                raise MarketError(f"unknown parent {par!r}", loc)
            else:
                parent.append(pos[par])
            try:
                time.append(int(nd["t"]))
                pc.append(float(nd.get("p_cond", 1.0)))
                prices.append([float(v) for v in nd["prices"]])
            except (KeyError, TypeError, ValueError) as exc:
                raise MarketError(f"missing or malformed field {exc}", loc) from None
        widths = {len(p) for p in prices}
        if len(widths) != 1:
            raise MarketError("all nodes need the same number of prices")
        d = widths.pop()
        if assets is not None and assets != d:
            raise MarketError(f"assets={assets} but nodes carry {d} prices", "assets")
        tree = cls(np.asarray(parent), np.asarray(time), np.asarray(pc),
                   np.asarray(prices, dtype=float).reshape(len(order), d),
                   tuple(nd["id"] for nd in order))
        if horizon is not None and horizon != tree.horizon:
            raise MarketError(f"horizon={horizon} but deepest node is at t={tree.horizon}",
                              "horizon")
        return tree

    @classmethod
    def from_json(cls, text: str) -> "ScenarioTree":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MarketError(f"invalid JSON ({exc.msg})", f"line {exc.lineno}") from None
        if not isinstance(data, dict) or "nodes" not in data:
            raise MarketError("expected an object with a 'nodes' list")
        return cls.from_nodes(data["nodes"], data.get("assets"), data.get("horizon"))

    @classmethod
    def load(cls, path) -> "ScenarioTree":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def to_dict(self) -> dict:
        ids = self.ids or tuple(range(self.n_nodes))
        nodes = []
        for a in range(self.n_nodes):
            nodes.append({
                "id": ids[a],
                "parent": None if a == 0 else ids[self.parent[a]],
                "t": int(self.time[a]),
                "p_cond": float(self.p_cond[a]),
                "prices": [float(v) for v in self.prices[a]],
            })
        return {"assets": self.d, "horizon": self.horizon, "nodes": nodes}


def wealth_process(tree: ScenarioTree, H, x: float = 0.0) -> np.ndarray:
    """``X = x + H . S`` at every node (exact telescoping along each path)."""
    H = np.asarray(H, dtype=float).reshape(tree.n_nodes, tree.d)
    X = np.empty(tree.n_nodes)
    X[0] = x
    for a in range(1, tree.n_nodes):
        pa = tree.parent[a]
        X[a] = X[pa] + H[pa] @ (tree.prices[a] - tree.prices[pa])
    return X


def maximal_process(source) -> np.ndarray:
    """Running maximal functional ``S*_t = sum_i sup_{s<=t} |S^i_s|``.

    ``source`` is a :class:`ScenarioTree` (returns one value per node) or a
    path array of shape (n, T+1, d) or (n, T+1) (returns shape (n, T+1)).
    """
    from .. import kernels

    if isinstance(source, ScenarioTree):
        out = np.empty(source.n_nodes)
        run = np.empty((source.n_nodes, source.d))
        for a in range(source.n_nodes):
            cur = np.abs(source.prices[a])
            run[a] = cur if a == 0 else np.maximum(run[source.parent[a]], cur)
            out[a] = run[a].sum()
        return out
    paths = np.asarray(source, dtype=float)
    if paths.ndim == 2:
        paths = paths[:, :, None]
    return kernels.maximal_paths(paths)


# ---------------------------------------------------------------------------
# fixtures and random generation


def binomial(s0: float = 1.0, up: float = 2.0, down: float = 0.5, p: float = 0.5) -> ScenarioTree:
    """One-period single-asset binomial tree."""
    return ScenarioTree(np.array([-1, 0, 0]), np.array([0, 1, 1]), np.array([1.0, p, 1 - p]),
                        np.array([[s0], [up], [down]]))


def trinomial(s0: float = 1.0, prices=(2.0, 1.0, 0.5), probs=None) -> ScenarioTree:
    """One-period single-asset trinomial tree (uniform P by default)."""
    probs = np.full(3, 1 / 3) if probs is None else np.asarray(probs, dtype=float)
    return ScenarioTree(np.array([-1, 0, 0, 0]), np.array([0, 1, 1, 1]),
                        np.concatenate([[1.0], probs]),
                        np.array([[s0]] + [[v] for v in prices], dtype=float))


def random_tree(rng: np.random.Generator, max_periods: int = 3, max_branches: int = 3,
                max_assets: int = 2, price_range=(0.2, 5.0)) -> ScenarioTree:
    """Arbitrage-free random tree (an equivalent martingale measure exists).

    At each node a random positive kernel ``q`` is drawn and child prices are
    the parent price plus ``q``-centred deviations, rescaled so every price
    stays inside ``price_range``.
    """
    lo, hi = price_range
    T = int(rng.integers(1, max_periods + 1))
    d = int(rng.integers(1, max_assets + 1))
    parent, time, pc, prices = [-1], [0], [1.0], [rng.uniform(lo + 0.3, hi - 0.3, d)]
    frontier = [0]
    for t in range(1, T + 1):
        nxt = []
        for a in frontier:
            b = int(rng.integers(2, max_branches + 1))
            p = rng.dirichlet(np.full(b, 2.0))
            q = rng.dirichlet(np.full(b, 2.0))
            dev = rng.normal(size=(b, d))
            dev -= q @ dev
            s = prices[a]
            room = np.minimum(s - lo, hi - s) * 0.95
            scale = np.min(room / np.maximum(np.abs(dev).max(axis=0), 1e-12))
            for j in range(b):
                parent.append(a)
                time.append(t)
                pc.append(float(p[j]))
                prices.append(s + scale * dev[j])
                nxt.append(len(parent) - 1)
        frontier = nxt
    return ScenarioTree(np.asarray(parent), np.asarray(time), np.asarray(pc),
                        np.asarray(prices, dtype=float))
