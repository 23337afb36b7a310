"""Single-integrand localisation of a path sample along nested predictable sets.

Given nested sets ``D_1 ⊆ D_2 ⊆ ... ⊆ D_N = everything`` (boolean masks over
(path, step)), build ``phi = sum_n c_n d_n 1_{D_n}`` so that the maximal
functional of ``phi . S`` is Psi-integrable with an explicit bound.  The
sequence of sets is continued by ``D_n = D_N`` for ``n > N``; that constant
tail is summed in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..orlicz import YoungFunction
from .tree import maximal_process

__all__ = ["LocalizationCertificate", "sigma_localize", "level_sets", "compound_poisson_paths",
           "integral_maximal"]

BUDGET = 1.0
MAX_HALVINGS = 60


class LocalizationError(RuntimeError):
    """No feasible scale within the halving cap."""


@dataclass
class LocalizationCertificate:
    c: np.ndarray            # scale per set
    b: np.ndarray            # E[Psi(c_n (1_{D_n} . S)^*_T)]
    d: np.ndarray            # convex weights (last entry aggregates the constant tail)
    h: float                 # normaliser
    phi: np.ndarray          # (n_paths, T) integrand
    expectation: float       # E[Psi((phi . S)^*_T)]
    weighted_sum: float      # sum d_n b_n
    bound: float             # 2 (1 + b_1)
    phi_positive: bool
    phi_at_most_one: bool
    chain_holds: bool        # expectation <= weighted_sum <= h <= bound
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.phi_positive and self.phi_at_most_one and self.chain_holds

    def summary(self) -> dict:
        return {"c": self.c.tolist(), "b": self.b.tolist(), "d": self.d.tolist(),
                "h": self.h, "expectation": self.expectation,
                "weighted_sum": self.weighted_sum, "bound": self.bound,
                "phi_positive": self.phi_positive, "phi_at_most_one": self.phi_at_most_one,
                "chain_holds": self.chain_holds, "notes": list(self.notes)}


def _increments(paths: np.ndarray) -> np.ndarray:
    paths = np.asarray(paths, dtype=float)
    if paths.ndim == 2:
        paths = paths[:, :, None]
    return np.diff(paths, axis=1)


def integral_maximal(paths, integrand) -> np.ndarray:
    """``(K . S)^*_T = sum_i max_t |sum_{s<=t} K_s dS^i_s|`` per path."""
    return kernels.integral_maximal(_increments(paths), np.asarray(integrand, dtype=float))


def level_sets(paths, levels) -> list[np.ndarray]:
    """Predictable sets ``D_n = {S^*_{t-1} <= k_n}`` as (n_paths, T) masks.

    Use ``inf`` as the last level to obtain the whole space.
    """
    star = maximal_process(paths)[:, :-1]
    return [star <= k for k in levels]


def sigma_localize(paths, psi: YoungFunction, sets, weights=None, budget: float = BUDGET,
                   max_halvings: int = MAX_HALVINGS) -> LocalizationCertificate:
    """Build the localising integrand and its bound certificate on a sample."""
    inc = _increments(paths)
    n_paths, T, _ = inc.shape
    w = (np.full(n_paths, 1.0 / n_paths) if weights is None
         else np.asarray(weights, dtype=float))
    masks = [np.asarray(D, dtype=bool).reshape(n_paths, T) for D in sets]
    if not masks:
        raise ValueError("need at least one set")
    for k in range(1, len(masks)):
        if np.any(masks[k - 1] & ~masks[k]):
            raise ValueError(f"sets are not nested at position {k}")
    notes = []
    if not masks[-1].all():
        notes.append("last set is not the whole space; phi vanishes off the union")

    cs, bs = [], []
    for n, D in enumerate(masks, start=1):
        star = kernels.integral_maximal(inc, D.astype(float))
        c = 1.0
        for _ in range(max_halvings + 1):
            val = psi.mean(star, w, 1.0 / c)
            if val <= budget:
                break
            c *= 0.5
        else:
            raise LocalizationError(f"set {n}: no scale within {max_halvings} halvings")
        cs.append(c)
        bs.append(val)
    c, b = np.asarray(cs), np.asarray(bs)
    N = len(masks)
    # 2^{-n} for n < N, plus the tail sum_{n >= N} 2^{-n} = 2^{-(N-1)} on the last set
    coef = 0.5 ** np.arange(1, N + 1)
    coef[-1] *= 2.0
    h = 1.0 / float(np.sum(coef / (1.0 + b)))
    d = h * coef / (1.0 + b)
    phi = np.zeros((n_paths, T))
    for cn, dn, D in zip(c, d, masks):
        phi += cn * dn * D
    star_phi = kernels.integral_maximal(inc, phi)
    expectation = psi.mean(star_phi, w, 1.0)
    weighted = float(np.dot(d, b))
    bound = 2.0 * (1.0 + b[0])
    slack = 1e-12 * (1.0 + weighted)
    chain = bool(expectation <= weighted + slack and weighted <= h and h <= bound)
    return LocalizationCertificate(c, b, d, h, phi, float(expectation), weighted, bound,
                                   bool(phi.min() > 0), bool(phi.max() <= 1.0 + 1e-15),
                                   chain, notes)


def compound_poisson_paths(n_paths: int, steps: int = 4, rate: float = 1.0, tail: float = 1.5,
                           s0: float = 1.0, d: int = 1, seed: int = 42) -> np.ndarray:
    """Compound-Poisson paths with symmetric Pareto(``tail``) jump sizes.

    Returns an array of shape (n_paths, steps + 1, d); each step adds a
    Poisson(``rate``) number of jumps.
    """
    rng = np.random.default_rng(seed)
    counts = rng.poisson(rate, size=(n_paths, steps, d))
    total = int(counts.sum())
    sizes = (rng.pareto(tail, size=total) + 1.0) * rng.choice([-1.0, 1.0], size=total)
    owner = np.repeat(np.arange(counts.size), counts.ravel())
    jumps = np.bincount(owner, weights=sizes, minlength=counts.size).reshape(counts.shape)
    paths = np.empty((n_paths, steps + 1, d))
    paths[:, 0] = s0
    paths[:, 1:] = s0 + np.cumsum(jumps, axis=1)
    return paths
