"""Young functions, Luxemburg gauges on finite samples, Orlicz-heart diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from . import kernels
from .utility import Exponential, UtilityFunction

INF = math.inf

__all__ = [
    "YoungFunction",
    "induce_young",
    "power_young",
    "cosh_young",
    "indicator_young",
    "luxemburg_norm",
    "GaugeBracketError",
    "Distribution",
    "HeartReport",
    "heart_membership",
    "DominanceReport",
    "young_dominates",
]


class GaugeBracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class YoungFunction:
    """An even, convex, l.s.c. ``Psi`` with ``Psi(0) = 0``, finite near 0.

    ``mode`` is one of ``induced``, ``power``, ``cosh``, ``indicator``.
    ``radius`` is the supremum of the open set on which ``Psi`` is finite.
    """

    mode: str
    param: float = 1.0
    utility: UtilityFunction | None = field(default=None, compare=False)
    radius: float = INF
    label: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        with np.errstate(over="ignore", invalid="ignore"):
            if self.mode == "power":
                out = a**self.param
            elif self.mode == "cosh":
                out = np.cosh(self.param * a) - 1.0
            elif self.mode == "indicator":
                out = np.where(a <= 1.0, 0.0, INF)
            elif self.mode == "induced":
                out = -np.asarray(self.utility(-a), dtype=float)
            else:
                raise ValueError(f"unknown Young mode {self.mode!r}")
        return out if out.ndim else float(out)

    @property
    def kernel(self) -> tuple[int, float] | None:
        """Kernel code and parameter when a compiled fast path exists."""
        if self.mode == "power":
            return kernels.POWER, self.param
        if self.mode == "cosh":
            return kernels.COSH, self.param
        if self.mode == "indicator":
            return kernels.INDICATOR, 0.0
        if self.mode == "induced" and isinstance(self.utility, Exponential):
            return kernels.EXPABS, self.utility.gamma
        return None

    def mean(self, values, weights, scale: float = 1.0) -> float:
        """``E[Psi(X / scale)]`` for a weighted sample."""
        k = self.kernel
        if k is not None:
            return kernels.young_mean(k[0], k[1], values, weights, scale)
        w = np.asarray(weights, dtype=float)
        psi = self(np.asarray(values, dtype=float) / scale)
        mask = w != 0
        return float(np.dot(w[mask], psi[mask]))

    def __str__(self):
        return self.label or f"{self.mode}({self.param:g})"


def induce_young(U: UtilityFunction) -> YoungFunction:
    """``U_hat(x) = -U(-|x|)``; finite for ``|x| < -x_lo``."""
    if not (U.x_lo < 0 < U.x_bliss) or abs(float(U(0.0))) > 1e-12:
        raise ValueError("utility must satisfy x_lo < 0 < x_bliss and U(0) = 0")
    return YoungFunction("induced", utility=U, radius=-U.x_lo, label=f"induced[{U.spec()}]")


def power_young(p: float = 2.0) -> YoungFunction:
    if p < 1:
        raise ValueError("power Young function needs p >= 1")
    return YoungFunction("power", p, label=f"|x|^{p:g}")


def cosh_young(scale: float = 1.0) -> YoungFunction:
    return YoungFunction("cosh", scale, label="cosh-1")


def indicator_young() -> YoungFunction:
    return YoungFunction("indicator", radius=1.0, label="indicator")


def luxemburg_norm(psi: YoungFunction, values, weights=None, rtol: float = 1e-12,
                   max_iter: int = 200) -> float:
    """Gauge ``inf{k > 0 : E[Psi(X/k)] <= 1}`` by bisection.

    The returned ``k`` is always feasible (``E[Psi(X/k)] <= 1``).  The bracket
    is found by exact halving/doubling from ``max|X|``, which keeps the result
    homogeneous under power-of-two rescaling.
    """
    x = np.asarray(values, dtype=float).ravel()
    w = (np.full(x.shape, 1.0 / x.size) if weights is None
         else np.asarray(weights, dtype=float).ravel())
    if x.size == 0 or not np.any((x != 0) & (w > 0)):
        return 0.0
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")

    def feasible(k):
        return psi.mean(x, w, k) <= 1.0

    hi = float(np.max(np.abs(x[w > 0])))
    for _ in range(2100):
        if feasible(hi):
            break
        hi *= 2.0
    else:
        raise GaugeBracketError("no feasible upper bracket for the gauge")
    lo = hi
    for _ in range(2100):
        lo *= 0.5
        if not feasible(lo):
            break
        hi = lo
    else:
        raise GaugeBracketError("gauge collapses to 0 on a non-zero sample")
    for _ in range(max_iter):
        if hi - lo <= rtol * hi:
            break
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Orlicz heart membership for parametric laws


@dataclass(frozen=True)
class Distribution:
    """A parametric law from the supported catalogue.

    ``kind``: ``gaussian`` (mu, sigma), ``exponential`` (rate),
    ``pareto`` (alpha, xm; symmetric two-sided Pareto tail).
    """

    kind: str
    a: float = 0.0
    b: float = 1.0

    @classmethod
    def gaussian(cls, mu=0.0, sigma=1.0):
        return cls("gaussian", mu, sigma)

    @classmethod
    def exponential(cls, rate=1.0):
        return cls("exponential", rate, 0.0)

    @classmethod
    def pareto(cls, alpha=2.0, xm=1.0):
        return cls("pareto", alpha, xm)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return stats.norm.pdf(x, self.a, self.b)
        if self.kind == "exponential":
            return np.where(x >= 0, self.a * np.exp(-self.a * np.maximum(x, 0.0)), 0.0)
        if self.kind == "pareto":
            ax = np.abs(x)
            return np.where(ax >= self.b,
                            0.5 * self.a * self.b**self.a / np.maximum(ax, self.b) ** (self.a + 1),
                            0.0)
        raise ValueError(f"unknown distribution {self.kind!r}")

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, INF) if self.kind == "exponential" else (-INF, INF)

    @property
    def breakpoints(self) -> list[float]:
        if self.kind == "pareto":
            return [-self.b, self.b]
        if self.kind == "gaussian":
            return [self.a]
        return []


@dataclass
class HeartReport:
    c_grid: np.ndarray
    values: np.ndarray  # E[Psi(cX)], inf where divergence detected
    finite: np.ndarray
    classification: str  # "heart", "space-only", "outside"
    analytic_threshold: float | None
    analytic_agrees: bool | None
    diagnostics: list[str]


def _analytic_threshold(psi: YoungFunction, dist: Distribution) -> float | None:
    """Supremum of ``c`` with ``E[Psi(cX)] < inf`` when known in closed form."""
    if psi.mode == "power":
        if dist.kind == "pareto":
            return INF if psi.param < dist.a else 0.0
        return INF
    exp_type = psi.mode == "cosh" or (psi.mode == "induced" and isinstance(psi.utility, Exponential))
    if exp_type:
        rate = psi.param if psi.mode == "cosh" else psi.utility.gamma
        if dist.kind == "gaussian":
            return INF
        if dist.kind == "exponential":
            return dist.a / rate
        if dist.kind == "pareto":
            return 0.0
    if psi.mode == "indicator":
        return 0.0  # every catalogued law is unbounded
    return None


def _tail_integral(fun: Callable, dist: Distribution, max_doublings: int = 60,
                   window: int = 5) -> tuple[float, str]:
    """Integrate ``fun * pdf`` over the support with truncation doubling.

    Returns ``(value, status)``; ``status`` is ``finite``, ``divergent`` or
    ``unconverged``.  Divergence is declared when the contribution of the
    added shells fails to shrink across ``window`` successive doublings.
    """
    lo_s, _ = dist.support
    two_sided = lo_s == -INF

    def piece(a, b):
        pts = [p for p in dist.breakpoints if a < p < b] or None

        def g(t):
            dens = float(dist.pdf(t))
            return float(fun(t)) * dens if dens > 0 else 0.0

        with np.errstate(over="ignore", invalid="ignore"):
            v, _ = integrate.quad(g, a, b, points=pts, limit=200, epsabs=0.0, epsrel=1e-11)
        return v

    L = 1.0 + max(abs(p) for p in dist.breakpoints + [0.0])
    total = piece(-L if two_sided else 0.0, L)
    shells = []
    for _ in range(max_doublings):
        inc = piece(L, 2 * L)
        if two_sided:
            inc += piece(-2 * L, -L)
        if not math.isfinite(inc):
            return INF, "divergent"
        total += inc
        shells.append(inc)
        L *= 2
        if len(shells) > window:
            recent = shells[-window - 1:]
            if all(b >= a * (1 - 1e-9) and b > 0 for a, b in zip(recent, recent[1:])):
                return INF, "divergent"
        if inc == 0.0 or (len(shells) > 2 and inc <= 1e-14 * abs(total) and inc < shells[-2]):
            return total, "finite"
    if len(shells) > 1 and 0 < shells[-1] < shells[-2]:
        r = shells[-1] / shells[-2]
        return total + shells[-1] * r / (1 - r), "unconverged"
    return total, "unconverged"


def heart_membership(psi: YoungFunction, dist: Distribution,
                     c_grid: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0)) -> HeartReport:
    """Classify ``X ~ dist`` against ``L^Psi`` and its heart ``M^Psi``.

    ``heart``: ``E[Psi(cX)]`` finite for every tested ``c``; ``space-only``:
    finite for some; ``outside``: finite for none.  A closed-form threshold is
    cross-checked where one is known.
    """
    cs = np.asarray(c_grid, dtype=float)
    vals = np.empty_like(cs)
    diags = []
    for i, c in enumerate(cs):
        v, status = _tail_integral(lambda t, c=c: psi(c * t), dist)
        if status == "unconverged":
            diags.append(f"c={c:g}: truncation did not converge; extrapolated tail used")
        vals[i] = v
    finite = np.isfinite(vals)
    if finite.all():
        cls = "heart"
    elif finite.any():
        cls = "space-only"
    else:
        cls = "outside"
    thr = _analytic_threshold(psi, dist)
    agrees = None
    if thr is not None:
        expected = cs < thr
        agrees = bool(np.array_equal(expected, finite))
        if not agrees:
            diags.append(f"numeric verdicts disagree with analytic threshold c* = {thr:g}")
    return HeartReport(cs, vals, finite, cls, thr, agrees, diags)


# ---------------------------------------------------------------------------
# domination order


@dataclass
class DominanceReport:
    dominates: bool
    lam: float | None
    x0: float | None
    heuristic: bool = True


def young_dominates(psi1: YoungFunction, psi2: YoungFunction,
                    lam_grid: Sequence[float] = (1.0, 1.5, 2.0, 3.0, 4.0, 8.0),
                    x0_grid: Sequence[float] = (0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0),
                    x_grid: Sequence[float] | None = None) -> DominanceReport:
    """Search ``(lam, x0)`` with ``Psi1(lam x) >= Psi2(x)`` for grid ``x >= x0``.

    HEURISTIC: the order is asymptotic and only a finite grid is inspected.
    """
    xs = (np.unique(np.concatenate([np.geomspace(1e-2, 200.0, 400), np.asarray(x0_grid, float)]))
          if x_grid is None else np.asarray(x_grid, dtype=float))
    p2 = psi2(xs)
    for lam in sorted(lam_grid):
        for x0 in sorted(x0_grid):
            sel = xs >= x0
            with np.errstate(invalid="ignore"):
                ok = np.all(psi1(lam * xs[sel]) >= p2[sel])
            if ok:
                return DominanceReport(True, float(lam), float(x0))
    return DominanceReport(False, None, None)

