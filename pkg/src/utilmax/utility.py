"""Utility functions, their convex conjugates and asymptotic diagnostics.

Every utility here is proper, concave, non-decreasing and upper semicontinuous,
normalised so that ``U(0) = 0`` and ``x_lo < 0 < x_bliss``.  Values are extended
reals: ``-inf`` strictly below the effective domain, ``U(+inf)`` at ``+inf``.

The conjugate is ``V(y) = sup_x {U(x) - x y}``; it is ``+inf`` for ``y < 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

INF = math.inf

__all__ = [
    "UtilityFunction",
    "Exponential",
    "ShiftedLog",
    "Power",
    "Quadratic",
    "TruncatedLinear",
    "Linear",
    "PiecewiseLinear",
    "ConjugateFunction",
    "ConjugateNotConverged",
    "DomainError",
    "SubgradientInterval",
    "ElasticityProfile",
    "eval_utility",
    "conjugate",
    "fenchel_residual",
    "satiation_info",
    "subdifferential",
    "elasticity_profile",
    "parse_utility",
]

SATIATION_RTOL = 1e-12


class DomainError(ValueError):
    """Raised when a point lies outside the interior of ``dom U``."""


class ConjugateNotConverged(RuntimeError):
    """Raised when the numeric supremum did not stabilise within its cap."""


@dataclass(frozen=True)
class SubgradientInterval:
    """Supergradients of a concave ``U`` at a point: ``[lower, upper]``.

    ``lower`` is the right derivative ``U'_+`` and ``upper`` the left
    derivative ``U'_-``.
    """

    lower: float
    upper: float

    def __contains__(self, y: float) -> bool:
        return self.lower <= y <= self.upper

    def distance(self, y: float) -> float:
        """Distance from ``y`` to the interval (0 when contained)."""
        if y < self.lower:
            return self.lower - y
        if y > self.upper:
            return y - self.upper
        return 0.0


def _arr(x):
    return np.asarray(x, dtype=float)


def _finish(out, x):
    return out if np.ndim(x) else float(out)


class UtilityFunction:
    """Base class; subclasses set ``family`` and implement the primitives.

    Subclasses provide vectorised ``_value`` on the interior of the domain,
    one-sided derivatives, and (when known) the conjugate in closed form.
    """

    family: str = "abstract"
    smooth: bool = False
    # affine pieces (slope, intercept) with U = min over pieces; PWL families only
    pieces: tuple[tuple[float, float], ...] | None = None

    # ----------------------------------------------------------------- domain
    @property
    def x_lo(self) -> float:
        return -INF

    @property
    def lo_value(self) -> float:
        """u.s.c. value at ``x_lo`` (meaningful when ``x_lo`` is finite)."""
        return -INF

    @property
    def x_bliss(self) -> float:
        return INF

    @property
    def sup_value(self) -> float:
        """``U(+inf)``."""
        return INF

    @property
    def params(self) -> dict:
        return {}

    def spec(self) -> str:
        """Round-trippable spec string for :func:`parse_utility`."""
        kv = ",".join(f"{k}={_fmt_param(v)}" for k, v in self.params.items())
        return f"{self.family}:{kv}" if kv else self.family

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.params})"

    # ------------------------------------------------------------- evaluation
    def __call__(self, x):
        x = _arr(x)
        out = np.full(x.shape, -INF)
        inside = x > self.x_lo
        with np.errstate(over="ignore", invalid="ignore"):
            out[inside] = self._value(x[inside])
        out[x == self.x_lo] = self.lo_value
        out[x == INF] = self.sup_value
        return _finish(out, x)

    def _value(self, x):
        raise NotImplementedError

    def slopes(self, x: float) -> tuple[float, float]:
        """``(U'_+(x), U'_-(x))`` at an interior point."""
        raise NotImplementedError

    def marginal(self, x):
        """``U'`` for smooth families (vectorised)."""
        raise NotImplementedError

    def curvature(self, x):
        """``U''`` for smooth families (vectorised)."""
        raise NotImplementedError

    # -------------------------------------------------------------- conjugate
    has_closed_conjugate = True

    @property
    def conjugate_domain(self) -> tuple[float, float]:
        """Closed interval of ``y >= 0`` on which ``V`` is finite (ends may be inf)."""
        lo = 0.0 if self.sup_value < INF else 0.0
        return (lo, INF)

    def conjugate(self, y):
        y = _arr(y)
        out = np.full(y.shape, INF)
        lo, hi = self.conjugate_domain
        pos = (y > 0) & (y >= lo) & (y <= hi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out[pos] = self._conj(y[pos])
        out[y == 0] = self.sup_value if lo == 0.0 else INF
        return _finish(out, y)

    def _conj(self, y):
        raise NotImplementedError

    def conjugate_slope(self, y):
        """``V'(y)`` on ``(0, inf)`` for smooth families."""
        raise NotImplementedError

    def conjugate_curvature(self, y):
        """``V''(y)`` on ``(0, inf)`` for smooth families."""
        raise NotImplementedError

    def argmax_interval(self, y: float) -> tuple[float, float]:
        """Set ``{x : y in dU(x)}`` of maximisers of ``U(x) - x y`` for ``y >= 0``."""
        raise NotImplementedError


def _fmt_param(v) -> str:
    if isinstance(v, (list, tuple)):
        return "/".join(_fmt_param(t) for t in v)
    return f"{v:.15g}" if isinstance(v, float) else str(v)


@dataclass(frozen=True, repr=False)
class Exponential(UtilityFunction):
    """``U(x) = 1 - exp(-gamma x)``."""

    gamma: float = 1.0
    family = "exp"
    smooth = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def params(self):
        return {"gamma": self.gamma}

    @property
    def sup_value(self):
        return 1.0

    def _value(self, x):
        return -np.expm1(-self.gamma * x)

    def marginal(self, x):
        return self.gamma * np.exp(-self.gamma * _arr(x))

    def curvature(self, x):
        return -self.gamma**2 * np.exp(-self.gamma * _arr(x))

    def slopes(self, x):
        d = float(self.marginal(x))
        return d, d

    def _conj(self, y):
        r = y / self.gamma
        return 1.0 - r + r * np.log(r)

    def conjugate_slope(self, y):
        return np.log(_arr(y) / self.gamma) / self.gamma

    def conjugate_curvature(self, y):
        return 1.0 / (self.gamma * _arr(y))

    def argmax_interval(self, y):
        if y <= 0:
            return INF, INF
        x = -math.log(y / self.gamma) / self.gamma
        return x, x


@dataclass(frozen=True, repr=False)
class ShiftedLog(UtilityFunction):
    """``U(x) = log(1 + x / a)``, finite on ``(-a, inf)``."""

    a: float = 1.0
    family = "log"
    smooth = True

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")

    @property
    def params(self):
        return {"a": self.a}

    @property
    def x_lo(self):
        return -self.a

    def _value(self, x):
        return np.log1p(x / self.a)

    def marginal(self, x):
        return 1.0 / (self.a + _arr(x))

    def curvature(self, x):
        return -1.0 / (self.a + _arr(x)) ** 2

    def slopes(self, x):
        d = float(self.marginal(x))
        return d, d

    def _conj(self, y):
        return -np.log(self.a * y) - 1.0 + self.a * y

    def conjugate_slope(self, y):
        return self.a - 1.0 / _arr(y)

    def conjugate_curvature(self, y):
        return 1.0 / _arr(y) ** 2

    def argmax_interval(self, y):
        if y <= 0:
            return INF, INF
        x = 1.0 / y - self.a
        return x, x


@dataclass(frozen=True, repr=False)
class Power(UtilityFunction):
    """``U(x) = ((1 + x)^p - 1) / p`` for ``p < 1``, ``p != 0``; ``x_lo = -1``."""

    p: float = 0.5
    family = "power"
    smooth = True

    def __post_init__(self):
        if not (self.p < 1 and self.p != 0):
            raise ValueError("power utility needs p < 1 and p != 0")

    @property
    def params(self):
        return {"p": self.p}

    @property
    def x_lo(self):
        return -1.0

    @property
    def lo_value(self):
        return -1.0 / self.p if self.p > 0 else -INF

    @property
    def sup_value(self):
        return INF if self.p > 0 else -1.0 / self.p

    def _value(self, x):
        return np.expm1(self.p * np.log1p(x)) / self.p

    def marginal(self, x):
        return (1.0 + _arr(x)) ** (self.p - 1.0)

    def curvature(self, x):
        return (self.p - 1.0) * (1.0 + _arr(x)) ** (self.p - 2.0)

    def slopes(self, x):
        d = float(self.marginal(x))
        return d, d

    def _conj(self, y):
        q = self.p / (self.p - 1.0)
        return (1.0 - self.p) / self.p * y**q + y - 1.0 / self.p

    def conjugate_slope(self, y):
        return 1.0 - _arr(y) ** (1.0 / (self.p - 1.0))

    def conjugate_curvature(self, y):
        e = 1.0 / (self.p - 1.0)
        return _arr(y) ** (e - 1.0) / (1.0 - self.p)

    def argmax_interval(self, y):
        if y <= 0:
            return INF, INF
        x = y ** (1.0 / (self.p - 1.0)) - 1.0
        return x, x


@dataclass(frozen=True, repr=False)
class Quadratic(UtilityFunction):
    """Normalised quadratic ``x - x^2/2``, held flat at ``1/2`` beyond ``x = 1``.

    The flat extension is the smallest non-decreasing concave majorant; the two
    agree wherever wealth stays below the bliss point 1.
    """

    family = "quad"
    smooth = True

    @property
    def x_bliss(self):
        return 1.0

    @property
    def sup_value(self):
        return 0.5

    def _value(self, x):
        xc = np.minimum(x, 1.0)
        return xc - 0.5 * xc * xc

    def marginal(self, x):
        return np.maximum(1.0 - _arr(x), 0.0)

    def curvature(self, x):
        return np.where(_arr(x) < 1.0, -1.0, 0.0)

    def slopes(self, x):
        d = max(1.0 - x, 0.0)
        return d, d

    def _conj(self, y):
        return 0.5 * (1.0 - y) ** 2

    def conjugate_slope(self, y):
        return _arr(y) - 1.0

    def conjugate_curvature(self, y):
        return np.ones_like(_arr(y))

    def argmax_interval(self, y):
        if y <= 0:
            return 1.0, INF
        return 1.0 - y, 1.0 - y


@dataclass(frozen=True, repr=False)
class TruncatedLinear(UtilityFunction):
    """``U(x) = min(x, bliss)``."""

    bliss: float = 1.0
    family = "trunclin"

    def __post_init__(self):
        if not self.bliss > 0:
            raise ValueError("bliss must be positive")

    @property
    def params(self):
        return {"bliss": self.bliss}

    @property
    def pieces(self):
        return ((1.0, 0.0), (0.0, self.bliss))

    @property
    def x_bliss(self):
        return self.bliss

    @property
    def sup_value(self):
        return self.bliss

    @property
    def conjugate_domain(self):
        return (0.0, 1.0)

    def _value(self, x):
        return np.minimum(x, self.bliss)

    def slopes(self, x):
        if x < self.bliss:
            return 1.0, 1.0
        if x > self.bliss:
            return 0.0, 0.0
        return 0.0, 1.0

    def _conj(self, y):
        return self.bliss * (1.0 - y)

    def argmax_interval(self, y):
        if y <= 0:
            return self.bliss, INF
        if y < 1:
            return self.bliss, self.bliss
        if y == 1:
            return -INF, self.bliss
        raise DomainError("V is infinite for y > 1")


@dataclass(frozen=True, repr=False)
class Linear(UtilityFunction):
    """``U(x) = x`` (risk neutral, no satiation)."""

    family = "linear"

    @property
    def pieces(self):
        return ((1.0, 0.0),)

    @property
    def conjugate_domain(self):
        return (1.0, 1.0)

    def _value(self, x):
        return np.array(x, dtype=float)

    def slopes(self, x):
        return 1.0, 1.0

    def _conj(self, y):
        return np.zeros_like(y)

    def argmax_interval(self, y):
        if y == 1:
            return -INF, INF
        raise DomainError("V is infinite away from y = 1")


@dataclass(frozen=True, repr=False)
class PiecewiseLinear(UtilityFunction):
    """Concave piecewise-linear utility through ``(knots[i], values[i])``.

    Extended to the left with the first segment's slope and to the right with
    slope ``tail`` (default 0, i.e. satiated after the last knot).
    """

    knots: tuple = (-1.0, 0.0, 1.0)
    values: tuple = (-2.0, 0.0, 1.0)
    tail: float = 0.0
    family = "pwl"
    _slopes: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        xs = tuple(float(v) for v in self.knots)
        us = tuple(float(v) for v in self.values)
        object.__setattr__(self, "knots", xs)
        object.__setattr__(self, "values", us)
        if len(xs) != len(us) or len(xs) < 2:
            raise ValueError("need at least two knots with matching values")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("knots must be strictly increasing")
        s = [(u1 - u0) / (x1 - x0) for x0, x1, u0, u1 in zip(xs, xs[1:], us, us[1:])]
        s.append(float(self.tail))
        if any(b > a + 1e-15 for a, b in zip(s, s[1:])) or s[-1] < 0:
            raise ValueError("piecewise-linear utility must be concave and non-decreasing")
        object.__setattr__(self, "_slopes", tuple(s))
        if abs(float(self(0.0))) > 1e-12:
            raise ValueError("piecewise-linear utility must satisfy U(0) = 0")

    @property
    def params(self):
        return {"x": list(self.knots), "u": list(self.values), "tail": self.tail}

    @property
    def pieces(self):
        out = []
        for i, s in enumerate(self._slopes):
            x0, u0 = (self.knots[i], self.values[i]) if i < len(self.knots) else (
                self.knots[-1], self.values[-1])
            out.append((s, u0 - s * x0))
        return tuple(out)

    @property
    def x_bliss(self):
        if self.tail > 0:
            return INF
        # first knot after which U stays at its maximum (satiation tolerance rule)
        top = self.values[-1]
        for x, u in zip(self.knots, self.values):
            if top - u < SATIATION_RTOL * (1 + abs(top)):
                return x
        return self.knots[-1]

    @property
    def sup_value(self):
        return INF if self.tail > 0 else self.values[-1]

    @property
    def conjugate_domain(self):
        return (self._slopes[-1], self._slopes[0])

    def _value(self, x):
        out = np.full(np.shape(x), INF)
        for s, c in self.pieces:
            out = np.minimum(out, s * x + c)
        return out

    def slopes(self, x):
        xs, s = self.knots, self._slopes
        for i, k in enumerate(xs):
            if x < k:
                left = s[i - 1] if i > 0 else s[0]
                return left, left
            if x == k:
                left = s[i - 1] if i > 0 else s[0]
                return s[i], left
        return s[-1], s[-1]

    def _conj(self, y):
        out = np.full(np.shape(y), -INF)
        for k, u in zip(self.knots, self.values):
            out = np.maximum(out, u - k * y)
        return out

    def conjugate(self, y):
        y = _arr(y)
        out = np.full(y.shape, INF)
        lo, hi = self.conjugate_domain
        ok = (y >= lo) & (y <= hi)
        out[ok] = self._conj(y[ok])
        if lo == 0:
            out[y == 0] = self.sup_value
        return _finish(out, y)

    def argmax_interval(self, y):
        lo, hi = self.conjugate_domain
        if y < lo or y > hi:
            raise DomainError("V is infinite at this y")
        s = self._slopes
        # knots where y lies in [right slope, left slope]
        hits = []
        for i, k in enumerate(self.knots):
            left = s[i - 1] if i > 0 else s[0]
            if s[i] <= y <= left:
                hits.append(k)
        xl = -INF if y == s[0] else min(hits)
        xr = INF if y == s[-1] else max(hits)
        return xl, xr


# ---------------------------------------------------------------------------
# numeric conjugation


@dataclass(frozen=True)
class ConjugateFunction:
    """The conjugate ``V`` of a utility, closed form or numeric supremum.

    ``mode`` is ``"auto"`` (closed form when the family has one), ``"closed"``
    or ``"numeric"``.
    """

    utility: UtilityFunction
    mode: str = "auto"
    tol: float = 1e-13
    max_iter: int = 400

    @property
    def numeric(self) -> bool:
        return self.mode == "numeric" or (
            self.mode == "auto" and not self.utility.has_closed_conjugate)

    def __call__(self, y):
        if not self.numeric:
            return self.utility.conjugate(y)
        y = _arr(y)
        out = np.array([self._sup(float(v)) for v in y.ravel()]).reshape(y.shape)
        return _finish(out, y)

    def _sup(self, y: float) -> float:
        U = self.utility
        if y < 0 or math.isnan(y):
            return INF
        if y == 0:
            return U.sup_value

        def f(x):
            return float(U(x)) - x * y

        # bracket the maximiser by doubling away from 0 in both directions;
        # stop once f has decreased on 3 consecutive doublings
        pts = [0.0]
        vals = [f(0.0)]
        for sign in (1.0, -1.0):
            step, drops, prev = 1.0, 0, vals[0]
            for _ in range(1100):
                x = sign * step
                if sign < 0 and x <= U.x_lo:
                    x = U.x_lo
                v = f(x)
                pts.append(x)
                vals.append(v)
                drops = drops + 1 if v < prev else 0
                prev = v
                if drops >= 3 or x == U.x_lo:
                    break
                step *= 2.0
            else:
                return INF
            if v == INF:
                return INF
        order = np.argsort(pts)
        xs = np.asarray(pts)[order]
        fs = np.asarray(vals)[order]
        i = int(np.argmax(fs))
        a = xs[max(i - 1, 0)]
        b = xs[min(i + 1, len(xs) - 1)]
        # dense log-free refinement grid inside the bracket, then golden section
        grid = np.linspace(a, b, 65)
        gv = np.array([f(x) for x in grid])
        j = int(np.argmax(gv))
        a, b = grid[max(j - 1, 0)], grid[min(j + 1, 64)]
        best = max(float(gv[j]), float(fs[i]))
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        c, d = b - invphi * (b - a), a + invphi * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(self.max_iter):
            if b - a <= self.tol * (1.0 + abs(a) + abs(b)):
                return max(best, fc, fd, f(a), f(b))
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = f(d)
        raise ConjugateNotConverged(f"sup for y={y} did not stabilise")


# ---------------------------------------------------------------------------
# operations


def eval_utility(U: UtilityFunction, x):
    """``U(x)`` in the extended reals; ``-inf`` strictly below ``x_lo``."""
    return U(x)


def conjugate(V: ConjugateFunction | UtilityFunction, y):
    """``V(y)``; ``+inf`` for negative ``y``."""
    if isinstance(V, UtilityFunction):
        V = ConjugateFunction(V)
    return V(y)


def fenchel_residual(U: UtilityFunction, x: float, y: float) -> float:
    """``U(x) - x y - V(y)``; never positive, zero iff ``y`` supergradient at ``x``."""
    v = float(U.conjugate(y))
    if v == INF:
        return -INF
    return float(U(x)) - x * y - v


def satiation_info(U: UtilityFunction) -> tuple[float, float, float]:
    """``(x_lo, x_bliss, U(+inf))``."""
    return U.x_lo, U.x_bliss, U.sup_value


def subdifferential(U: UtilityFunction, x: float) -> SubgradientInterval:
    if not (x > U.x_lo and x < INF):
        raise DomainError(f"x={x} is not in the interior of dom U")
    lo, hi = U.slopes(float(x))
    return SubgradientInterval(lo, hi)


@dataclass
class ElasticityProfile:
    x: np.ndarray
    ratio: np.ndarray
    verdict_plus: str
    verdict_minus: str | None
    heuristic: bool = True

    @property
    def verdict(self) -> str:
        return self.verdict_plus


def elasticity_profile(U: UtilityFunction, x_grid: Sequence[float],
                       margin: float = 1e-6) -> ElasticityProfile:
    """Sample ``x U'(x) / U(x)`` and give a HEURISTIC reading of RAE.

    The asymptotic elasticity condition is a limsup/liminf statement; only
    the largest (most negative) sampled points inform the verdict.
    """
    xs = np.asarray(sorted(x_grid), dtype=float)
    ratios = np.empty_like(xs)
    for i, x in enumerate(xs):
        u = float(U(x))
        d = U.slopes(float(x))[1]
        ratios[i] = x * d / u if u != 0 else np.nan
    pos = ratios[xs > 0]
    neg = ratios[xs < 0]
    verdict_plus = "undetermined"
    if pos.size:
        tail = pos[len(pos) // 2:]
        verdict_plus = ("RAE-satisfied-at-+inf" if np.nanmax(tail) < 1 - margin
                        else "RAE-violated-at-+inf")
    verdict_minus = None
    if neg.size:
        tail = neg[: max(1, (len(neg) + 1) // 2)]
        verdict_minus = ("RAE-satisfied-at--inf" if np.nanmin(tail) > 1 + margin
                         else "RAE-violated-at--inf")
    return ElasticityProfile(xs, ratios, verdict_plus, verdict_minus)


# ---------------------------------------------------------------------------
# spec strings: family:key=value,...

_FAMILIES = {
    "exp": Exponential,
    "log": ShiftedLog,
    "power": Power,
    "quad": Quadratic,
    "trunclin": TruncatedLinear,
    "linear": Linear,
    "pwl": PiecewiseLinear,
}


def parse_utility(text: str) -> UtilityFunction:
    """Parse ``family:key=value,...`` (e.g. ``exp:gamma=1``, ``trunclin:bliss=1``).

    List-valued parameters (``pwl:x=-1/0/1,u=-2/0/1``) use ``/`` separators.
    """
    family, _, rest = text.strip().partition(":")
    family = family.strip().lower()
    if family not in _FAMILIES:
        raise ValueError(f"unknown utility family {family!r}")
    kwargs = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"malformed parameter {item!r} in {text!r}")
        key = key.strip()
        if "/" in val:
            kwargs[key] = tuple(float(v) for v in val.split("/"))
        else:
            kwargs[key] = float(val)
    if family == "pwl":
        kwargs = {"knots": kwargs.pop("x"), "values": kwargs.pop("u"), **kwargs}
    try:
        return _FAMILIES[family](**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad parameters for {family!r}: {exc}") from None
