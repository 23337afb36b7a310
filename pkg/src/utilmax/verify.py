"""Property checkers that turn solver outputs into pass/fail reports with residuals.

Every check returns a :class:`CheckReport` and never raises on a failed
property.  Statements quantified over all martingale measures are evaluated
at the polytope vertices plus 16 seeded interior mixtures: the tested
inequalities are linear in the density, so vertices decide them and the
mixtures guard against implementation slips.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .market.entropy import mixture_bound
from .market.polytope import MartingalePolytope, MeasureQ, martingale_polytope, random_measures
from .market.tree import ScenarioTree, wealth_process
from .solvers.certificate import DualityCertificate, satiation_report, supermartingale_residuals
from .solvers.common import DualSolution, NoFiniteEntropy, PrimalSolution
from .solvers.complete import solve_complete
from .solvers.primal import solve_primal
from .utility import UtilityFunction

__all__ = [
    "CheckReport", "check_value_chain", "check_supermartingale", "check_inada_growth",
    "check_satiation_gap", "check_entropy_mixture", "check_satiation_set",
    "certificate_reports", "reports_to_csv", "measure_sample", "complete_value",
]

INF = math.inf
DEFAULT_TOL = 1e-8
MIXTURES = 16


@dataclass
class CheckReport:
    """Outcome of one check: ``passed`` iff ``worst <= tol``."""

    name: str
    tol: float
    rows: list[tuple[str, float]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def worst(self) -> float:
        return max((r for _, r in self.rows), default=-INF)

    @property
    def passed(self) -> bool:
        return not self.rows or self.worst <= self.tol

    @property
    def failures(self) -> list[tuple[str, float]]:
        return [(loc, r) for loc, r in self.rows if not r <= self.tol]

    def add(self, location: str, residual: float) -> None:
        self.rows.append((str(location), float(residual)))

    def to_dict(self) -> dict:
        worst = self.worst
        return {"check": self.name, "passed": self.passed,
                "worst_residual": worst if math.isfinite(worst) else str(worst),
                "tol": self.tol, "notes": list(self.notes),
                "table": [{"location": loc, "residual": r if math.isfinite(r) else str(r)}
                          for loc, r in self.rows]}

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst residual {self.worst:.3e} (tol {self.tol:.1e})"


def reports_to_csv(reports, fh=None, precision: int = 15) -> str:
    """Flat ``check,location,residual,pass`` table; written to ``fh`` when given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "location", "residual", "pass"])
    for rep in reports:
        for loc, r in rep.rows:
            w.writerow([rep.name, loc, f"{r:.{precision}g}", int(r <= rep.tol)])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def measure_sample(poly: MartingalePolytope, seed: int = 42, mixtures: int = MIXTURES) -> np.ndarray:
    """Vertex densities followed by seeded interior mixtures."""
    return random_measures(poly, np.random.default_rng(seed), mixtures)


def complete_value(Q: MeasureQ, U: UtilityFunction, x: float) -> float:
    """``u_Q(x)``, also when ``Q`` leaves states uncharged.

    Uncharged states cost nothing, so the optimal wealth there is ``+inf`` and
    they contribute ``U(+inf)``; the charged part is a complete market of its own.
    """
    z = Q.density
    charged = z > 0
    if charged.all():
        return solve_complete(Q, U, x).value
    pi = float(Q.p[charged].sum())
    sub = MeasureQ(z[charged] * pi, Q.p[charged] / pi)
    rest = (1.0 - pi) * float(U.sup_value)
    if rest == INF:
        return INF
    return pi * solve_complete(sub, U, x).value + rest


# ---------------------------------------------------------------------------


def check_value_chain(tree: ScenarioTree, U: UtilityFunction, x: float,
                      primal_value: float | None = None, poly: MartingalePolytope | None = None,
                      seed: int = 42, tol: float = DEFAULT_TOL) -> CheckReport:
    """``u_primal(x) <= u_Q(x)`` for every vertex and sampled mixture ``Q``."""
    poly = poly or martingale_polytope(tree)
    rep = CheckReport("value_chain", tol)
    if primal_value is None:
        primal_value = solve_primal(tree, U, x).value
    rep.notes.append(f"u_primal = {primal_value:.15g}")
    if poly.empty:
        rep.add("polytope", INF)
        rep.notes.append("empty martingale polytope")
        return rep
    dens = measure_sample(poly, seed)
    n_vert = 0 if poly.vertices is None else len(poly.vertices)
    p = tree.p_leaf
    for k, z in enumerate(dens):
        label = f"vertex[{k}]" if k < n_vert else f"mixture[{k - n_vert}]"
        try:
            uq = complete_value(MeasureQ(z, p), U, x)
        except NoFiniteEntropy:
            uq = INF
            rep.notes.append(f"{label}: v_Q infinite, u_Q = +inf")
        rep.add(label, primal_value - uq)
    return rep


def check_supermartingale(tree: ScenarioTree, H, vertex_set, x: float = 0.0, *,
                          wealth=None, seed: int = 42, tol: float = DEFAULT_TOL) -> CheckReport:
    """``E_Q[X_{t+1} | node] - X_t <= tol`` at every charged internal node.

    ``vertex_set`` is a polytope (vertices plus mixtures are used) or an
    array of densities.  Pass ``wealth`` (one value per node) to test a wealth
    process directly instead of the one generated by ``H``.
    """
    rep = CheckReport("supermartingale", tol)
    if isinstance(vertex_set, MartingalePolytope):
        dens = measure_sample(vertex_set, seed)
    else:
        dens = np.atleast_2d(np.asarray(vertex_set, dtype=float))
    X = np.asarray(wealth, dtype=float) if wealth is not None else wealth_process(tree, H, x)
    if X.shape != (tree.n_nodes,):
        raise ValueError(f"wealth must have one value per node ({tree.n_nodes})")
    res = supermartingale_residuals(tree, X, dens)
    for r, z in enumerate(dens):
        m = tree.node_masses(z)
        for k, a in enumerate(tree.internal):
            if m[a] > 0:
                rep.add(f"Q[{r}]@{tree.ids[a] if tree.ids else a}", res[r, k])
    return rep


def check_inada_growth(Q: MeasureQ, U: UtilityFunction, x0: float = 1.0, doublings: int = 30,
                       tol: float = 1e-10) -> CheckReport:
    """Decay of ``u_Q(x)/x`` along ``x0 2^k`` and finiteness of ``v_Q`` as ``y -> 0``.

    Rows: finiteness of ``v_Q(2^-40)`` (0 or inf), increases of the
    ratio once it is positive, and ``decay`` = final ratio minus half the
    first positive ratio.  The two sides should agree; the limit itself is not
    decidable from a finite grid, so this verdict is a heuristic.
    """
    rep = CheckReport("inada_growth", tol)
    xs = x0 * 2.0 ** np.arange(doublings + 1)
    ratios = []
    for xk in xs:
        if xk >= U.x_bliss:
            ratios.append(float(U.sup_value) / xk)
            continue
        try:
            ratios.append(complete_value(Q, U, float(xk)) / xk)
        except NoFiniteEntropy:
            ratios.append(INF)
    ratios = np.asarray(ratios)
    # lim u_Q(x)/x = inf{y : v_Q(y) < inf}: only finiteness as y -> 0 matters
    finite = []
    for j in range(0, 41, 4):
        v = float(np.dot(Q.p, U.conjugate(2.0 ** -j * Q.density)))
        finite.append(math.isfinite(v))
    rep.add("v_Q(2^-40)", 0.0 if finite[-1] else INF)
    if not all(finite):
        first = 4 * finite.index(True) if any(finite) else None
        rep.notes.append(f"v_Q finite from y = 2^-{first}" if first is not None
                         else "v_Q infinite on the whole y-grid")
    pos = np.flatnonzero(ratios > 0)
    if pos.size == 0 or not np.isfinite(ratios).all():
        rep.add("decay", INF)
        rep.notes.append("ratio never positive or infinite")
        return rep
    r = ratios[pos[0]:]
    for k in range(r.size - 1):
        rep.add(f"ratio[{pos[0] + k + 1}]", max(0.0, r[k + 1] - r[k]))
    rep.add("decay", max(0.0, r[-1] - 0.5 * r[0]))
    rep.notes.append(f"u_Q(x)/x: first {r[0]:.6g}, last {r[-1]:.6g} at x = {xs[-1]:.6g}")
    return rep


def check_satiation_gap(Q: MeasureQ, U: UtilityFunction, x_grid) -> CheckReport:
    """``u_Q(x) < U(+inf)`` exactly when ``x < x_bliss``.

    ``u_Q(x) < U(+inf)`` is read off ``y_hat > 0`` or a positive margin,
    which survives rounding of ``u_Q`` near ``U(+inf)``.  The margin
    ``U(+inf) - u_Q(x)`` is listed in the notes.
    """
    rep = CheckReport("satiation_gap", 0.0)
    sup = float(U.sup_value)
    for x in np.atleast_1d(np.asarray(x_grid, dtype=float)):
        if not x > U.x_lo:
            rep.notes.append(f"x = {x:g} outside the domain, skipped")
            continue
        sol = solve_complete(Q, U, float(x))
        below_sup = sol.y_hat > 0 or sol.value < sup
        ok = below_sup == (x < U.x_bliss)
        rep.add(f"x={x:.15g}", 0.0 if ok else 1.0)
        rep.notes.append(f"x = {x:.15g}: margin U(+inf) - u_Q = {sup - sol.value:.6g}")
    return rep


def check_entropy_mixture(Q1: MeasureQ, Q2: MeasureQ, y1: float, y2: float, lam: float,
                          U: UtilityFunction, tol: float = 1e-10) -> CheckReport:
    """Mixture inequality for the generalised entropy; residual ``lhs - rhs``."""
    rep = CheckReport("entropy_mixture", tol)
    lhs, rhs = mixture_bound(Q1, Q2, y1, y2, lam, U)
    if rhs == INF:
        res = -INF
    elif lhs == INF:
        res = INF
    else:
        res = lhs - rhs
    rep.add(f"lam={lam:.15g}", res)
    rep.notes.append(f"lhs = {lhs:.15g}, rhs = {rhs:.15g}")
    return rep


def check_satiation_set(primal: PrimalSolution, dual: DualSolution, U: UtilityFunction,
                        p=None) -> CheckReport:
    """``{f > x_bliss}`` inside ``{dQ/dP = 0}`` and ``{dQ/dP = 0}`` inside ``{f >= x_bliss}``.

    Boundary mass ``P{f = x_bliss, dQ/dP > 0}`` is noted but never fails.
    """
    f = np.asarray(primal.f_hat, dtype=float)
    p = np.full(f.size, 1.0 / f.size) if p is None else np.asarray(p, dtype=float)
    rep = CheckReport("satiation_set", 0.0)
    if primal.satiated or dual.y_hat == 0:
        rep.notes.append("SATIATED regime: identity not applicable")
        return rep
    sat = satiation_report(U, f, dual.q_hat, p)
    bad_up, bad_down = set(sat.above_but_charged.tolist()), set(sat.zero_but_below.tolist())
    for i in range(f.size):
        rep.add(f"leaf[{i}]", 1.0 if (i in bad_up or i in bad_down) else 0.0)
    if sat.boundary_leaves.size:
        rep.notes.append(f"boundary mass {sat.boundary_mass:.15g} on leaves "
                         f"{sat.boundary_leaves.tolist()} (f = x_bliss with positive density)")
    return rep


def certificate_reports(cert: DualityCertificate) -> list[CheckReport]:
    """The certificate fields as individual reports."""
    t = cert.tol
    out = []
    gap = CheckReport("duality_gap", 1e-6)
    gap.add("relative", abs(cert.relative_gap))
    gap.notes.append(f"signed gap {cert.gap:.15g}")
    out.append(gap)
    fen = CheckReport("fenchel", t)
    for i, r in enumerate(cert.fenchel):
        fen.add(f"leaf[{i}]", abs(r))
    out.append(fen)
    bud = CheckReport("budget", t)
    bud.add("Q_hat", abs(cert.budget_residual))
    out.append(bud)
    vb = CheckReport("vertex_budget", t)
    for k, s in enumerate(cert.vertex_slacks):
        vb.add(f"vertex[{k}]", -s)
    out.append(vb)
    sg = CheckReport("supergradient", t)
    for i, r in enumerate(cert.supergradient):
        sg.add(f"leaf[{i}]", r)
    out.append(sg)
    dc = CheckReport("dual_consistent", 0.0)
    dc.add("warm_vs_cold", 0.0 if cert.dual_consistent else 1.0)
    out.append(dc)
    if cert.notes:
        out[0].notes.extend(cert.notes)
    return out
