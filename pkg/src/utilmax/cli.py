"""Command-line interface.

Exit codes: 0 every check passed, 1 a check failed, 2 input error,
3 arbitrage (no martingale measure, or an arbitrage ray).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .market.levy import levy_moment_check
from .market.localize import LocalizationError, compound_poisson_paths, level_sets, sigma_localize
from .market.polytope import MeasureQ, is_martingale_measure, martingale_polytope
from .market.entropy import generalized_entropy, kl_divergence
from .market.tree import MarketError, ScenarioTree, binomial, trinomial
from .orlicz import (GaugeBracketError, cosh_young, indicator_young, induce_young,
                     luxemburg_norm, power_young)
from .solvers import (ArbitrageError, DualSolution, PrimalSolution, PrimalUnbounded, SolverError,
                      Tolerances, duality_certificate, solve_dual, solve_primal)
from .utility import DomainError, parse_utility
from . import verify as vf

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_ARBITRAGE = 0, 1, 2, 3
DIGITS = 15
BUILTIN = {"binomial": binomial, "trinomial": trinomial}


class InputError(Exception):
    """Bad user input; reported with exit code 2."""


@dataclass
class RunConfig:
    command: str
    market: str | None
    utility: str
    wealth: float
    tol: float
    seed: int
    out: str | None
    format: str

    def __post_init__(self):
        if not self.tol > 0:
            raise InputError("--tol must be positive")

    @property
    def tolerances(self) -> Tolerances:
        return Tolerances(value_abs=self.tol, value_rel=self.tol)


# ---------------------------------------------------------------------------
# input / output helpers


def _round(obj):
    """Floats to 15 significant digits; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.{DIGITS}g}")
    return obj


def dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2) + "\n"


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.{DIGITS}g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def load_market(spec: str | None) -> ScenarioTree:
    if not spec:
        raise InputError("--market is required")
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN:
            raise InputError(f"unknown builtin market {name!r}; choose from {sorted(BUILTIN)}")
        return BUILTIN[name]()
    try:
        return ScenarioTree.load(spec)
    except OSError as exc:
        raise InputError(f"cannot read market file {spec!r}: {exc.strerror}") from None


def parse_young(spec: str):
    family, _, rest = spec.partition(":")
    if family == "power":
        p = float(rest.partition("=")[2]) if rest else 2.0
        return power_young(p)
    if family == "abs":
        return power_young(1.0)
    if family == "cosh":
        return cosh_young()
    if family == "indicator":
        return indicator_young()
    if family == "utility":
        return induce_young(parse_utility(rest))
    raise InputError(f"unknown Young function {spec!r} (power:p=.., abs, cosh, indicator, "
                     "utility:<spec>)")


def _floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise InputError(f"malformed {what} {text!r}") from None


def _read_table(path: str, what: str) -> np.ndarray:
    try:
        with open(path) as fh:
            lines = [ln.split("#", 1)[0].strip() for ln in fh]
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path!r}: {exc.strerror}") from None
    rows = []
    for k, ln in enumerate(lines, 1):
        if not ln:
            continue
        parts = ln.replace(",", " ").replace(";", " ").split()
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise InputError(f"{path}: line {k}: non-numeric value") from None
    if not rows:
        raise InputError(f"{path}: no data")
    if len({len(r) for r in rows}) != 1:
        raise InputError(f"{path}: records have different lengths")
    return np.asarray(rows)


# ---------------------------------------------------------------------------
# subcommands


def _solve_report(cfg: RunConfig, tree: ScenarioTree):
    U = parse_utility(cfg.utility)
    x = cfg.wealth
    poly = martingale_polytope(tree)
    if poly.empty:
        raise ArbitrageError("; ".join(poly.diagnostics) or "no martingale measure")
    primal = solve_primal(tree, U, x, cfg.tolerances)
    dual = solve_dual(tree, U, x, primal=primal, poly=poly, tol=cfg.tolerances)
    cert = duality_certificate(tree, U, x, primal, dual, poly)
    report = {
        "command": "solve", "utility": U.spec(), "wealth": x,
        "value": primal.value, "dual_value": dual.value, "y_hat": dual.y_hat,
        "q_hat": dual.q_hat, "q_probs": dual.q_hat * tree.p_leaf, "Z": dual.Z,
        "f_hat": primal.f_hat, "H": primal.H,
        "satiated": primal.satiated,
        "primal": {k: v for k, v in primal.to_dict().items() if k not in ("H", "f_hat")},
        "dual": {k: v for k, v in dual.to_dict().items() if k not in ("q_hat", "Z")},
        "certificate": cert.to_dict(), "market": tree.to_dict(),
    }
    return report, cert


def run_solve(cfg: RunConfig) -> int:
    tree = load_market(cfg.market)
    report, cert = _solve_report(cfg, tree)
    if cfg.format == "csv":
        rows = [(i, float(p), float(f), float(q), float(z)) for i, (p, f, q, z) in enumerate(
            zip(tree.p_leaf, report["f_hat"], report["q_hat"], report["Z"]))]
        _emit(cfg, _csv(["leaf", "p", "f_hat", "q_hat", "Z"], rows))
    else:
        _emit(cfg, dumps(report))
    return EXIT_OK if cert.passed else EXIT_FAIL


def run_dual(cfg: RunConfig) -> int:
    tree = load_market(cfg.market)
    U = parse_utility(cfg.utility)
    dual = solve_dual(tree, U, cfg.wealth, tol=cfg.tolerances)
    if cfg.format == "csv":
        rows = [(i, float(q), float(z)) for i, (q, z) in enumerate(zip(dual.q_hat, dual.Z))]
        _emit(cfg, _csv(["leaf", "q_hat", "Z"], rows))
    else:
        _emit(cfg, dumps({"command": "dual", "utility": U.spec(), "wealth": cfg.wealth,
                          **dual.to_dict()}))
    return EXIT_OK if dual.consistent else EXIT_FAIL


def _load_report(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read report {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"report {path!r} is not valid JSON (line {exc.lineno})") from None
    missing = [k for k in ("market", "utility", "wealth", "value", "y_hat", "q_hat", "Z",
                           "f_hat", "H") if k not in data]
    if missing:
        raise InputError(f"report {path!r} lacks fields {missing}")
    return data


def _num(v) -> float:
    return float(v)  # also parses "inf" strings written for non-finite values


def run_verify(cfg: RunConfig, report_path: str | None) -> int:
    if report_path:
        data = _load_report(report_path)
        try:
            tree = ScenarioTree.from_nodes(data["market"]["nodes"], data["market"].get("assets"),
                                           data["market"].get("horizon"))
        except (KeyError, TypeError) as exc:
            raise InputError(f"report market section malformed: {exc}") from None
    elif cfg.market:
        tree = load_market(cfg.market)
        data, _ = _solve_report(cfg, tree)
        data = json.loads(dumps(data))
    else:
        raise InputError("verify needs --report or --market")
    U = parse_utility(data["utility"])
    x = _num(data["wealth"])
    arr = lambda k: np.asarray([_num(v) for v in np.ravel(data[k])], dtype=float)  # noqa: E731
    H = arr("H").reshape(tree.n_nodes, tree.d)
    f_hat, q_hat, Z = arr("f_hat"), arr("q_hat"), arr("Z")
    n = tree.leaves.size
    if not (f_hat.size == q_hat.size == Z.size == n):
        raise InputError(f"report vectors must have one entry per leaf ({n})")
    satiated = bool(data.get("satiated", False))
    primal = PrimalSolution(H, f_hat, _num(data["value"]), x, satiated=satiated)
    dual = DualSolution(_num(data["y_hat"]), q_hat, Z, _num(data.get("dual_value", data["value"])),
                        x, consistent=bool(data.get("dual", {}).get("consistent", True)))
    poly = martingale_polytope(tree)
    if poly.empty:
        raise ArbitrageError("; ".join(poly.diagnostics) or "no martingale measure")
    reports = []
    notes = []
    Qh = MeasureQ(q_hat, tree.p_leaf)
    if satiated or x >= U.x_bliss:
        notes.append("SATIATED: x >= satiation point; degenerate-regime checks only")
    else:
        cert = duality_certificate(tree, U, x, primal, dual, poly)
        reports.extend(vf.certificate_reports(cert))
        reports.append(vf.check_satiation_set(primal, dual, U, tree.p_leaf))
        try:
            reports.append(vf.check_inada_growth(Qh, U, x0=max(1.0, abs(x))))
        except SolverError as exc:
            notes.append(f"inada_growth skipped: {exc}")
        reports.append(_mixture_report(tree, U, poly, cfg.seed))
    reports.append(vf.check_value_chain(tree, U, x, primal_value=primal.value, poly=poly,
                                        seed=cfg.seed))
    reports.append(vf.check_supermartingale(tree, H, poly, x, seed=cfg.seed))
    try:
        reports.append(vf.check_satiation_gap(Qh, U, [x]))
    except SolverError as exc:
        notes.append(f"satiation_gap skipped: {exc}")
    passed = all(r.passed for r in reports)
    if cfg.format == "csv":
        _emit(cfg, vf.reports_to_csv(reports))
    else:
        _emit(cfg, dumps({"command": "verify", "passed": passed, "notes": notes,
                          "reports": [r.to_dict() for r in reports]}))
    return EXIT_OK if passed else EXIT_FAIL


def _mixture_report(tree, U, poly, seed, count: int = 8) -> vf.CheckReport:
    """Mixture inequality on seeded tuples drawn from the test measures."""
    rng = np.random.default_rng(seed)
    dens = vf.measure_sample(poly, seed)
    rep = vf.CheckReport("entropy_mixture", 1e-10)
    p = tree.p_leaf
    for k in range(count):
        i, j = rng.integers(len(dens), size=2)
        y1, y2 = np.exp(rng.uniform(-2, 2, size=2))
        lam = float(rng.uniform())
        sub = vf.check_entropy_mixture(MeasureQ(dens[i], p), MeasureQ(dens[j], p), y1, y2, lam, U)
        rep.add(f"tuple[{k}]", sub.rows[0][1])
    return rep


def run_polytope(cfg: RunConfig) -> int:
    tree = load_market(cfg.market)
    poly = martingale_polytope(tree)
    if cfg.format == "csv":
        verts = poly.vertices if poly.vertices is not None else np.empty((0, tree.leaves.size))
        rows = [(k, *map(float, v)) for k, v in enumerate(verts)]
        _emit(cfg, _csv(["vertex"] + [f"leaf{i}" for i in range(tree.leaves.size)], rows))
    else:
        _emit(cfg, dumps({"command": "polytope", **poly.to_dict()}))
    if poly.empty:
        sys.stderr.write(("; ".join(poly.diagnostics) or "arbitrage: empty polytope") + "\n")
        return EXIT_ARBITRAGE
    return EXIT_OK


def run_entropy(cfg: RunConfig, q: str | None, y: float) -> int:
    tree = load_market(cfg.market)
    U = parse_utility(cfg.utility)
    p = tree.p_leaf
    if q:
        probs = _floats(q, "--q")
        if probs.size != p.size:
            raise InputError(f"--q needs {p.size} probabilities")
        if probs.min() < 0 or abs(probs.sum() - 1) > 1e-9:
            raise InputError("--q must be a probability vector")
        measures = [probs / p]
    else:
        poly = martingale_polytope(tree)
        if poly.empty:
            raise ArbitrageError("no martingale measure")
        measures = list(vf.measure_sample(poly, cfg.seed, mixtures=0))
    rows = []
    for k, z in enumerate(measures):
        Q = MeasureQ(z, p)
        rows.append({"measure": k, "q": Q.probs, "martingale": is_martingale_measure(tree, Q).is_member,
                     "kl": kl_divergence(Q), "v_Q": generalized_entropy(Q, U, y), "y": y})
    if cfg.format == "csv":
        _emit(cfg, _csv(["measure", "martingale", "kl", "v_Q", "y"],
                        [(r["measure"], int(r["martingale"]), r["kl"], r["v_Q"], y) for r in rows]))
    else:
        _emit(cfg, dumps({"command": "entropy", "utility": U.spec(), "measures": rows}))
    return EXIT_OK


def run_norm(cfg: RunConfig, samples: str | None, young: str) -> int:
    if not samples:
        raise InputError("norm needs --samples")
    tab = _read_table(samples, "sample")
    if tab.shape[1] > 2:
        raise InputError(f"{samples}: expected 'value[, weight]' per line")
    values = tab[:, 0]
    weights = tab[:, 1] if tab.shape[1] == 2 else None
    psi = parse_young(young)
    try:
        N = luxemburg_norm(psi, values, weights)
    except GaugeBracketError as exc:
        raise InputError(str(exc)) from None
    w = np.full(values.size, 1.0 / values.size) if weights is None else weights
    contract = psi.mean(values, w, N) if N > 0 else 0.0
    out = {"command": "norm", "young": psi.label, "norm": N, "mean_at_norm": contract,
           "samples": int(values.size)}
    if cfg.format == "csv":
        _emit(cfg, _csv(["young", "norm", "mean_at_norm"], [(psi.label, N, float(contract))]))
    else:
        _emit(cfg, dumps(out))
    return EXIT_OK if contract <= 1.0 else EXIT_FAIL


def run_localize(cfg: RunConfig, paths_file: str | None, young: str, levels: str,
                 n_paths: int) -> int:
    weights = None
    if paths_file:
        tab = _read_table(paths_file, "path")
        if tab.shape[1] < 3:
            raise InputError(f"{paths_file}: need 'weight, S_0, ..., S_T' per record")
        weights, paths = tab[:, 0], tab[:, 1:, None]
    else:
        paths = compound_poisson_paths(n_paths, seed=cfg.seed)
    psi = parse_young(young)
    lv = _floats(levels, "--levels")
    sets = level_sets(paths, lv)
    try:
        cert = sigma_localize(paths, psi, sets, weights)
    except LocalizationError as exc:
        sys.stderr.write(f"localize: {exc}\n")
        return EXIT_FAIL
    out = {"command": "localize", "young": psi.label, "levels": lv, "paths": int(len(paths)),
           "ok": cert.ok, **cert.summary()}
    if cfg.format == "csv":
        rows = [(n, float(c), float(b), float(d)) for n, (c, b, d) in
                enumerate(zip(cert.c, cert.b, cert.d[:len(cert.c)]))]
        _emit(cfg, _csv(["set", "c", "b", "d"], rows))
    else:
        _emit(cfg, dumps(out))
    return EXIT_OK if cert.ok else EXIT_FAIL


def run_levy(cfg: RunConfig, family: str, params: str, criterion: str, order: float) -> int:
    kw = {}
    for item in filter(None, (s.strip() for s in params.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise InputError(f"malformed --params item {item!r}")
        try:
            kw[key.strip()] = float(val)
        except ValueError:
            raise InputError(f"malformed --params value {item!r}") from None
    rep = levy_moment_check(family, kw, criterion, order)
    if cfg.format == "csv":
        _emit(cfg, _csv(["family", "criterion", "order", "finite", "integral"],
                        [(family, criterion, float(order), int(rep.finite), float(rep.integral))]))
    else:
        _emit(cfg, dumps({"command": "levy-check", "params": kw, **rep.to_dict()}))
    return EXIT_OK


def curve_grid(spec: str) -> np.ndarray:
    """``start:stop:step`` inclusive of ``stop``; empty when ``start > stop``."""
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise InputError(f"--x-range must be start:stop:step, got {spec!r}") from None
    if not step > 0:
        raise InputError("--x-range step must be positive")
    if start > stop:
        return np.empty(0)
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def run_curves(cfg: RunConfig, x_range: str) -> int:
    xs = curve_grid(x_range)
    header = ["x", "u_primal", "u_dual", "y_hat", "gap"]
    rows, ok = [], True
    if xs.size:
        tree = load_market(cfg.market)
        U = parse_utility(cfg.utility)
        poly = martingale_polytope(tree)
        if poly.empty:
            raise ArbitrageError("no martingale measure")
        for x in xs:
            x = float(x)
            primal = solve_primal(tree, U, x, cfg.tolerances)
            dual = solve_dual(tree, U, x, primal=primal, poly=poly, tol=cfg.tolerances)
            gap = dual.value - primal.value
            ok &= abs(gap) <= 1e-6 * (1 + abs(primal.value))
            rows.append((x, primal.value, dual.value, dual.y_hat, gap))
    if cfg.format == "json":
        _emit(cfg, dumps({"command": "curves", "columns": header, "rows": rows}))
    else:
        _emit(cfg, _csv(header, rows))
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--market", help="market JSON file or builtin:binomial|builtin:trinomial")
    common.add_argument("--utility", default="exp:gamma=1", help="utility spec, e.g. exp:gamma=1")
    common.add_argument("--wealth", type=float, default=0.0, help="initial wealth x")
    common.add_argument("--tol", type=float, default=1e-8, help="value tolerance")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None)

    ap = argparse.ArgumentParser(prog="utilmax", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="primal, dual and certificate")
    sub.add_parser("dual", parents=[common], help="dual problem only (cold start)")
    v = sub.add_parser("verify", parents=[common], help="run every applicable check")
    v.add_argument("--report", help="report written by 'solve'")
    sub.add_parser("polytope", parents=[common], help="martingale polytope")
    e = sub.add_parser("entropy", parents=[common], help="KL and generalised entropy")
    e.add_argument("--q", help="comma-separated probabilities (default: polytope vertices)")
    e.add_argument("--y", type=float, default=1.0)
    n = sub.add_parser("norm", parents=[common], help="Luxemburg norm of a sample")
    n.add_argument("--samples", help="text file with 'value[, weight]' per line")
    n.add_argument("--young", default="power:p=2")
    lo = sub.add_parser("localize", parents=[common], help="localising integrand certificate")
    lo.add_argument("--paths", help="text file with 'weight, S_0, ..., S_T' per record")
    lo.add_argument("--young", default="abs")
    lo.add_argument("--levels", default="4,inf",
                    help="levels k of the nested sets {S*_(t-1) <= k}; end with inf")
    lo.add_argument("--n-paths", type=int, default=100_000)
    lv = sub.add_parser("levy-check", parents=[common], help="Lévy large-jump moment verdict")
    lv.add_argument("--family", default="double-exponential")
    lv.add_argument("--params", default="eta=2")
    lv.add_argument("--criterion", default="exp")
    lv.add_argument("--order", type=float, default=1.0)
    c = sub.add_parser("curves", parents=[common], help="value curves as CSV")
    c.add_argument("--x-range", default="0:2:0.25", help="start:stop:step")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    fmt = args.format or ("csv" if args.command == "curves" else "json")
    try:
        cfg = RunConfig(args.command, args.market, args.utility, args.wealth, args.tol,
                        args.seed, args.out, fmt)
        if args.command == "solve":
            return run_solve(cfg)
        if args.command == "dual":
            return run_dual(cfg)
        if args.command == "verify":
            return run_verify(cfg, args.report)
        if args.command == "polytope":
            return run_polytope(cfg)
        if args.command == "entropy":
            return run_entropy(cfg, args.q, args.y)
        if args.command == "norm":
            return run_norm(cfg, args.samples, args.young)
        if args.command == "localize":
            return run_localize(cfg, args.paths, args.young, args.levels, args.n_paths)
        if args.command == "levy-check":
            return run_levy(cfg, args.family, args.params, args.criterion, args.order)
        return run_curves(cfg, args.x_range)
    except (InputError, MarketError, DomainError, ValueError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except (ArbitrageError, PrimalUnbounded) as exc:
        msg = str(exc)
        sys.stderr.write(msg if msg.startswith("arbitrage") else f"arbitrage: {msg}")
        sys.stderr.write("\n")
        return EXIT_ARBITRAGE
    except SolverError as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
