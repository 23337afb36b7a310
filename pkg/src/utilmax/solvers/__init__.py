"""Primal, dual and complete-market solvers with optimality certificates."""
from .approx import (ApproxReport, SampledMarket, approx_sequence, oracle_strategy,
                     sampled_market)
from .certificate import (DualityCertificate, SatiationReport, duality_certificate,
                          satiation_report, supermartingale_residuals)
from .common import (ArbitrageError, CompleteSolution, ConvergenceError, DualInfeasible,
                     DualSolution, NoFiniteEntropy, PrimalSolution, PrimalUnbounded, SolverError,
                     Tolerances)
from .complete import dual_objective, solve_complete
from .dual import dual_value, solve_dual
from .primal import arbitrage_ray, primal_gradient, primal_objective, solve_primal
from .recover import Replication, recover_strategy

__all__ = [
    "solve_complete", "solve_primal", "solve_dual", "recover_strategy", "duality_certificate",
    "approx_sequence", "sampled_market", "oracle_strategy", "SampledMarket", "ApproxReport",
    "DualityCertificate", "SatiationReport", "satiation_report", "supermartingale_residuals",
    "CompleteSolution", "PrimalSolution", "DualSolution", "Replication", "Tolerances",
    "SolverError", "ArbitrageError", "PrimalUnbounded", "NoFiniteEntropy", "ConvergenceError",
    "DualInfeasible", "dual_objective", "dual_value", "primal_objective", "primal_gradient",
    "arbitrage_ray", "solve",
]


def solve(tree, U, x, tol: Tolerances | None = None):
    """Primal, warm/cold dual and certificate for one instance."""
    from ..market.polytope import martingale_polytope

    tol = tol or Tolerances()
    poly = martingale_polytope(tree)
    primal = solve_primal(tree, U, x, tol)
    dual = solve_dual(tree, U, x, primal=primal, poly=poly, tol=tol)
    cert = duality_certificate(tree, U, x, primal, dual, poly)
    return primal, dual, cert
