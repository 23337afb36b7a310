"""Pure numpy implementations of the path-sample kernels."""
import numpy as np

POWER, COSH, EXPABS, INDICATOR = 0, 1, 2, 3


def maximal_paths(paths):
    """Running ``S*_t = sum_i max_{s<=t} |S^i_s|`` for paths of shape (n, T+1, d)."""
    return np.maximum.accumulate(np.abs(paths), axis=1).sum(axis=2)


def integral_maximal(increments, weights):
    """``(phi . S)*_T = sum_i max_t |sum_{s<=t} phi_s dS^i_s|`` per path."""
    cum = np.cumsum(weights[:, :, None] * increments, axis=1)
    return np.abs(cum).max(axis=1).sum(axis=1)


def young_mean(code, param, values, weights, scale):
    """``sum_k w_k Psi(values_k / scale)`` for a built-in Young function."""
    a = np.abs(values) * (1.0 / scale)
    with np.errstate(over="ignore"):
        if code == POWER:
            psi = a**param
        elif code == COSH:
            psi = np.cosh(param * a) - 1.0
        elif code == EXPABS:
            psi = np.expm1(param * a)
        else:
            psi = np.where(a <= 1.0, 0.0, np.inf)
    mask = weights != 0
    return float(np.dot(weights[mask], psi[mask]))
