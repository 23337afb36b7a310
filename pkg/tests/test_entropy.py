import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utilmax.market import MeasureQ, generalized_entropy, kl_divergence, mixture_bound
from utilmax.utility import Exponential, Quadratic, ShiftedLog, TruncatedLinear

P = np.array([0.5, 0.5])
Q13 = MeasureQ.from_probs([1 / 3, 2 / 3], P)


def test_kl_binomial():
    want = (1 / 3) * math.log(2 / 3) + (2 / 3) * math.log(4 / 3)
    assert kl_divergence(Q13) == pytest.approx(want, abs=1e-15)
    assert kl_divergence(Q13) == pytest.approx(0.056633, abs=5e-7)


def test_entropy_at_reference_measure_is_zero():
    assert generalized_entropy(MeasureQ.reference(P), Exponential(1.0), 1.0) == 0.0


def test_entropy_binomial_direct_sum():
    y = 0.944941
    z = y * Q13.density
    want = float(np.sum(P * (z * np.log(z) - z + 1)))
    got = generalized_entropy(Q13, Exponential(1.0), y)
    assert got == pytest.approx(want, abs=1e-15)
    assert got == pytest.approx(0.055059, abs=5e-7)


def test_zero_density_with_infinite_conjugate_at_zero():
    Q = MeasureQ(np.array([0.0, 2.0]), P)
    assert generalized_entropy(Q, ShiftedLog(1.0), 1.0) == math.inf
    assert math.isfinite(generalized_entropy(Q, Exponential(1.0), 1.0))


def _pairs():
    dens = st.lists(st.floats(0.05, 1.0), min_size=3, max_size=3)
    return st.tuples(dens, dens, st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0, 1))


@settings(max_examples=150, deadline=None)
@given(_pairs(), st.sampled_from([Exponential(1.0), Quadratic(), TruncatedLinear(1.0),
                                  ShiftedLog(1.0)]))
def test_mixture_inequality(tup, U):
    a, b, y1, y2, lam = tup
    p = np.full(3, 1 / 3)
    Q1 = MeasureQ.from_probs(np.asarray(a) / sum(a), p)
    Q2 = MeasureQ.from_probs(np.asarray(b) / sum(b), p)
    lhs, rhs = mixture_bound(Q1, Q2, y1, y2, lam, U)
    if math.isfinite(rhs):
        assert lhs <= rhs + 1e-10


def test_mixture_degenerate_cases():
    U = Exponential(1.0)
    lhs, rhs = mixture_bound(Q13, Q13, 0.7, 0.7, 0.4, U)
    assert lhs == pytest.approx(rhs, abs=1e-14)
    Q2 = MeasureQ.from_probs([0.2, 0.8], P)
    lhs, rhs = mixture_bound(Q13, Q2, 0.5, 2.0, 1.0, U)
    assert lhs == pytest.approx(generalized_entropy(Q13, U, 0.5))
    assert rhs == pytest.approx(lhs)


def test_entropy_convex_in_y(rng):
    U = Exponential(1.0)
    for _ in range(50):
        y1, y2 = rng.uniform(0.05, 4, 2)
        t = rng.uniform()
        mid = generalized_entropy(Q13, U, t * y1 + (1 - t) * y2)
        assert mid <= t * generalized_entropy(Q13, U, y1) + (1 - t) * generalized_entropy(
            Q13, U, y2) + 1e-12
