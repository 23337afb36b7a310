import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utilmax.orlicz import (Distribution, cosh_young, heart_membership, induce_young,
                            indicator_young, luxemburg_norm, power_young, young_dominates)
from utilmax.utility import Exponential, ShiftedLog, TruncatedLinear

PSIS = [power_young(2.0), power_young(1.0), cosh_young()]


def test_induced_young_of_exponential():
    psi = induce_young(Exponential(1.0))
    xs = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    np.testing.assert_allclose(psi(xs), np.expm1(np.abs(xs)))


def test_induced_young_has_radius_for_half_line_utility():
    psi = induce_young(ShiftedLog(1.0))
    assert psi.radius == 1.0
    assert psi(0.5) == pytest.approx(-math.log(0.5))
    assert psi(1.5) == math.inf


def test_truncated_linear_needs_positive_bliss():
    with pytest.raises(ValueError):
        TruncatedLinear(-0.5)


class _Raised(Exponential):
    """Exponential utility moved up by one, so U(0) = 1."""

    def _value(self, x):
        return super()._value(x) + 1.0


def test_induced_young_needs_normalised_utility():
    assert float(_Raised(1.0)(0.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        induce_young(_Raised(1.0))


def test_cosh_gauge_of_constant():
    # E[cosh(1/k) - 1] = 1  <=>  k = 1 / arccosh(2)
    N = luxemburg_norm(cosh_young(), np.ones(4))
    assert N == pytest.approx(1.0 / math.acosh(2.0), rel=1e-11)


def test_power_gauge_is_lp_norm():
    x = np.array([1.0, -2.0, 3.0])
    w = np.array([0.2, 0.3, 0.5])
    N = luxemburg_norm(power_young(2.0), x, w)
    assert N == pytest.approx(math.sqrt(np.dot(w, x**2)), rel=1e-11)


def test_indicator_gauge_is_sup_norm():
    N = luxemburg_norm(indicator_young(), np.array([0.5, -3.0, 2.0]))
    assert N == pytest.approx(3.0, rel=1e-11)


def test_zero_sample_has_zero_norm():
    assert luxemburg_norm(power_young(2.0), np.zeros(5)) == 0.0


@pytest.mark.parametrize("psi", PSIS, ids=str)
def test_gauge_contract_and_homogeneity(psi, rng):
    for _ in range(20):
        x = rng.standard_normal(50) * rng.uniform(0.1, 5)
        w = rng.dirichlet(np.ones(50))
        N = luxemburg_norm(psi, x, w)
        assert psi.mean(x, w, N) <= 1.0
        assert psi.mean(x, w, N * (1 - 1e-9)) > 1.0
        for c in (8.0, 10.0, 0.3):
            assert luxemburg_norm(psi, c * x, w) == pytest.approx(c * N, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30), st.sampled_from(PSIS))
def test_gauge_is_feasible(xs, psi):
    x = np.asarray(xs)
    N = luxemburg_norm(psi, x)
    if N > 0:
        assert psi.mean(x, np.full(x.size, 1 / x.size), N) <= 1.0


def test_triangle_inequality(rng):
    psi = cosh_young()
    for _ in range(20):
        x, y = rng.standard_normal((2, 40))
        assert luxemburg_norm(psi, x + y) <= luxemburg_norm(psi, x) + luxemburg_norm(psi, y) + 1e-12


def test_heart_membership_gaussian_in_exponential_heart():
    rep = heart_membership(induce_young(Exponential(1.0)), Distribution.gaussian())
    assert rep.classification == "heart"
    assert rep.analytic_agrees


def test_heart_membership_exponential_law_is_space_only():
    rep = heart_membership(cosh_young(), Distribution.exponential(2.0))
    assert rep.classification == "space-only"
    np.testing.assert_array_equal(rep.finite, rep.c_grid < 2.0)
    # E[cosh(cX) - 1] for X ~ Exp(2) equals c^2 / (4 - c^2)
    c = 1.0
    i = list(rep.c_grid).index(c)
    assert rep.values[i] == pytest.approx(c**2 / (4 - c**2), rel=1e-8)


def test_heart_membership_pareto_outside_exponential_space():
    rep = heart_membership(cosh_young(), Distribution.pareto(3.0))
    assert rep.classification == "outside"
    rep = heart_membership(power_young(2.0), Distribution.pareto(3.0))
    assert rep.classification == "heart"


def test_domination_between_exponential_types_is_symmetric():
    a, b = induce_young(Exponential(1.0)), cosh_young()
    ab, ba = young_dominates(a, b), young_dominates(b, a)
    assert ab.dominates and ba.dominates and ab.heuristic
    assert ab.lam == 1.0


def test_power_does_not_dominate_exponential():
    assert not young_dominates(power_young(2.0), cosh_young()).dominates
    assert young_dominates(cosh_young(), power_young(2.0)).dominates
