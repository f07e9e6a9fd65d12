import math

import numpy as np
import pytest
from scipy import integrate

from syncprob.errors import InvalidParameterError
from syncprob.special import gamma_p_ladder, regularized_gamma_p, regularized_gamma_q


def test_p_one_ln2_is_half():
    assert abs(regularized_gamma_p(1.0, math.log(2.0)) - 0.5) < 1e-12


@pytest.mark.parametrize("s", [0.5, 1.0, 3.0, 12.5])
def test_edges(s):
    assert regularized_gamma_p(s, 0.0) == 0.0
    assert regularized_gamma_p(s, math.inf) == 1.0
    assert regularized_gamma_q(s, 0.0) == 1.0


def _quad_p(s, x):
    val, _ = integrate.quad(lambda t: t ** (s - 1) * math.exp(-t), 0.0, x, epsabs=1e-15, epsrel=1e-13, limit=200)
    return val / math.gamma(s)


def test_matches_quadrature_on_random_pairs():
    rng = np.random.default_rng(3)
    for s, x in zip(rng.uniform(0.5, 20.0, 20), rng.uniform(0.01, 40.0, 20)):
        assert abs(regularized_gamma_p(s, x) - _quad_p(s, x)) < 1e-10, (s, x)


def test_p_plus_q_is_one():
    for s, x in [(0.5, 0.1), (2.0, 2.9), (2.0, 3.1), (40.0, 35.0), (40.0, 60.0)]:
        assert abs(regularized_gamma_p(s, x) + regularized_gamma_q(s, x) - 1.0) < 1e-14


def test_integer_shape_closed_form():
    # P(n, x) = 1 - e^{-x} sum_{k<n} x^k / k!
    for n in (1, 2, 5, 9):
        for x in (0.3, 4.0, 15.0):
            ref = 1.0 - math.exp(-x) * sum(x**k / math.factorial(k) for k in range(n))
            assert abs(regularized_gamma_p(n, x) - ref) < 1e-13


@pytest.mark.parametrize("s,x,count", [(1.0, 3.0, 50), (2.5, 40.0, 200), (0.5, 1e-3, 10), (1.0, 400.0, 30)])
def test_ladder_matches_pointwise(s, x, count):
    lad = gamma_p_ladder(s, x, count)
    ref = np.array([regularized_gamma_p(s + j, x) for j in range(count)])
    assert np.max(np.abs(lad - ref)) < 1e-12
    assert np.all(np.diff(lad) <= 1e-15)


def test_ladder_degenerate():
    assert gamma_p_ladder(1.0, 2.0, 0).size == 0
    assert np.all(gamma_p_ladder(1.0, 0.0, 5) == 0.0)


@pytest.mark.parametrize("s,x", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.1), (1.0, math.nan)])
def test_domain_errors(s, x):
    with pytest.raises(InvalidParameterError):
        regularized_gamma_p(s, x)
