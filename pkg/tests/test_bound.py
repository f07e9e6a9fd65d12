import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2

from syncprob.bound import (
    ModeWeights,
    covariance_blocks,
    error_bound_symmetric,
    moschopoulos_coefficients,
    pstab_for_network,
    pstab_lower_bound,
    sigma_for_model,
    weighted_chi2_cdf,
)
from syncprob.dynamics import MismatchDistribution
from syncprob.errors import NonUniqueManifoldError, UnstableModeError
from syncprob.msf import MsfCurve, MsfPoint
from syncprob.netgen import build_er, build_nw, build_ring
from syncprob.spectral import symmetric_eig


def _modes(k=4):
    mu = np.arange(1.0, k + 1)
    return ModeWeights.from_modes(mu, 0.3 + 0.2 * mu, 5.0 + mu**1.5)


# series


@pytest.mark.parametrize("modes", [2, 5, 20])
@pytest.mark.parametrize("x", [0.5, 3.0, 20.0])
def test_equal_weights_collapse_to_chi2(modes, x):
    val = weighted_chi2_cdf(x, [0.7] * modes, 2).value
    assert abs(val - chi2.cdf(x / 0.7, 2 * modes)) < 1e-10


def test_half_integer_dof_collapse():
    val = weighted_chi2_cdf(2.0, [0.3] * 3, 1).value
    assert abs(val - chi2.cdf(2.0 / 0.3, 3)) < 1e-10


def test_single_mode_is_gamma_cdf():
    s = weighted_chi2_cdf(1.3, [0.4], 2)
    assert abs(s.value - chi2.cdf(1.3 / 0.4, 2)) < 1e-12
    assert s.coefficients()[0] == pytest.approx(1.0)
    assert np.all(s.coefficients()[1:] == 0.0)


def test_coefficients_match_explicit_recursion():
    w = [0.2, 0.5, 0.55, 1.9, 4.0]
    for dof in (1, 2, 3):
        a = moschopoulos_coefficients(w, dof, 40)
        b = weighted_chi2_cdf(1.0, w, dof).coefficients()[:40]
        assert np.max(np.abs(a - b) / a) < 1e-10


def test_two_mode_coefficients_closed_form():
    # a_k = (n/2)_k / k! c^k with c = 1 - w1/w2.
    w1, w2, n = 1.0, 3.0, 2
    c = 1.0 - w1 / w2
    a = moschopoulos_coefficients([w1, w2], n, 10)
    ref = [math.gamma(n / 2 + k) / math.gamma(n / 2) / math.factorial(k) * c**k for k in range(10)]
    assert np.allclose(a, ref, rtol=1e-13, atol=0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_series_matches_sampling(seed):
    rng = np.random.default_rng(100 + seed)
    k = 3 + seed
    w = rng.uniform(0.2, 4.0, k)
    draws = (rng.chisquare(2, size=(1_000_000, k)) * w).sum(axis=1)
    xs = np.quantile(draws, np.linspace(0.05, 0.95, 10))
    for x in xs:
        p = (draws <= x).mean()
        se = math.sqrt(p * (1 - p) / draws.size)
        assert abs(weighted_chi2_cdf(x, w, 2).value - p) < 3 * se + 1e-12


def test_three_mode_reference_case():
    rng = np.random.default_rng(7)
    sigma = 0.1
    w = np.array([1.0, 2.0, 4.0]) * sigma**2
    draws = (rng.chisquare(2, size=(1_000_000, 3)) * w).sum(axis=1)
    eps = 0.25
    assert abs(weighted_chi2_cdf(eps**2, w, 2).value - (draws <= eps**2).mean()) < 2e-3


def test_partial_sums_monotone_and_bounded():
    s = weighted_chi2_cdf(5.0, [0.1, 0.3, 0.9, 2.0, 2.0, 7.0], 2)
    ps = s.partial_sums()
    assert np.all(np.diff(ps) >= 0)
    assert ps[-1] <= 1.0 + 1e-8
    assert s.converged and s.remainder < 1e-8
    assert s.value <= ps[-1] + s.remainder + 1e-15


def test_wide_weight_spread_converges():
    s = weighted_chi2_cdf(1.0, np.geomspace(1e-3, 1.0, 30), 2)
    assert s.converged and 0.0 <= s.value <= 1.0


# mode weights and the deterministic bound


def test_modes_sorted_by_gain():
    m = ModeWeights.from_modes([1.0, 2.0, 3.0], [1.0, 2.0, 0.5], [4.0, 2.0, 3.0])
    assert np.all(np.diff(m.gains()) >= 0)
    assert list(m.mu) == [2.0, 1.0, 3.0]
    w = m.weights(0.1)
    assert w[0] == w.min()


def test_ties_broken_by_mu():
    m = ModeWeights.from_modes([5.0, 1.0, 3.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0])
    assert list(m.mu) == [1.0, 3.0, 5.0]


def test_error_bound_examples():
    one = ModeWeights.from_modes([1.0], [1.0], [2.0])
    assert error_bound_symmetric(one, [0.1]) == pytest.approx(0.2)
    m = _modes()
    v = np.array([0.1, 0.2, 0.05, 0.3])
    assert error_bound_symmetric(m, np.zeros(4)) == 0.0
    assert error_bound_symmetric(m, 3.0 * v) == pytest.approx(3.0 * error_bound_symmetric(m, v))


def test_unstable_mode_named():
    m = ModeWeights.from_modes([1.0, 2.5], [0.5, -0.1], [2.0, 3.0])
    with pytest.raises(UnstableModeError) as info:
        error_bound_symmetric(m, [0.1, 0.1])
    assert info.value.mu == 2.5
    with pytest.raises(UnstableModeError):
        pstab_lower_bound(m, 0.1, 2, 0.4)


def test_bound_edges():
    m = _modes()
    assert pstab_lower_bound(m, 0.1, 2, 0.0).pstab_lb == 0.0
    assert pstab_lower_bound(m, 0.1, 2, 1e6).pstab_lb == pytest.approx(1.0, abs=1e-12)
    assert pstab_lower_bound(m, 0.0, 2, 0.4).pstab_lb == 1.0


def test_equal_modes_give_chi2():
    m = ModeWeights.from_modes([1.0, 2.0, 3.0], [0.5, 0.5, 0.5], [3.0, 3.0, 3.0])
    sigma, eps = 0.05, 0.6
    ref = chi2.cdf((0.5 * eps / (3.0 * sigma)) ** 2, 6)
    assert abs(pstab_lower_bound(m, sigma, 2, eps).pstab_lb - ref) < 1e-10


@settings(max_examples=40, deadline=None)
@given(
    lam=st.lists(st.floats(0.05, 3.0), min_size=2, max_size=8),
    sigma=st.floats(1e-3, 1.0),
    e1=st.floats(1e-3, 5.0),
    e2=st.floats(1e-3, 5.0),
)
def test_monotone_in_epsilon(lam, sigma, e1, e2):
    lam = np.array(lam)
    m = ModeWeights.from_modes(np.arange(1.0, lam.size + 1), lam, 1.0 + 3.0 * lam)
    lo, hi = sorted((e1, e2))
    a = pstab_lower_bound(m, sigma, 2, lo).pstab_lb
    b = pstab_lower_bound(m, sigma, 2, hi).pstab_lb
    assert 0.0 <= a <= b + 1e-12
    assert b <= 1.0


@settings(max_examples=40, deadline=None)
@given(
    lam=st.lists(st.floats(0.05, 3.0), min_size=2, max_size=8),
    s1=st.floats(1e-3, 1.0),
    s2=st.floats(1e-3, 1.0),
    eps=st.floats(1e-2, 3.0),
)
def test_monotone_in_sigma(lam, s1, s2, eps):
    lam = np.array(lam)
    m = ModeWeights.from_modes(np.arange(1.0, lam.size + 1), lam, 2.0 + lam)
    lo, hi = sorted((s1, s2))
    assert pstab_lower_bound(m, hi, 2, eps).pstab_lb <= pstab_lower_bound(m, lo, 2, eps).pstab_lb + 1e-12


# covariance and sigma


def test_ring_blocks_uncorrelated(vdp, cycle):
    g = build_ring(30, 6)
    cov = covariance_blocks(symmetric_eig(g.laplacian()), g, vdp, cycle, MismatchDistribution.vanderpol())
    blocks = cov.blocks()
    idx = np.arange(30)
    off = blocks.copy()
    off[idx, idx] = 0.0
    assert np.max(np.abs(off)) < 1e-12


def test_ring_diagonal_block_form(vdp, cycle):
    sg, st2 = 0.07, 0.03
    g = build_ring(20, 6)
    cov = covariance_blocks(symmetric_eig(g.laplacian()), g, vdp, cycle, MismatchDistribution.vanderpol(sg, 0.2, st2))
    s1, s2 = cycle.states.T
    sup = np.max(((1 - s1**2) * s2) ** 2)
    expected = np.diag([6 * st2**2, sg**2 * sup])
    for blk in cov.diagonal_blocks():
        assert np.allclose(blk, expected, rtol=1e-12, atol=1e-15)


def test_zero_covariance_blocks(vdp, cycle):
    g = build_nw(20, 4, 0.2, 1)
    cov = covariance_blocks(symmetric_eig(g.laplacian()), g, vdp, cycle, MismatchDistribution.vanderpol(0.0, 0.0, 0.0))
    assert np.all(cov.blocks() == 0.0) and cov.sigma() == 0.0
    assert sigma_for_model({"model": "ring", "n": 20, "k": 6}, cycle, MismatchDistribution.vanderpol(0.0, 0.0, 0.0)) == 0.0


def test_er_cross_correlation_fades_with_size(vdp, cycle):
    dist = MismatchDistribution.vanderpol()
    ratios = []
    for n in (50, 100, 200):
        vals = []
        for seed in range(6):
            g = build_er(n, 0.4167, seed)
            vals.append(covariance_blocks(symmetric_eig(g.laplacian()), g, vdp, cycle, dist).offdiag_ratio())
        ratios.append(np.mean(vals))
    assert ratios[0] > ratios[1] > ratios[2]


def test_sigma_ring_theta_only(cycle):
    s = sigma_for_model({"model": "ring", "n": 100, "k": 6}, cycle, MismatchDistribution.vanderpol(0.0, 0.1, 0.1))
    assert s == pytest.approx(math.sqrt(6) * 0.1, rel=1e-12)


def test_sigma_ring_closed_form(cycle):
    s1, s2 = cycle.states.T
    amp = math.sqrt(np.max(((1 - s1**2) * s2) ** 2))
    for sg, st2 in [(0.1, 0.1), (0.2, 0.01), (0.0, 0.3)]:
        s = sigma_for_model({"model": "ring", "n": 100, "k": 6}, cycle, MismatchDistribution.vanderpol(sg, 0.1, st2))
        assert s == pytest.approx(max(math.sqrt(6) * st2, amp * sg), rel=1e-12)


def test_sigma_degree_factors(cycle):
    dist = MismatchDistribution.vanderpol(0.0, 0.1, 0.1)
    assert sigma_for_model({"model": "er", "n": 100, "p": 0.1}, cycle, dist) == pytest.approx(math.sqrt(10) * 0.1)
    assert sigma_for_model({"model": "nw", "n": 100, "k": 4, "p": 0.02}, cycle, dist) == pytest.approx(math.sqrt(6) * 0.1)


# network evaluation


def test_network_bound_in_range(curve, cycle):
    g = build_ring(30, 6)
    r = pstab_for_network(g, None, curve, MismatchDistribution.vanderpol(3e-4, 0.1, 3e-4), cycle, 0.4)
    assert 0.0 <= r.pstab_lb <= 1.0
    assert r.n_modes == 29 and r.estimate == "exact-regular" and r.converged


def test_network_bound_json(curve, cycle):
    g = build_er(20, 0.4, 3)
    r = pstab_for_network(g, None, curve, MismatchDistribution.vanderpol(1e-3, 0.1, 1e-3), cycle, 0.4)
    d = json.loads(r.to_json())
    assert {"epsilon", "sigma", "pstab_lb", "modes", "series"} <= set(d)
    assert {"J", "remainder"} <= set(d["series"])
    assert len(d["modes"]) == 19 and set(d["modes"][0]) == {"mu", "lambda", "phi"}
    assert r.estimate == "asymptotic"


def test_network_bound_nonincreasing_in_sigma(curve, cycle):
    g = build_ring(30, 6)
    vals = [
        pstab_for_network(g, None, curve, MismatchDistribution.vanderpol(s, 0.1, s), cycle, 0.4).pstab_lb
        for s in np.geomspace(1e-4, 1e-2, 12)
    ]
    # Monotone up to the series truncation tolerance.
    assert np.all(np.diff(vals) <= 1e-8)
    assert vals[0] > 0.99 and vals[-1] < 1e-6


def test_empirical_sigma_matches_ring_model(curve, cycle):
    g = build_ring(24, 6)
    dist = MismatchDistribution.vanderpol(1e-3, 0.1, 2e-3)
    a = pstab_for_network(g, None, curve, dist, cycle, 0.4)
    b = pstab_for_network(g, None, curve, dist, cycle, 0.4, sigma_source="empirical")
    assert b.estimate == "empirical-spectrum"
    assert b.sigma == pytest.approx(a.sigma, rel=1e-10)


def test_disconnected_network(curve, cycle):
    g = build_er(20, 0.05, 0)
    dist = MismatchDistribution.vanderpol()
    with pytest.raises(NonUniqueManifoldError):
        pstab_for_network(g, None, curve, dist, cycle, 0.4)
    assert pstab_for_network(g, None, curve, dist, cycle, 0.4, on_disconnected="zero").pstab_lb == 0.0


def test_unstable_network_gives_zero(cycle):
    pts = tuple(MsfPoint(m, l, 2.0, cycle.period) for m, l in [(0.0, 0.0), (5.0, -0.2), (20.0, 1.0)])
    r = pstab_for_network(build_ring(10, 4), None, MsfCurve(pts), MismatchDistribution.vanderpol(), cycle, 0.4)
    assert r.pstab_lb == 0.0 and "unstable" in r.diagnostic
