"""Named self-checks run by ``syncprob validate``.

Every property is a small function that raises ``AssertionError`` (or any
other exception) on failure and returns a short detail string otherwise.
They reuse one limit cycle so the whole suite runs in well under a minute.
"""

from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.stats import chi2

from .bound import ModeWeights, covariance_blocks, moschopoulos_coefficients, pstab_lower_bound, weighted_chi2_cdf
from .dynamics import MismatchDistribution, VanDerPol, check_hamiltonian_coupling, check_jacobians, detect_period
from .montecarlo import TrialConfig, run_trials, wilson_interval
from .msf import lambda_phi
from .netgen import Graph, build_er, build_nw, build_ring, connected_components
from .spectral import jacobi_eigh, null_vector_alpha, nullity, ring_eigenvalues, symmetric_eig
from .special import gamma_p_ladder, regularized_gamma_p

__all__ = ["PROPERTIES", "run_suite"]


@lru_cache(maxsize=1)
def _cycle():
    return detect_period(VanDerPol(), np.array([1.0]), np.array([1.0, 0.0]))


def ring_closed_form():
    worst = 0.0
    for n, k in [(4, 2), (100, 6), (100, 10)]:
        w = symmetric_eig(build_ring(n, k).laplacian()).eigenvalues
        worst = max(worst, float(np.max(np.abs(w - ring_eigenvalues(n, k)))))
    assert worst < 1e-8, worst
    return f"max |dmu| = {worst:.1e}"


def jacobi_matches_lapack():
    l = build_er(16, 0.4, 3).laplacian().matrix
    wj, _ = jacobi_eigh(l)
    err = float(np.max(np.abs(wj - np.linalg.eigvalsh(l))))
    assert err < 1e-10, err
    return f"max |dmu| = {err:.1e}"


def jacobi_orthonormal():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((10, 10))
    a = a + a.T
    w, v = jacobi_eigh(a)
    err = max(float(np.max(np.abs(v.T @ v - np.eye(10)))), float(np.max(np.abs(a @ v - v * w))))
    assert err < 1e-10, err
    return f"residual {err:.1e}"


def laplacian_row_sums():
    worst = 0.0
    for seed in range(5):
        m = build_nw(30, 4, 0.2, seed).laplacian().matrix
        worst = max(worst, float(np.max(np.abs(m.sum(axis=1)))))
    assert worst == 0.0, worst
    return "exact zero"


def nullity_counts_components():
    for seed in range(20):
        g = build_er(25, 0.08, seed)
        assert nullity(g.laplacian()) == len(connected_components(g)), seed
    return "20 graphs"


def alpha_uniform():
    for g in (build_ring(12, 4), build_er(30, 0.3, 1), build_nw(30, 4, 0.1, 2)):
        alpha = null_vector_alpha(g.laplacian())
        assert np.max(np.abs(alpha - 1.0 / g.n)) < 1e-12
    return "ring, ER, NW"


def alpha_directed_pair():
    g = Graph(np.array([[0.0, 2.0], [1.0, 0.0]]), {"model": "custom"})
    alpha = null_vector_alpha(g.laplacian())
    err = float(np.max(np.abs(alpha - [1.0 / 3.0, 2.0 / 3.0])))
    assert err < 1e-12, err
    return f"err {err:.1e}"


def graph_json_roundtrip():
    g = build_nw(25, 4, 0.2, 7)
    h = Graph.from_json(g.to_json())
    assert np.array_equal(g.adjacency, h.adjacency) and h.model_tag == g.model_tag
    return "bit-identical"


def nw_keeps_ring():
    for seed in range(5):
        assert np.all(build_nw(40, 6, 0.1, seed).adjacency >= build_ring(40, 6).adjacency)
    return "5 seeds"


def graph_seed_determinism():
    assert np.array_equal(build_er(50, 0.1, 11).adjacency, build_er(50, 0.1, 11).adjacency)
    assert not np.array_equal(build_er(50, 0.1, 11).adjacency, build_er(50, 0.1, 12).adjacency)
    return "same seed, same graph"


def vdp_jacobians():
    errs = check_jacobians(VanDerPol())
    worst = max(errs.values())
    assert worst < 1e-6, errs
    return f"worst rel err {worst:.1e}"


def hamiltonian_coupling():
    err = check_hamiltonian_coupling(VanDerPol())
    assert err < 1e-8, err
    return f"|H_x + H_y| {err:.1e}"


def cycle_period():
    t = _cycle().period
    assert abs(t - 6.663) <= 0.005, t
    return f"T = {t:.5f}"


def msf_zero_exponent():
    lam = lambda_phi(VanDerPol(), _cycle(), 0.0, steps_per_period=50).lam
    assert abs(lam) < 1e-4, lam
    return f"lambda(0) = {lam:.1e}"


def transition_bound():
    point, grid, norms = lambda_phi(VanDerPol(), _cycle(), 1.0, steps_per_period=100, return_grid=True)
    lag = grid[:, None] - grid[None, :]
    slack = np.nanmin(point.phi * np.exp(-point.lam * lag) - norms)
    assert slack >= -1e-9, slack
    return f"min slack {slack:.1e}"


def gamma_closed_form():
    err = abs(regularized_gamma_p(1.0, math.log(2.0)) - 0.5)
    assert err < 1e-12, err
    return f"err {err:.1e}"


def gamma_quadrature():
    worst = 0.0
    for s, x in [(0.5, 0.3), (2.5, 3.0), (7.0, 2.0), (3.0, 11.0)]:
        val, _ = integrate.quad(lambda t: t ** (s - 1) * math.exp(-t), 0.0, x, epsabs=1e-14, epsrel=1e-13)
        worst = max(worst, abs(regularized_gamma_p(s, x) - val / math.gamma(s)))
    assert worst < 1e-10, worst
    return f"max err {worst:.1e}"


def gamma_ladder():
    lad = gamma_p_ladder(1.5, 8.0, 30)
    ref = np.array([regularized_gamma_p(1.5 + j, 8.0) for j in range(30)])
    err = float(np.max(np.abs(lad - ref)))
    assert err < 1e-12, err
    return f"max err {err:.1e}"


def series_equal_weights():
    worst = 0.0
    for modes in (2, 5, 20):
        val = weighted_chi2_cdf(3.0, [0.4] * modes, 2).value
        worst = max(worst, abs(val - chi2.cdf(3.0 / 0.4, 2 * modes)))
    assert worst < 1e-10, worst
    return f"max err {worst:.1e}"


def series_coefficients():
    w = [0.5, 0.8, 1.7, 3.0]
    a = moschopoulos_coefficients(w, 2, 30)
    b = weighted_chi2_cdf(1.0, w, 2).coefficients()[:30]
    err = float(np.max(np.abs(a - b) / a))
    assert err < 1e-10, err
    return f"max rel err {err:.1e}"


def series_monte_carlo():
    rng = np.random.default_rng(2024)
    w = np.array([1.0, 2.0, 4.0])
    draws = (rng.chisquare(2, size=(200_000, 3)) * w).sum(axis=1)
    worst = 0.0
    for x in (2.0, 6.0, 12.0, 25.0):
        p = (draws <= x).mean()
        se = math.sqrt(max(p * (1 - p), 1e-12) / draws.size)
        worst = max(worst, abs(weighted_chi2_cdf(x, w, 2).value - p) / se)
    assert worst < 3.0, worst
    return f"max |z| = {worst:.2f}"


def _modes():
    return ModeWeights.from_modes([0.5, 1.0, 2.0, 3.0], [0.28, 0.54, 1.0, 1.5], [6.1, 5.3, 8.0, 18.7])


def bound_monotone_epsilon():
    vals = [pstab_lower_bound(_modes(), 0.02, 2, e).pstab_lb for e in np.linspace(0.05, 2.0, 20)]
    assert np.all(np.diff(vals) >= -1e-12), vals
    return f"{vals[0]:.3f} .. {vals[-1]:.3f}"


def bound_monotone_sigma():
    vals = [pstab_lower_bound(_modes(), s, 2, 0.4).pstab_lb for s in np.linspace(0.001, 0.1, 20)]
    assert np.all(np.diff(vals) <= 1e-12), vals
    return f"{vals[0]:.3f} .. {vals[-1]:.3f}"


def ring_blocks_uncorrelated():
    g = build_ring(24, 6)
    spec = symmetric_eig(g.laplacian())
    cov = covariance_blocks(spec, g, VanDerPol(), _cycle(), MismatchDistribution.vanderpol())
    c = cov.mode_coupling
    off = float(np.max(np.abs(c - np.diag(np.diag(c))))) * float(np.max(np.abs(cov.theta_part)))
    assert off < 1e-12, off
    return f"max off-diagonal {off:.1e}"


def wilson_reference():
    lo, hi = wilson_interval(100, 200)
    assert abs(lo - 0.4314) < 5e-4 and abs(hi - 0.5686) < 5e-4, (lo, hi)
    return f"({lo:.4f}, {hi:.4f})"


def mc_zero_mismatch():
    cfg = TrialConfig({"model": "ring", "n": 10, "k": 4}, MismatchDistribution.vanderpol(0.0, 0.0, 0.0), trials=2, t_end=60.0)
    res = run_trials(cfg, cycle=_cycle())
    assert res.p_hat[0] == 1.0, res.max_err
    return f"max err {res.max_err.max():.1e}"


def mc_deterministic():
    cfg = TrialConfig({"model": "er", "n": 10, "p": 0.5}, MismatchDistribution.vanderpol(), trials=2, t_end=30.0, seed=9)
    a = run_trials(cfg, cycle=_cycle()).max_err
    b = run_trials(cfg, cycle=_cycle()).max_err
    assert np.array_equal(a, b)
    return "identical"


PROPERTIES = [
    ("ring spectrum closed form", ring_closed_form),
    ("jacobi agrees with lapack", jacobi_matches_lapack),
    ("jacobi eigenvectors orthonormal", jacobi_orthonormal),
    ("laplacian rows sum to zero", laplacian_row_sums),
    ("nullity equals component count", nullity_counts_components),
    ("symmetric manifold weights uniform", alpha_uniform),
    ("directed pair manifold weights", alpha_directed_pair),
    ("graph json round trip", graph_json_roundtrip),
    ("newman-watts keeps ring substrate", nw_keeps_ring),
    ("graph seeds deterministic", graph_seed_determinism),
    ("van der pol jacobians", vdp_jacobians),
    ("hamiltonian coupling", hamiltonian_coupling),
    ("limit cycle period", cycle_period),
    ("msf zero floquet exponent", msf_zero_exponent),
    ("transition matrix bound", transition_bound),
    ("gamma P(1, ln 2)", gamma_closed_form),
    ("gamma vs quadrature", gamma_quadrature),
    ("gamma ladder", gamma_ladder),
    ("series equal-weight collapse", series_equal_weights),
    ("series coefficients vs recursion", series_coefficients),
    ("series vs sampling", series_monte_carlo),
    ("bound nondecreasing in epsilon", bound_monotone_epsilon),
    ("bound nonincreasing in sigma", bound_monotone_sigma),
    ("ring modal inputs uncorrelated", ring_blocks_uncorrelated),
    ("wilson interval", wilson_reference),
    ("zero mismatch synchronizes", mc_zero_mismatch),
    ("trials deterministic", mc_deterministic),
]


def run_suite(properties=None):
    """Run every property; returns ``[(name, passed, detail, seconds)]``."""
    rows = []
    for name, fn in properties or PROPERTIES:
        start = time.perf_counter()
        try:
            detail, ok = fn(), True
        except Exception as exc:  # a failing property must not stop the suite
            detail, ok = f"{type(exc).__name__}: {exc}", False
        rows.append((name, ok, str(detail), time.perf_counter() - start))
    return rows
