import numpy as np
import pytest
from scipy.integrate import solve_ivp

from syncprob.dynamics import (
    MismatchDistribution,
    VanDerPol,
    check_hamiltonian_coupling,
    check_jacobians,
    detect_period,
    integrate_network,
    sample_mismatch,
)
from syncprob.errors import DivergenceError, InvalidParameterError, NoLimitCycleError
from syncprob.netgen import Graph, build_er, build_ring


def test_jacobians_match_finite_differences(vdp):
    errs = check_jacobians(vdp, n_points=100)
    assert max(errs.values()) < 1e-5, errs


def test_coupling_is_hamiltonian(vdp):
    assert check_hamiltonian_coupling(vdp) < 1e-8


def test_coupling_jacobians_on_diagonal(vdp):
    rng = np.random.default_rng(0)
    theta = np.array([1.3, 0.0])
    for _ in range(10):
        s = rng.normal(size=2) * 2
        assert np.array_equal(vdp.H_theta(s, s, theta), [[0.0, 1.0], [0.0, 0.0]])
        assert np.array_equal(vdp.H_x(s, s, theta), [[1.3, 0.0], [0.0, 0.0]])


def test_coupling_vanishes_on_diagonal_without_offset(vdp):
    s = np.array([0.7, -1.1])
    assert np.array_equal(vdp.h(s, s, np.array([2.0, 0.0])), [0.0, 0.0])


def test_zero_covariance_gives_zero_offsets():
    g = build_ring(10, 4)
    s = sample_mismatch(MismatchDistribution.vanderpol(0.0, 0.0, 0.0), g, 1)
    assert np.all(s.dgamma == 0.0) and np.all(s.dtheta == 0.0)
    assert s.dtheta.shape == (40, 2)


def test_sample_variance():
    # 1e5 node draws of a scalar with variance 0.01; var(s^2) = 2 sigma^4 / (n - 1).
    dist = MismatchDistribution([1.0], [1.0, 0.0], [[0.01]], np.zeros((2, 2)))
    g = Graph(np.zeros((100, 100)), {"model": "custom"})
    rng = np.random.default_rng(42)
    draws = np.concatenate([sample_mismatch(dist, g, rng).dgamma[:, 0] for _ in range(1000)])
    sd = np.sqrt(2 * 0.01**2 / (draws.size - 1))
    assert abs(draws.var(ddof=1) - 0.01) < 3 * sd


def test_sample_determinism():
    g = build_er(20, 0.3, 2)
    dist = MismatchDistribution.vanderpol()
    a, b = sample_mismatch(dist, g, 7), sample_mismatch(dist, g, 7)
    assert np.array_equal(a.dgamma, b.dgamma) and np.array_equal(a.dtheta, b.dtheta)
    assert not np.array_equal(a.dgamma, sample_mismatch(dist, g, 8).dgamma)


def test_offsets_only_on_links():
    g = build_er(15, 0.3, 4)
    s = sample_mismatch(MismatchDistribution.vanderpol(), g, 0)
    assert s.dtheta.shape[0] == int(g.adjacency.sum())
    assert np.all(g.adjacency[s.edge_i, s.edge_j] == 1.0)


def test_non_psd_covariance_rejected():
    with pytest.raises(InvalidParameterError):
        MismatchDistribution([1.0], [1.0, 0.0], [[-0.01]], np.eye(2))
    with pytest.raises(InvalidParameterError):
        MismatchDistribution([1.0], [1.0, 0.0], [[0.01]], [[1.0, 2.0], [2.0, 1.0]])


def test_isolated_oscillator_peak(vdp):
    g = Graph(np.zeros((1, 1)), {"model": "custom"})
    s = sample_mismatch(MismatchDistribution.vanderpol(0.0, 0.0, 0.0), g, 0)
    rec = integrate_network(g, vdp, s, [[2.0, 0.0]], 100.0, sample_dt=0.01)
    peak = np.abs(rec.manifold[rec.times > 60.0, 0]).max()
    # Reference from an independent tight-tolerance integration of f alone.
    ref = solve_ivp(lambda t, x: [x[1], -x[0] - (x[0] ** 2 - 1) * x[1]], (0, 100), [2.0, 0.0],
                    method="Radau", rtol=1e-12, atol=1e-12, dense_output=True)
    ref_peak = np.abs(ref.sol(np.arange(60.0, 100.0, 0.001))[0]).max()
    assert abs(peak - 2.009) < 0.01
    assert abs(peak - ref_peak) < 1e-4


def test_zero_mismatch_stays_synchronized(vdp, cycle):
    g = build_ring(12, 4)
    s = sample_mismatch(MismatchDistribution.vanderpol(0.0, 0.0, 0.0), g, 0)
    x0 = np.tile(cycle.s0, (12, 1))
    rec = integrate_network(g, vdp, s, x0, 30.0)
    assert rec.err_norm.max() < 1e-9
    assert np.max(np.abs(rec.manifold - rec.manifold_ref)) < 1e-7


def test_errors_have_zero_mean(vdp, cycle):
    g = build_ring(10, 4)
    s = sample_mismatch(MismatchDistribution.vanderpol(0.0, 0.0, 0.0), g, 0)
    x0 = cycle.s0 + np.random.default_rng(1).uniform(-0.2, 0.2, (10, 2))
    rec = integrate_network(g, vdp, s, x0, 20.0, store_states=True)
    e = rec.states - rec.manifold[:, None, :]
    assert np.max(np.abs(e.sum(axis=1))) < 1e-12


def test_tolerance_halving_converges(vdp, cycle):
    g = build_ring(8, 4)
    s = sample_mismatch(MismatchDistribution.vanderpol(), g, 3)
    x0 = cycle.s0 + np.random.default_rng(2).uniform(-0.1, 0.1, (8, 2))
    kw = dict(t_eval=[20.0], store_states=True)
    a = integrate_network(g, vdp, s, x0, 20.0, rtol=1e-9, atol=1e-9, **kw).states[-1]
    b = integrate_network(g, vdp, s, x0, 20.0, rtol=5e-10, atol=5e-10, **kw).states[-1]
    assert np.max(np.abs(a - b)) < 1e-8


def test_csv_layout(vdp, cycle):
    g = build_ring(4, 2)
    s = sample_mismatch(MismatchDistribution.vanderpol(), g, 0)
    rec = integrate_network(g, vdp, s, np.tile(cycle.s0, (4, 1)), 5.0, sample_dt=0.1, store_states=True)
    assert np.all(np.diff(rec.times) > 0)
    lines = rec.to_csv().splitlines()
    assert lines[0] == "t,s1,s2,err_norm"
    assert len(lines) == rec.times.size + 1 == 52
    wide = rec.to_csv(include_states=True).splitlines()
    assert wide[0].split(",")[-1] == "x3_2"


def test_divergence_reported(vdp):
    g = build_ring(4, 2)
    # Negative damping pumps energy in without bound.
    s = sample_mismatch(MismatchDistribution.vanderpol(0.0, 0.0, 0.0, gamma_bar=-1.0), g, 0)
    with pytest.raises(DivergenceError) as info:
        integrate_network(g, vdp, s, np.full((4, 2), 3.0), 50.0, max_norm=1e3)
    assert info.value.t is not None and info.value.t < 50.0


def test_weighted_graph_rejected(vdp):
    g = Graph(2.0 * build_ring(4, 2).adjacency, {"model": "custom"})
    s = sample_mismatch(MismatchDistribution.vanderpol(), g, 0)
    with pytest.raises(InvalidParameterError):
        integrate_network(g, vdp, s, np.zeros((4, 2)), 1.0)


def test_period(cycle):
    assert abs(cycle.period - 6.663) <= 0.005


def test_period_independent_of_start(vdp, cycle):
    other = detect_period(vdp, [1.0], [1.0, 0.0], x0=np.array([-0.5, 3.0]))
    assert abs(other.period - cycle.period) < 1e-6


def test_period_samples_on_orbit(vdp, cycle):
    assert cycle.states.shape == (2048, 2)
    assert np.all(np.diff(cycle.times) > 0)
    assert abs(cycle.states[0, 0]) < 1e-12 and cycle.states[0, 1] > 0


def test_no_cycle_for_damped_oscillator(vdp):
    with pytest.raises(NoLimitCycleError):
        detect_period(vdp, [-1.0], [1.0, 0.0])
