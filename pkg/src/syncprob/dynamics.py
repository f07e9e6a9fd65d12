"""Oscillator models, coupled-network integration and limit-cycle detection.

The coupled network is

    x_i' = f(x_i, gamma_i) + sum_j a_ij h(x_j, x_i, theta_ij)

and the synchronization manifold is the alpha-weighted average of the node
states.  Alongside the network the reduced manifold equation

    s' = f(s, gamma_bar) + d_bar h(s, s, theta_bar)

is integrated as a reference trajectory.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DivergenceError, InvalidParameterError, NoLimitCycleError
from .netgen import Graph
from .spectral import null_vector_alpha

__all__ = [
    "OscillatorModel",
    "VanDerPol",
    "check_jacobians",
    "check_hamiltonian_coupling",
    "MismatchDistribution",
    "MismatchSample",
    "sample_mismatch",
    "TrajectoryRecord",
    "integrate_network",
    "LimitCycle",
    "detect_period",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
]

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-9
DEFAULT_METHOD = "DOP853"


class OscillatorModel:
    """Interface for node dynamics ``f`` and coupling ``h`` with their Jacobians.

    All methods broadcast over leading axes: ``x`` has shape ``(..., n)``,
    ``gamma`` ``(..., p)`` and ``theta`` ``(..., q)``.  Jacobians return
    ``(..., rows, cols)``.
    """

    state_dim: int
    param_dim: int
    coupling_dim: int
    name = "oscillator"

    def f(self, x, gamma):
        raise NotImplementedError

    def h(self, xj, xi, theta):
        raise NotImplementedError

    def F_x(self, x, gamma):
        raise NotImplementedError

    def F_gamma(self, x, gamma):
        raise NotImplementedError

    def H_x(self, xj, xi, theta):
        """Jacobian of ``h`` with respect to its first argument (the source node)."""
        raise NotImplementedError

    def H_y(self, xj, xi, theta):
        """Jacobian of ``h`` with respect to its second argument (the receiving node)."""
        raise NotImplementedError

    def H_theta(self, xj, xi, theta):
        raise NotImplementedError

    def default_initial_state(self):
        return np.zeros(self.state_dim)


class VanDerPol(OscillatorModel):
    """Van der Pol node coupled diffusively through the first state.

    ``f(x, gamma) = (x2, -x1 - gamma (x1^2 - 1) x2)`` and
    ``h(x_j, x_i, theta) = (theta1 (x1_j - x1_i) + theta2, 0)``.
    """

    state_dim = 2
    param_dim = 1
    coupling_dim = 2
    name = "vanderpol"

    def f(self, x, gamma):
        x = np.asarray(x, dtype=float)
        g = np.asarray(gamma, dtype=float)[..., 0]
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([x2, -x1 - g * (x1 * x1 - 1.0) * x2], axis=-1)

    def h(self, xj, xi, theta):
        xj, xi, th = (np.asarray(v, dtype=float) for v in (xj, xi, theta))
        first = th[..., 0] * (xj[..., 0] - xi[..., 0]) + th[..., 1]
        return np.stack([first, np.zeros_like(first)], axis=-1)

    def F_x(self, x, gamma):
        x = np.asarray(x, dtype=float)
        g = np.asarray(gamma, dtype=float)[..., 0]
        x1, x2 = x[..., 0], x[..., 1]
        out = np.zeros(np.broadcast(x1, g).shape + (2, 2))
        out[..., 0, 1] = 1.0
        out[..., 1, 0] = -1.0 - 2.0 * g * x1 * x2
        out[..., 1, 1] = g * (1.0 - x1 * x1)
        return out

    def F_gamma(self, x, gamma):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        out = np.zeros(x1.shape + (2, 1))
        out[..., 1, 0] = (1.0 - x1 * x1) * x2
        return out

    def H_x(self, xj, xi, theta):
        th = np.asarray(theta, dtype=float)
        shape = np.broadcast(np.asarray(xj)[..., 0], np.asarray(xi)[..., 0], th[..., 0]).shape
        out = np.zeros(shape + (2, 2))
        out[..., 0, 0] = th[..., 0]
        return out

    def H_y(self, xj, xi, theta):
        return -self.H_x(xj, xi, theta)

    def H_theta(self, xj, xi, theta):
        xj, xi = np.asarray(xj, dtype=float), np.asarray(xi, dtype=float)
        shape = np.broadcast(xj[..., 0], xi[..., 0], np.asarray(theta)[..., 0]).shape
        out = np.zeros(shape + (2, 2))
        out[..., 0, 0] = xj[..., 0] - xi[..., 0]
        out[..., 0, 1] = 1.0
        return out

    def default_initial_state(self):
        return np.array([2.0, 0.0])


def _central_diff(fn, x0, eps):
    x0 = np.asarray(x0, dtype=float)
    cols = []
    for k in range(x0.size):
        step = np.zeros_like(x0)
        step[k] = eps * max(1.0, abs(x0[k]))
        cols.append((np.asarray(fn(x0 + step)) - np.asarray(fn(x0 - step))) / (2 * step[k]))
    return np.stack(cols, axis=-1)


def _rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def check_jacobians(model: OscillatorModel, n_points=100, seed=0, scale=2.0, eps=1e-6) -> dict:
    """Compare analytic Jacobians with central finite differences at random points.

    Returns the worst relative error for each Jacobian.
    """
    rng = np.random.default_rng(seed)
    n, p, q = model.state_dim, model.param_dim, model.coupling_dim
    worst = {"F_x": 0.0, "F_gamma": 0.0, "H_x": 0.0, "H_y": 0.0, "H_theta": 0.0}
    for _ in range(n_points):
        x, y = rng.uniform(-scale, scale, n), rng.uniform(-scale, scale, n)
        g, th = rng.uniform(0.0, scale, p), rng.uniform(-scale, scale, q)
        worst["F_x"] = max(worst["F_x"], _rel_err(model.F_x(x, g), _central_diff(lambda z: model.f(z, g), x, eps)))
        worst["F_gamma"] = max(
            worst["F_gamma"], _rel_err(model.F_gamma(x, g), _central_diff(lambda z: model.f(x, z), g, eps))
        )
        worst["H_x"] = max(
            worst["H_x"], _rel_err(model.H_x(x, y, th), _central_diff(lambda z: model.h(z, y, th), x, eps))
        )
        worst["H_y"] = max(
            worst["H_y"], _rel_err(model.H_y(x, y, th), _central_diff(lambda z: model.h(x, z, th), y, eps))
        )
        worst["H_theta"] = max(
            worst["H_theta"], _rel_err(model.H_theta(x, y, th), _central_diff(lambda z: model.h(x, y, z), th, eps))
        )
    return worst


def check_hamiltonian_coupling(model: OscillatorModel, n_points=100, seed=0, eps=1e-6) -> float:
    """Worst ``|H_x + H_y|`` with both Jacobians taken by finite differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        x = rng.uniform(-2, 2, model.state_dim)
        y = rng.uniform(-2, 2, model.state_dim)
        th = rng.uniform(-2, 2, model.coupling_dim)
        hx = _central_diff(lambda z: model.h(z, y, th), x, eps)
        hy = _central_diff(lambda z: model.h(x, z, th), y, eps)
        worst = max(worst, float(np.max(np.abs(hx + hy))))
    return worst


def _psd_factor(cov, name):
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T, atol=1e-12):
        raise InvalidParameterError(f"{name} must be a symmetric square matrix")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        if w.min() < -1e-12 * max(1.0, abs(w).max()):
            raise InvalidParameterError(f"{name} is not positive semidefinite") from None
        return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class MismatchDistribution:
    """Gaussian parameter mismatch: ``gamma_i ~ N(gamma_bar, cov_gamma)``, ``theta_ij ~ N(theta_bar, cov_theta)``."""

    gamma_bar: np.ndarray
    theta_bar: np.ndarray
    cov_gamma: np.ndarray
    cov_theta: np.ndarray

    def __post_init__(self):
        for name in ("gamma_bar", "theta_bar"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        for name in ("cov_gamma", "cov_theta"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if self.cov_gamma.shape != (self.gamma_bar.size,) * 2:
            raise InvalidParameterError("cov_gamma shape does not match gamma_bar")
        if self.cov_theta.shape != (self.theta_bar.size,) * 2:
            raise InvalidParameterError("cov_theta shape does not match theta_bar")
        _psd_factor(self.cov_gamma, "cov_gamma")
        _psd_factor(self.cov_theta, "cov_theta")

    @classmethod
    def vanderpol(cls, sigma_gamma=0.1, sigma_theta1=0.1, sigma_theta2=0.1, gamma_bar=1.0, theta_bar=(1.0, 0.0)):
        """Independent mismatches with the given standard deviations."""
        return cls(
            gamma_bar=[gamma_bar],
            theta_bar=list(theta_bar),
            cov_gamma=[[sigma_gamma**2]],
            cov_theta=np.diag([sigma_theta1**2, sigma_theta2**2]),
        )

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("gamma_bar", "theta_bar", "cov_gamma", "cov_theta")}


@dataclass(frozen=True)
class MismatchSample:
    """One realization of the parameter offsets.

    ``dtheta[e]`` belongs to the directed link ``edge_i[e] <- edge_j[e]``.
    """

    dgamma: np.ndarray
    dtheta: np.ndarray
    edge_i: np.ndarray
    edge_j: np.ndarray
    gamma_bar: np.ndarray
    theta_bar: np.ndarray

    @property
    def gamma(self):
        return self.gamma_bar + self.dgamma

    @property
    def theta(self):
        return self.theta_bar + self.dtheta


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_mismatch(dist: MismatchDistribution, g: Graph, seed) -> MismatchSample:
    """Draw independent node and link offsets for graph ``g``.

    Node offsets are drawn first (shape ``(N, p)``), then one offset per
    nonzero adjacency entry in row-major order (shape ``(E, q)``).
    """
    rng = _rng(seed)
    lg = _psd_factor(dist.cov_gamma, "cov_gamma")
    lt = _psd_factor(dist.cov_theta, "cov_theta")
    ei, ej = np.nonzero(g.adjacency)
    dgamma = rng.standard_normal((g.n, dist.gamma_bar.size)) @ lg.T
    dtheta = rng.standard_normal((ei.size, dist.theta_bar.size)) @ lt.T
    return MismatchSample(dgamma, dtheta, ei, ej, dist.gamma_bar, dist.theta_bar)


@dataclass
class TrajectoryRecord:
    """Sampled solution of a network integration.

    ``manifold`` is the alpha-weighted average of node states and
    ``err_norm`` the norm of the stacked deviation from it.
    ``manifold_ref`` solves the reduced manifold equation from the same start.
    """

    times: np.ndarray
    manifold: np.ndarray
    manifold_ref: np.ndarray
    err_norm: np.ndarray
    states: np.ndarray | None = None

    def to_csv(self, path=None, include_states=False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.manifold.shape[1]
        header = ["t"] + [f"s{k + 1}" for k in range(n)] + ["err_norm"]
        if include_states:
            if self.states is None:
                raise InvalidParameterError("trajectory was integrated without store_states")
            header += [f"x{i}_{k + 1}" for i in range(self.states.shape[1]) for k in range(n)]
        w.writerow(header)
        for r in range(self.times.size):
            row = [repr(float(self.times[r]))] + [repr(float(v)) for v in self.manifold[r]]
            row.append(repr(float(self.err_norm[r])))
            if include_states:
                row += [repr(float(v)) for v in self.states[r].ravel()]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


class _NetworkRHS:
    def __init__(self, model, sample, n_nodes, d_bar):
        self.model = model
        self.n = n_nodes
        self.dim = model.state_dim
        self.gamma = sample.gamma
        self.theta = sample.theta
        self.ei, self.ej = sample.edge_i, sample.edge_j
        self.gamma_bar = sample.gamma_bar
        self.theta_bar = sample.theta_bar
        self.d_bar = d_bar

    def __call__(self, t, y):
        n, dim, m = self.n, self.dim, self.model
        x = y[: n * dim].reshape(n, dim)
        s = y[n * dim :]
        dx = m.f(x, self.gamma)
        if self.ei.size:
            c = m.h(x[self.ej], x[self.ei], self.theta)
            for k in range(dim):
                dx[:, k] += np.bincount(self.ei, weights=c[:, k], minlength=n)
        ds = m.f(s, self.gamma_bar) + self.d_bar * m.h(s, s, self.theta_bar)
        return np.concatenate([dx.ravel(), ds])


def _edge_weights_ok(g, sample):
    if not np.all(g.adjacency[sample.edge_i, sample.edge_j] == 1.0):
        raise InvalidParameterError("network integration expects an unweighted (0/1) graph")


def integrate_network(
    g: Graph,
    model: OscillatorModel,
    sample: MismatchSample,
    x0,
    t_end: float,
    *,
    t_eval=None,
    sample_dt: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = DEFAULT_METHOD,
    store_states: bool = False,
    max_norm: float = 1e6,
    alpha=None,
) -> TrajectoryRecord:
    """Integrate the mismatched network and track the deviation from the manifold.

    Parameters
    ----------
    x0 : array_like, shape (N, n)
        Initial node states.
    t_eval, sample_dt
        Output times, or a uniform output spacing on ``[0, t_end]``.
    alpha : array_like, optional
        Manifold weights; computed from the Laplacian when omitted.  Pass
        explicit weights to integrate a disconnected graph.

    Raises
    ------
    DivergenceError
        If any state exceeds ``max_norm`` or the solver fails.
    """
    _edge_weights_ok(g, sample)
    x0 = np.asarray(x0, dtype=float).reshape(g.n, model.state_dim)
    alpha = null_vector_alpha(g.laplacian()) if alpha is None else np.asarray(alpha, dtype=float)
    d_bar = float(alpha @ g.degrees)
    if t_eval is None:
        dt = sample_dt if sample_dt is not None else min(0.05, t_end / 100.0)
        count = int(np.floor(t_end / dt + 1e-9)) + 1
        t_eval = np.linspace(0.0, dt * (count - 1), count)
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) <= 0):
        raise InvalidParameterError("output times must be strictly increasing")
    s0 = alpha @ x0
    if not np.all(np.isfinite(x0)) or np.max(np.abs(x0)) > max_norm:
        raise DivergenceError("initial state already exceeds the divergence threshold", t=0.0)
    rhs = _NetworkRHS(model, sample, g.n, d_bar)

    def blowup(t, y):
        return max_norm - np.max(np.abs(y))

    blowup.terminal = True
    sol = solve_ivp(
        rhs, (0.0, float(t_end)), np.concatenate([x0.ravel(), s0]), method=method,
        t_eval=t_eval, rtol=rtol, atol=atol, events=blowup,
    )
    if sol.status == 1 or sol.status < 0 or not np.all(np.isfinite(sol.y)):
        t_fail = float(sol.t[-1]) if len(sol.t) else 0.0
        if sol.t_events and len(sol.t_events[0]):
            t_fail = float(sol.t_events[0][0])
        raise DivergenceError(f"network integration diverged near t={t_fail:.6g}: {sol.message}", t=t_fail)
    nd = g.n * model.state_dim
    states = sol.y[:nd].T.reshape(-1, g.n, model.state_dim)
    manifold = np.einsum("i,tik->tk", alpha, states)
    err = np.sqrt(np.sum((states - manifold[:, None, :]) ** 2, axis=(1, 2)))
    return TrajectoryRecord(
        times=sol.t, manifold=manifold, manifold_ref=sol.y[nd:].T, err_norm=err,
        states=states if store_states else None,
    )


@dataclass(frozen=True, eq=False)
class LimitCycle:
    """One period of the manifold's periodic orbit, starting on the section ``s1 = 0, s2 > 0``."""

    model: OscillatorModel
    period: float
    s0: np.ndarray
    times: np.ndarray
    states: np.ndarray
    gamma_bar: np.ndarray
    theta_bar: np.ndarray
    d_in_bar: float
    meta: dict = field(default_factory=dict)

    def rhs(self, t, s):
        m = self.model
        return m.f(s, self.gamma_bar) + self.d_in_bar * m.h(s, s, self.theta_bar)

    def F_x(self):
        return self.model.F_x(self.states, self.gamma_bar)

    def F_gamma(self):
        return self.model.F_gamma(self.states, self.gamma_bar)

    def H_x(self):
        return self.model.H_x(self.states, self.states, self.theta_bar)

    def H_theta(self):
        return self.model.H_theta(self.states, self.states, self.theta_bar)


def detect_period(
    model: OscillatorModel,
    gamma_bar,
    theta_bar,
    d_in_bar: float = 0.0,
    *,
    x0=None,
    t_transient: float = 100.0,
    horizon: float = 200.0,
    n_samples: int = 2048,
    rtol: float = 1e-11,
    atol: float = 1e-11,
) -> LimitCycle:
    """Locate the manifold's limit cycle and its period.

    Integrates past ``t_transient`` and times two successive upward crossings
    of ``s1 = 0`` (with ``s2 > 0``).  Crossing times come from the solver's
    event root-finder on the dense output, refined to well below 1e-9.
    """
    gamma_bar = np.atleast_1d(np.asarray(gamma_bar, dtype=float))
    theta_bar = np.atleast_1d(np.asarray(theta_bar, dtype=float))
    x0 = model.default_initial_state() if x0 is None else np.asarray(x0, dtype=float)

    def rhs(t, s):
        return model.f(s, gamma_bar) + d_in_bar * model.h(s, s, theta_bar)

    pre = solve_ivp(rhs, (0.0, t_transient), x0, method=DEFAULT_METHOD, rtol=rtol, atol=atol)
    if pre.status != 0 or not np.all(np.isfinite(pre.y[:, -1])):
        raise NoLimitCycleError("manifold equation failed during the transient")

    def section(t, s):
        return s[0]

    section.direction = 1.0
    run = solve_ivp(
        rhs, (t_transient, t_transient + horizon), pre.y[:, -1], method=DEFAULT_METHOD,
        rtol=rtol, atol=atol, events=section, dense_output=True,
    )
    hits = [(t, y[1]) for t, y in zip(run.t_events[0], run.y_events[0]) if y[1] > 0]
    if len(hits) < 3:
        raise NoLimitCycleError(f"fewer than three section crossings within t <= {t_transient + horizon}")
    crossings = [t for t, _ in hits]
    (t_p, a_p), (t_a, a_a), (t_b, a_b) = hits[-3:]
    # A converged cycle returns to the same section point with the same period.
    if a_b < 1e-6 or abs(a_b - a_a) > 1e-6 * a_b or abs((t_b - t_a) - (t_a - t_p)) > 1e-6 * (t_b - t_a):
        raise NoLimitCycleError(
            f"section returns have not settled (s2: {a_a:.6g} -> {a_b:.6g}); no attracting limit cycle found"
        )
    period = float(t_b - t_a)
    s0 = run.sol(t_b)
    s0[0] = 0.0
    grid = np.linspace(0.0, period, n_samples, endpoint=False)
    cyc = solve_ivp(rhs, (0.0, period), s0, method=DEFAULT_METHOD, rtol=rtol, atol=atol, t_eval=grid)
    return LimitCycle(
        model=model, period=period, s0=s0, times=grid, states=cyc.y.T,
        gamma_bar=gamma_bar, theta_bar=theta_bar, d_in_bar=float(d_in_bar),
        meta={"t_transient": t_transient, "crossings": len(crossings)},
    )
