"""Generalized master stability function of a periodic synchronization orbit.

For a Laplacian eigenvalue ``mu`` the transverse mode obeys
``eta' = (F_x(s(t)) - mu H_x) eta`` along the periodic manifold ``s(t)``.
Its decay rate ``lambda(mu)`` is minus the largest Floquet exponent and
``phi(mu)`` is the smallest constant with
``||Phi(t, tau)|| <= phi exp(-lambda (t - tau))`` on a sampled two-period grid.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import DEFAULT_METHOD, LimitCycle
from .errors import DivergenceError, InvalidParameterError

__all__ = [
    "MsfPoint",
    "MsfCurve",
    "monodromy",
    "fundamental_matrices",
    "step_matrices",
    "transition_norms",
    "lambda_phi",
    "msf_curve",
]

VAR_RTOL = 1e-11
VAR_ATOL = 1e-12


@dataclass(frozen=True)
class MsfPoint:
    mu: float
    lam: float
    phi: float
    period: float
    multipliers: tuple = ()


def _variational_rhs(cycle: LimitCycle, mu: float):
    m = cycle.model
    n = m.state_dim

    def rhs(t, y):
        s = y[:n]
        a = m.F_x(s, cycle.gamma_bar) - mu * m.H_x(s, s, cycle.theta_bar)
        y_mat = y[n:].reshape(n, n)
        return np.concatenate([cycle.rhs(t, s), (a @ y_mat).ravel()])

    return rhs


def fundamental_matrices(cycle: LimitCycle, mu: float, t_grid, s_start=None, rtol=VAR_RTOL, atol=VAR_ATOL):
    """Normal fundamental matrix ``Y(t)`` (``Y(0) = I``) at the requested times.

    The orbit is integrated jointly with the variational equation, starting
    from ``s_start`` (the cycle's section point by default).
    """
    n = cycle.model.state_dim
    s_start = cycle.s0 if s_start is None else s_start
    t_grid = np.asarray(t_grid, dtype=float)
    y0 = np.concatenate([s_start, np.eye(n).ravel()])
    sol = solve_ivp(
        _variational_rhs(cycle, mu), (0.0, float(t_grid[-1])), y0, method=DEFAULT_METHOD,
        t_eval=t_grid, rtol=rtol, atol=atol,
    )
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise DivergenceError(f"variational integration failed at mu={mu}: {sol.message}")
    return sol.y[n:].T.reshape(-1, n, n)


def monodromy(model, cycle: LimitCycle, mu: float) -> np.ndarray:
    """``Y(T)`` for the variational system ``F_x - mu H_x`` over one period."""
    if model is not cycle.model and type(model) is not type(cycle.model):
        raise InvalidParameterError("cycle was computed for a different model")
    return fundamental_matrices(cycle, mu, [0.0, cycle.period])[-1]


def step_matrices(cycle: LimitCycle, mu: float, steps_per_period: int, rtol=VAR_RTOL, atol=VAR_ATOL):
    """Transition matrices ``Phi(t_{k+1}, t_k)`` over one period of a uniform grid.

    All steps are integrated at once as a single batched system, each row
    starting from the orbit point at ``t_k`` with the identity.
    """
    m = cycle.model
    n = m.state_dim
    period = cycle.period
    dt = period / steps_per_period
    grid = np.arange(steps_per_period) * dt
    orbit = solve_ivp(
        cycle.rhs, (0.0, float(grid[-1]) if grid[-1] > 0 else dt), cycle.s0, method=DEFAULT_METHOD,
        t_eval=grid, rtol=rtol, atol=atol,
    ).y.T[:steps_per_period]
    width = n + n * n

    def rhs(t, y):
        y = y.reshape(steps_per_period, width)
        s = y[:, :n]
        a = m.F_x(s, cycle.gamma_bar) - mu * m.H_x(s, s, cycle.theta_bar)
        ds = m.f(s, cycle.gamma_bar) + cycle.d_in_bar * m.h(s, s, cycle.theta_bar)
        dy = a @ y[:, n:].reshape(-1, n, n)
        return np.concatenate([ds, dy.reshape(-1, n * n)], axis=1).ravel()

    y0 = np.concatenate([orbit, np.tile(np.eye(n).ravel(), (steps_per_period, 1))], axis=1).ravel()
    sol = solve_ivp(rhs, (0.0, dt), y0, method=DEFAULT_METHOD, rtol=rtol, atol=atol, t_eval=[dt])
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise DivergenceError(f"step-matrix integration failed at mu={mu}: {sol.message}")
    return sol.y[:, -1].reshape(steps_per_period, width)[:, n:].reshape(-1, n, n)


def transition_norms(steps: np.ndarray, n_periods: int = 2) -> np.ndarray:
    """``||Phi(t_a, t_b)||`` for ``0 <= b <= a <= K`` on a ``n_periods``-period grid.

    ``steps`` holds one period of step matrices; the rest follow by
    periodicity.  Entries above the diagonal are NaN.
    """
    per = steps.shape[0]
    n = steps.shape[-1]
    size = n_periods * per + 1
    seq = np.concatenate([steps] * n_periods)
    norms = np.full((size, size), np.nan)
    current = np.broadcast_to(np.eye(n), (size, n, n)).copy()
    norms[np.arange(size), np.arange(size)] = 1.0
    # current[b] holds Phi(t_a, t_b) for every b < a after step a.
    for a in range(1, size):
        current[:a] = seq[a - 1] @ current[:a]
        norms[a, :a] = np.linalg.norm(current[:a], ord=2, axis=(-2, -1))
    return norms


def lambda_phi(model, cycle: LimitCycle, mu: float, steps_per_period: int = 200, return_grid: bool = False):
    """Decay rate and transition-matrix constant for eigenvalue ``mu``.

    ``lambda = -max_i ln|m_i| / T`` over the Floquet multipliers ``m_i`` of
    the monodromy matrix.  ``phi`` is the maximum of
    ``||Phi(t, tau)|| exp(lambda (t - tau))`` over ``0 <= tau <= t <= 2T`` on a
    grid of spacing ``T / steps_per_period``.
    """
    period = cycle.period
    t_grid = np.linspace(0.0, 2.0 * period, 2 * steps_per_period + 1)
    mono = monodromy(model, cycle, mu)
    mult = np.linalg.eigvals(mono)
    with np.errstate(divide="ignore"):
        rho = np.log(np.abs(mult)) / period
    lam = float(-np.max(rho))
    norms = transition_norms(step_matrices(cycle, mu, steps_per_period))
    lag = t_grid[:, None] - t_grid[None, :]
    scaled = norms * np.exp(lam * lag)
    phi = float(np.nanmax(scaled))
    point = MsfPoint(mu=float(mu), lam=lam, phi=phi, period=period, multipliers=tuple(complex(v) for v in mult))
    if return_grid:
        return point, t_grid, norms
    return point


@dataclass(frozen=True)
class MsfCurve:
    points: tuple

    def __post_init__(self):
        mu = self.mu
        if mu.size == 0 or np.any(np.diff(mu) <= 0):
            raise InvalidParameterError("MSF grid must be nonempty and strictly increasing")

    @property
    def mu(self):
        return np.array([p.mu for p in self.points])

    @property
    def lam(self):
        return np.array([p.lam for p in self.points])

    @property
    def phi(self):
        return np.array([p.phi for p in self.points])

    @property
    def period(self):
        return np.array([p.period for p in self.points])

    def _interp(self, values, mu):
        mu = np.asarray(mu, dtype=float)
        grid = self.mu
        tol = 1e-12 * max(1.0, abs(grid[-1]))
        if np.any(mu < grid[0] - tol) or np.any(mu > grid[-1] + tol):
            raise InvalidParameterError(
                f"eigenvalue outside MSF grid [{grid[0]}, {grid[-1]}]: {mu.min()}..{mu.max()}"
            )
        return np.interp(mu, grid, values)

    def lambda_at(self, mu):
        return self._interp(self.lam, mu)

    def phi_at(self, mu):
        return self._interp(self.phi, mu)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mu", "lambda", "phi", "T"])
        for p in self.points:
            w.writerow([repr(p.mu), repr(p.lam), repr(p.phi), repr(p.period)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "MsfCurve":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(tuple(MsfPoint(float(r["mu"]), float(r["lambda"]), float(r["phi"]), float(r["T"])) for r in rows))


def _point_job(args):
    model, cycle, mu, steps = args
    return lambda_phi(model, cycle, mu, steps)


def msf_curve(model, cycle: LimitCycle, mu_grid, jobs: int = 1, steps_per_period: int = 200) -> MsfCurve:
    """Evaluate :func:`lambda_phi` on an ascending grid.  Output order follows the grid."""
    grid = np.asarray(mu_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise InvalidParameterError("MSF grid must be nonempty and strictly increasing")
    tasks = [(model, cycle, float(m), steps_per_period) for m in grid]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            points = list(ex.map(_point_job, tasks))
    else:
        points = [_point_job(t) for t in tasks]
    return MsfCurve(tuple(points))
