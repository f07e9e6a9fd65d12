"""Empirical probability of epsilon-synchronization by repeated simulation.

Each trial draws a mismatch realization (and, for random graph models, a
fresh graph), integrates the network from a small random spread around the
limit cycle and records the largest deviation ``||e||`` over the final
window.  A trial succeeds at tolerance ``eps`` when that maximum is at most
``eps``, so one trajectory serves a whole grid of tolerances.

Trial ``k`` at sweep point ``g`` is seeded by ``SeedSequence([seed, k, g])``,
which makes every outcome independent of how trials are scheduled.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .bound import pstab_for_network
from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL, LimitCycle, MismatchDistribution, VanDerPol, detect_period, integrate_network, sample_mismatch
from .errors import DivergenceError, InvalidParameterError, SyncProbError
from .msf import MsfCurve
from .netgen import Graph, build_graph, is_connected

__all__ = ["TrialConfig", "McResult", "wilson_interval", "run_trials", "sweep", "SweepRow", "sweep_to_csv", "SWEEP_AXES"]

SWEEP_AXES = ("epsilon", "sigma_gamma", "sigma_theta2", "n")
MAX_REJECTIONS = 1000


def wilson_interval(successes, trials, confidence: float = 0.95):
    """Wilson score interval for a binomial proportion."""
    successes = np.asarray(successes, dtype=float)
    if trials <= 0:
        raise InvalidParameterError("trials must be positive")
    z = norm.ppf(0.5 + confidence / 2.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = np.where(successes == 0, 0.0, np.maximum(centre - half, 0.0))
    hi = np.where(successes == trials, 1.0, np.minimum(centre + half, 1.0))
    return lo, hi


@dataclass(frozen=True)
class TrialConfig:
    """Monte Carlo experiment settings.

    ``graph`` is a model tag (``{"model": "ring", "n": 30, "k": 6}``) or a
    fixed :class:`Graph`.  With ``resample_graph`` a random-model graph is
    redrawn for every trial (until connected); otherwise the realization
    seeded by ``seed`` is used throughout.
    """

    graph: dict | Graph
    dist: MismatchDistribution
    epsilons: tuple = (0.4,)
    t_end: float = 100.0
    window_periods: float = 5.0
    trials: int = 500
    seed: int = 0
    resample_graph: bool = True
    ic_spread: float = 0.1
    samples_per_period: int = 200
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    max_norm: float = 1e6
    model: object = field(default_factory=VanDerPol)

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameterError("trial count must be at least 1")
        eps = np.atleast_1d(np.asarray(self.epsilons, dtype=float))
        if eps.size == 0 or np.any(eps <= 0):
            raise InvalidParameterError("epsilon values must be positive")
        object.__setattr__(self, "epsilons", tuple(float(e) for e in eps))
        if self.t_end <= 0 or self.window_periods <= 0:
            raise InvalidParameterError("t_end and window_periods must be positive")

    @property
    def random_graph(self) -> bool:
        return isinstance(self.graph, dict) and self.graph.get("model") in ("er", "nw")

    def base_graph(self) -> Graph:
        if isinstance(self.graph, Graph):
            return self.graph
        tag = dict(self.graph)
        if tag.get("model") in ("er", "nw"):
            tag.setdefault("seed", self.seed)
        return build_graph(tag)


@dataclass
class McResult:
    """Outcome of a batch of trials, evaluated on every configured tolerance."""

    epsilons: np.ndarray
    successes: np.ndarray
    trials: int
    max_err: np.ndarray
    divergences: int
    rejections: int = 0

    @property
    def p_hat(self) -> np.ndarray:
        return self.successes / self.trials

    @property
    def wilson(self):
        return wilson_interval(self.successes, self.trials)

    @property
    def degenerate(self) -> bool:
        return self.divergences == self.trials


def _draw_graph(cfg: TrialConfig, rng: np.random.Generator, base: Graph):
    if not (cfg.resample_graph and cfg.random_graph):
        return base, 0
    tag = dict(cfg.graph)
    for rejected in range(MAX_REJECTIONS):
        tag["seed"] = int(rng.integers(2**63))
        g = build_graph(tag)
        if is_connected(g):
            return g, rejected
    raise SyncProbError(f"no connected graph after {MAX_REJECTIONS} draws for {cfg.graph}")


def _trial(args):
    cfg, base, cycle, trial, point = args
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, trial, point])))
    g, rejected = _draw_graph(cfg, rng, base)
    sample = sample_mismatch(cfg.dist, g, rng)
    x0 = cycle.s0 + rng.uniform(-cfg.ic_spread, cfg.ic_spread, size=(g.n, cfg.model.state_dim))
    dt = cycle.period / cfg.samples_per_period
    count = int(round(cfg.window_periods * cfg.samples_per_period))
    start = max(cfg.t_end - count * dt, 0.0)
    t_eval = np.linspace(start, cfg.t_end, count + 1)
    try:
        rec = integrate_network(
            g, cfg.model, sample, x0, cfg.t_end, t_eval=t_eval,
            rtol=cfg.rtol, atol=cfg.atol, max_norm=cfg.max_norm,
        )
    except DivergenceError:
        return math.inf, True, rejected
    return float(rec.err_norm.max()), False, rejected


def _nominal_cycle(cfg: TrialConfig, base: Graph) -> LimitCycle:
    return detect_period(cfg.model, cfg.dist.gamma_bar, cfg.dist.theta_bar, float(base.degrees.mean()))


def run_trials(cfg: TrialConfig, jobs: int = 1, point: int = 0, cycle: LimitCycle | None = None) -> McResult:
    """Run ``cfg.trials`` independent trials; ``point`` is the sweep index used in seeding."""
    base = cfg.base_graph()
    if not (cfg.resample_graph and cfg.random_graph) and not is_connected(base):
        raise InvalidParameterError("fixed graph is disconnected")
    cycle = _nominal_cycle(cfg, base) if cycle is None else cycle
    tasks = [(cfg, base, cycle, k, point) for k in range(cfg.trials)]
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(_trial, tasks, chunksize=max(1, cfg.trials // (4 * jobs))))
    else:
        outcomes = [_trial(t) for t in tasks]
    max_err = np.array([o[0] for o in outcomes])
    eps = np.asarray(cfg.epsilons)
    successes = (max_err[None, :] <= eps[:, None]).sum(axis=1)
    return McResult(
        epsilons=eps, successes=successes, trials=cfg.trials, max_err=max_err,
        divergences=int(sum(o[1] for o in outcomes)), rejections=int(sum(o[2] for o in outcomes)),
    )


@dataclass(frozen=True)
class SweepRow:
    value: float
    p_hat: float
    wilson_lo: float
    wilson_hi: float
    pstab_lb: float
    trials: int
    divergences: int


def _with_axis(cfg: TrialConfig, axis: str, value: float) -> TrialConfig:
    d = cfg.dist
    if axis == "sigma_gamma":
        cov = np.array(d.cov_gamma, dtype=float)
        cov[0, 0] = value**2
        return replace(cfg, dist=replace(d, cov_gamma=cov))
    if axis == "sigma_theta2":
        cov = np.array(d.cov_theta, dtype=float)
        cov[1, 1] = value**2
        return replace(cfg, dist=replace(d, cov_theta=cov))
    if axis == "n":
        if not isinstance(cfg.graph, dict):
            raise InvalidParameterError("an N sweep needs a graph model tag")
        return replace(cfg, graph={**cfg.graph, "n": int(value)})
    raise InvalidParameterError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def _bound(cfg: TrialConfig, curve, eps, cycle):
    if curve is None:
        return np.full(len(eps), np.nan)
    g = cfg.base_graph()
    out = []
    for e in eps:
        out.append(pstab_for_network(g, None, curve, cfg.dist, cycle, e, on_disconnected="zero").pstab_lb)
    return np.array(out)


def sweep(cfg: TrialConfig, axis: str, grid, *, jobs: int = 1, curve: MsfCurve | None = None) -> list[SweepRow]:
    """Monte Carlo estimates along one axis, with the analytical bound alongside.

    The epsilon axis reuses one batch of trajectories for every grid value.
    Other axes run a fresh batch per grid point, seeded by the point index.
    The bound column is NaN without an MSF curve; for random graph models it
    is evaluated on the realization seeded by ``cfg.seed``.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise InvalidParameterError("sweep grid is empty")
    rows = []
    if axis == "epsilon":
        sub = replace(cfg, epsilons=tuple(grid))
        cycle = _nominal_cycle(sub, sub.base_graph())
        res = run_trials(sub, jobs=jobs, cycle=cycle)
        lo, hi = res.wilson
        lb = _bound(sub, curve, grid, cycle)
        for i, v in enumerate(grid):
            rows.append(SweepRow(float(v), float(res.p_hat[i]), float(lo[i]), float(hi[i]), float(lb[i]), res.trials, res.divergences))
        return rows
    for point, v in enumerate(grid):
        sub = _with_axis(cfg, axis, v)
        cycle = _nominal_cycle(sub, sub.base_graph())
        res = run_trials(sub, jobs=jobs, point=point, cycle=cycle)
        lo, hi = res.wilson
        lb = _bound(sub, curve, sub.epsilons[:1], cycle)
        rows.append(SweepRow(float(v), float(res.p_hat[0]), float(lo[0]), float(hi[0]), float(lb[0]), res.trials, res.divergences))
    return rows


def sweep_to_csv(rows, axis: str = "value", path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([axis, "p_hat", "wilson_lo", "wilson_hi", "pstab_lb", "trials", "divergences"])
    for r in rows:
        w.writerow([repr(r.value), repr(r.p_hat), repr(r.wilson_lo), repr(r.wilson_hi), repr(r.pstab_lb), r.trials, r.divergences])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
