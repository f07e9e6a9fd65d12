"""Probability lower bound for epsilon-synchronization of symmetric networks.

The modal mismatch inputs ``v_i`` are independent Gaussians on regular
networks (and asymptotically on ER / Newman-Watts ones).  With
``w_i = (phi_i sigma / lambda_i)^2`` the deviation obeys
``||e||^2 <= sum_i w_i chi2_n,i``, so the probability of
``limsup ||e|| <= eps`` is at least the CDF of that weighted chi-squared sum
at ``eps^2``.  The CDF is evaluated as a negative-binomial mixture of gamma
CDFs (Moschopoulos' series), expanded about the smallest weight.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import fftconvolve, lfilter
from scipy.special import gammaln

from .dynamics import LimitCycle, MismatchDistribution
from .errors import ContractViolation, InvalidParameterError, NonUniqueManifoldError, UnstableModeError
from .msf import MsfCurve
from .netgen import Graph, is_connected
from .spectral import SpectralData, symmetric_eig
from .special import gamma_p_ladder

__all__ = [
    "CovarianceModel",
    "covariance_blocks",
    "effective_degree",
    "sigma_for_model",
    "ModeWeights",
    "error_bound_symmetric",
    "MoschopoulosSeries",
    "moschopoulos_coefficients",
    "weighted_chi2_cdf",
    "BoundResult",
    "pstab_lower_bound",
    "pstab_for_network",
]

DEFAULT_TOL = 1e-8
MAX_TERMS = 100_000


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance of the modal mismatch inputs sampled along the limit cycle.

    ``Sigma_ij(t) = G(t) [i == j] + C_ij Theta(t)`` with
    ``G = F_gamma Sigma_gamma F_gamma^T``, ``Theta = H_theta Sigma_theta H_theta^T`` and
    ``C = U^T diag(sum_k a_lk^2) U``.  Limsups over the cycle are taken as
    elementwise maxima over the stored samples.
    """

    gamma_part: np.ndarray
    theta_part: np.ndarray
    mode_coupling: np.ndarray
    zero_mode: int = 0

    def block(self, i: int, j: int) -> np.ndarray:
        series = self.mode_coupling[i, j] * self.theta_part
        if i == j:
            series = series + self.gamma_part
        return series.max(axis=0)

    def diagonal_blocks(self) -> np.ndarray:
        c = np.diag(self.mode_coupling)
        series = self.gamma_part[None] + c[:, None, None, None] * self.theta_part[None]
        return series.max(axis=1)

    def blocks(self) -> np.ndarray:
        """All ``N x N`` blocks (elementwise sup over the cycle), shape ``(N, N, n, n)``."""
        c = self.mode_coupling
        hi = np.maximum(c[..., None, None] * self.theta_part.max(axis=0), c[..., None, None] * self.theta_part.min(axis=0))
        out = hi.copy()
        idx = np.arange(c.shape[0])
        out[idx, idx] = self.diagonal_blocks()
        return out

    def sigma(self) -> float:
        """``max_i max_t ||Sigma_ii(t)||^(1/2)`` over the transverse modes."""
        c = np.delete(np.diag(self.mode_coupling), self.zero_mode)
        if c.size == 0:
            return 0.0
        best = 0.0
        for ci in np.unique(np.round(c, 12)):
            best = max(best, _max_spectral_norm(self.gamma_part + ci * self.theta_part))
        return math.sqrt(best)

    def offdiag_ratio(self) -> float:
        """``max_{i != j} ||Sigma_ij|| / min_i ||Sigma_ii||`` over transverse modes."""
        keep = np.delete(np.arange(self.mode_coupling.shape[0]), self.zero_mode)
        c = self.mode_coupling[np.ix_(keep, keep)]
        theta_norm = _max_spectral_norm(self.theta_part)
        off = np.abs(c - np.diag(np.diag(c))).max() * theta_norm
        diag = min(
            _max_spectral_norm(self.gamma_part + ci * self.theta_part) for ci in np.diag(c)
        )
        return float(off / diag) if diag > 0 else float("inf")


def _max_spectral_norm(series: np.ndarray) -> float:
    sym = 0.5 * (series + np.swapaxes(series, -1, -2))
    return float(np.max(np.abs(np.linalg.eigvalsh(sym)))) if sym.size else 0.0


def _cycle_terms(cycle: LimitCycle, dist: MismatchDistribution):
    fg = cycle.F_gamma()
    ht = cycle.H_theta()
    g = fg @ dist.cov_gamma @ np.swapaxes(fg, -1, -2)
    th = ht @ dist.cov_theta @ np.swapaxes(ht, -1, -2)
    return g, th


def covariance_blocks(spec: SpectralData, g: Graph, model, cycle: LimitCycle, dist: MismatchDistribution) -> CovarianceModel:
    """Evaluate the modal covariance blocks of a symmetric network on the cycle."""
    if not g.is_symmetric:
        raise ContractViolation("covariance_blocks assumes a symmetric network")
    u = spec.eigenvectors
    d2 = np.sum(g.adjacency**2, axis=1)
    coupling = u.T @ (d2[:, None] * u)
    gp, tp = _cycle_terms(cycle, dist)
    return CovarianceModel(gp, tp, coupling, zero_mode=int(np.argmin(np.abs(spec.eigenvalues))))


def effective_degree(tag: dict) -> float:
    """Degree factor multiplying ``H_theta Sigma_theta H_theta^T`` for each network model."""
    model = tag.get("model")
    if model == "ring":
        return float(tag["k"])
    if model == "er":
        return float(tag["p"]) * float(tag["n"])
    if model == "nw":
        return float(tag["k"]) + float(tag["n"]) * float(tag["p"])
    raise InvalidParameterError(f"no closed-form degree factor for model {model!r}")


def sigma_for_model(tag: dict, cycle: LimitCycle, dist: MismatchDistribution) -> float:
    """``sigma = max_t ||F_gamma S_gamma F_gamma^T + c H_theta S_theta H_theta^T||^(1/2)``.

    ``c`` is ``K`` (ring), ``pN`` (ER) or ``K + Np`` (Newman-Watts).
    """
    c = effective_degree(tag)
    gp, tp = _cycle_terms(cycle, dist)
    return math.sqrt(_max_spectral_norm(gp + c * tp))


@dataclass(frozen=True)
class ModeWeights:
    """Transverse modes sorted by ``phi / lambda`` ascending (ties by ``mu``).

    ``index`` maps each sorted position back to the caller's mode order.
    """

    mu: np.ndarray
    lam: np.ndarray
    phi: np.ndarray
    index: np.ndarray

    @classmethod
    def from_modes(cls, mu, lam, phi) -> "ModeWeights":
        mu, lam, phi = (np.asarray(v, dtype=float).ravel() for v in (mu, lam, phi))
        if not (mu.size == lam.size == phi.size):
            raise InvalidParameterError("mu, lam, phi must have equal length")
        if np.all(lam > 0):
            order = np.lexsort((mu, phi / lam))
        else:
            order = np.arange(mu.size)
        return cls(mu[order], lam[order], phi[order], order)

    def __len__(self):
        return self.mu.size

    @property
    def stable(self) -> bool:
        return bool(np.all(self.lam > 0))

    def require_stable(self):
        bad = np.flatnonzero(self.lam <= 0)
        if bad.size:
            mu = float(self.mu[bad[0]])
            raise UnstableModeError(f"mode with mu={mu:.6g} has decay rate {self.lam[bad[0]]:.3g} <= 0", mu=mu)

    def gains(self) -> np.ndarray:
        return self.phi / self.lam

    def weights(self, sigma: float) -> np.ndarray:
        """``w_i = (phi_i sigma / lambda_i)^2``."""
        self.require_stable()
        return (self.gains() * sigma) ** 2


def error_bound_symmetric(weights: ModeWeights, v_norms) -> float:
    """``sqrt(sum_j (phi_j / lambda_j)^2 limsup ||v_j||^2)``; aligned with ``weights`` order."""
    weights.require_stable()
    v = np.asarray(v_norms, dtype=float)
    if v.shape != weights.mu.shape:
        raise InvalidParameterError("v_norms must have one entry per mode")
    return float(math.sqrt(np.sum((weights.gains() * v) ** 2)))


def _rising(h: float, k: int) -> float:
    """Rising factorial ``h (h+1) ... (h+k-1)``."""
    return math.exp(gammaln(h + k) - gammaln(h)) if k else 1.0


def moschopoulos_coefficients(weights, dof: float, count: int) -> np.ndarray:
    """Series coefficients ``a_j`` by the explicit recursion (reference implementation).

    ``a^(2)_k = n_k / k! c_2^k`` and ``a^(i)_j = sum_k a^(i-1)_k n_{j-k} / (j-k)! c_i^(j-k)``,
    with ``c_i = 1 - w_1 / w_i`` and ``n_k`` the rising factorial of ``dof / 2``.
    ``a_0 = 1``.  Quadratic in ``count``; meant for cross-checks.
    """
    w = np.sort(np.asarray(weights, dtype=float))
    h = dof / 2.0
    c = 1.0 - w[0] / w[1:]
    nk = np.array([_rising(h, k) / math.factorial(k) for k in range(count)])
    a = np.zeros(count)
    a[0] = 1.0
    for ci in c:
        g = nk * ci ** np.arange(count)
        a = np.array([np.dot(a[: j + 1], g[j::-1]) for j in range(count)])
    return a


def _mixture_pmf(ratios: np.ndarray, half_dof: float, count: int):
    """Mixture weights ``C a_j`` for ``j < count`` and their log scale.

    Each factor ``(r / (1 - c z))^h`` is a negative-binomial pmf; products are
    formed by IIR filtering when ``h`` is an integer, by FFT convolution
    otherwise.  Returns ``(y, log_scale)`` with true values ``y * exp(log_scale)``.
    """
    y = np.zeros(count)
    y[0] = 1.0
    log_scale = 0.0
    integer = float(half_dof).is_integer()
    k = np.arange(count, dtype=float)
    for r in ratios:
        c = 1.0 - r
        if c <= 0.0:
            continue
        if integer:
            for _ in range(int(half_dof)):
                y = lfilter([r], [1.0, -c], y)
        else:
            log_g = half_dof * math.log(r) + gammaln(half_dof + k) - gammaln(half_dof) - gammaln(k + 1.0) + k * math.log(c)
            y = fftconvolve(y, np.exp(log_g))[:count]
            y = np.clip(y, 0.0, None)
        peak = y.max()
        if peak <= 0.0:
            return y, -np.inf
        if peak < 1e-200:
            y = y / peak
            log_scale += math.log(peak)
    return y, log_scale


@dataclass
class MoschopoulosSeries:
    """Truncated series for ``Pr(sum_i w_i chi2_dof,i <= x)``."""

    weights: np.ndarray
    dof: float
    x: float
    value: float
    terms: int
    remainder: float
    converged: bool
    log_leading: float
    pmf: np.ndarray = field(repr=False)
    gamma_cdfs: np.ndarray = field(repr=False)

    def coefficients(self) -> np.ndarray:
        """``a_j = pmf_j / prod_i (w_1 / w_i)^(dof/2)`` (may overflow for widely spread weights)."""
        with np.errstate(over="ignore"):
            return self.pmf * np.exp(-self.log_leading)

    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.pmf * self.gamma_cdfs)


def weighted_chi2_cdf(x: float, weights, dof: float, tol: float = DEFAULT_TOL, max_terms: int = MAX_TERMS) -> MoschopoulosSeries:
    """CDF of ``sum_i w_i Q_i`` with independent ``Q_i ~ chi2(dof)`` at ``x``.

    The truncation error after ``J`` terms is at most
    ``(1 - sum_{j<J} C a_j) P(rho + J, x / 2 w_1)``; terms are added until it
    falls below ``tol`` or ``max_terms`` is reached.
    """
    w = np.sort(np.asarray(weights, dtype=float).ravel())
    if w.size == 0:
        raise InvalidParameterError("need at least one weight")
    if np.any(w <= 0):
        raise InvalidParameterError("weights must be positive")
    if x < 0:
        raise InvalidParameterError("x must be nonnegative")
    half = dof / 2.0
    ratios = w[0] / w[1:]
    if np.any(ratios > 1.0 + 1e-15):
        raise ContractViolation("series must be expanded about the smallest weight")
    ratios = np.minimum(ratios, 1.0)
    log_leading = float(half * np.sum(np.log(ratios)))
    rho = half * w.size
    xs = x / (2.0 * w[0])
    count = 256
    while True:
        count = min(count, max_terms)
        y, log_scale = _mixture_pmf(ratios, half, count)
        with np.errstate(under="ignore"):
            pmf = y * math.exp(log_scale) if np.isfinite(log_scale) else np.zeros(count)
        cdfs = gamma_p_ladder(rho, xs, count + 1)
        value = float(np.dot(pmf, cdfs[:count]))
        mass = float(np.sum(pmf))
        remainder = max(0.0, 1.0 - mass) * float(cdfs[count])
        if remainder < tol or count >= max_terms:
            break
        count *= 4
    return MoschopoulosSeries(
        weights=w, dof=dof, x=float(x), value=min(max(value, 0.0), 1.0), terms=count,
        remainder=remainder, converged=remainder < tol, log_leading=log_leading,
        pmf=pmf, gamma_cdfs=cdfs[:count],
    )


@dataclass
class BoundResult:
    epsilon: float
    sigma: float
    pstab_lb: float
    n_modes: int
    modes: list = field(default_factory=list)
    terms: int = 0
    remainder: float = 0.0
    converged: bool = True
    estimate: str = "empirical-spectrum"
    diagnostic: str = ""

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "sigma": self.sigma,
            "pstab_lb": self.pstab_lb,
            "modes": [{"mu": m, "lambda": l, "phi": p} for m, l, p in self.modes],
            "series": {"J": self.terms, "remainder": self.remainder, "converged": self.converged},
            "estimate": self.estimate,
            "diagnostic": self.diagnostic,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def pstab_lower_bound(
    weights: ModeWeights, sigma: float, n_state: int, epsilon: float, tol: float = DEFAULT_TOL
) -> BoundResult:
    """Lower bound on ``Pr(limsup ||e|| <= epsilon)`` for the given transverse modes."""
    weights.require_stable()
    if epsilon < 0 or sigma < 0:
        raise InvalidParameterError("epsilon and sigma must be nonnegative")
    modes = [(float(m), float(l), float(p)) for m, l, p in zip(weights.mu, weights.lam, weights.phi)]
    base = dict(epsilon=float(epsilon), sigma=float(sigma), n_modes=len(weights), modes=modes)
    if epsilon == 0.0:
        return BoundResult(pstab_lb=0.0, **base)
    if sigma == 0.0 or len(weights) == 0:
        return BoundResult(pstab_lb=1.0, **base)
    series = weighted_chi2_cdf(epsilon**2, weights.weights(sigma), n_state, tol=tol)
    diag = "" if series.converged else f"series truncated at J={series.terms}"
    return BoundResult(
        pstab_lb=series.value, terms=series.terms, remainder=series.remainder,
        converged=series.converged, diagnostic=diag, **base,
    )


def pstab_for_network(
    g: Graph,
    spec: SpectralData | None,
    curve: MsfCurve,
    dist: MismatchDistribution,
    cycle: LimitCycle,
    epsilon: float,
    *,
    sigma_source: str = "model",
    on_disconnected: str = "raise",
    tol: float = DEFAULT_TOL,
) -> BoundResult:
    """Probability lower bound for a concrete symmetric network.

    Uses the exact nonzero Laplacian spectrum of ``g``.  ``sigma_source``
    selects the closed-form model sigma (``"model"``, labelled "asymptotic")
    or the largest modal covariance of this graph (``"empirical"``).
    Unstable modes give a bound of 0 with a diagnostic.
    """
    if not is_connected(g):
        if on_disconnected == "zero":
            return BoundResult(epsilon=float(epsilon), sigma=float("nan"), pstab_lb=0.0, n_modes=0,
                               diagnostic="network is disconnected")
        raise NonUniqueManifoldError("network is disconnected; the synchronization manifold is not unique")
    spec = symmetric_eig(g.laplacian()) if spec is None else spec
    mu = spec.eigenvalues[1:]
    lam = curve.lambda_at(mu)
    phi = curve.phi_at(mu)
    if sigma_source == "model" and g.model_tag.get("model") in ("ring", "er", "nw"):
        sigma = sigma_for_model(g.model_tag, cycle, dist)
        estimate = "asymptotic" if g.model_tag["model"] != "ring" else "exact-regular"
    else:
        sigma = covariance_blocks(spec, g, cycle.model, cycle, dist).sigma()
        estimate = "empirical-spectrum"
    weights = ModeWeights.from_modes(mu, lam, phi)
    if not weights.stable:
        bad = float(weights.mu[np.argmin(weights.lam)])
        return BoundResult(
            epsilon=float(epsilon), sigma=sigma, pstab_lb=0.0, n_modes=len(weights),
            modes=[(float(a), float(b), float(c)) for a, b, c in zip(weights.mu, weights.lam, weights.phi)],
            estimate=estimate, diagnostic=f"unstable transverse mode at mu={bad:.6g}",
        )
    result = pstab_lower_bound(weights, sigma, cycle.model.state_dim, epsilon, tol=tol)
    result.estimate = estimate
    return result
