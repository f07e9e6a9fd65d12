"""Lower regularized incomplete gamma function.

Series expansion below ``x = s + 1`` and a modified-Lentz continued fraction
for the complement above it, following Numerical Recipes (2nd ed., ch. 6).
"""

import math
import sys

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError, SyncProbError

__all__ = ["regularized_gamma_p", "regularized_gamma_q", "gamma_p_ladder"]

EPS = 1e-16
FPMIN = sys.float_info.min / EPS
MAX_ITER = 100000


def _series(s, x):
    ap = s
    term = 1.0 / s
    total = term
    for _ in range(MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            return total * math.exp(-x + s * math.log(x) - math.lgamma(s))
    raise SyncProbError(f"gamma series did not converge for s={s}, x={x}")


def _continued_fraction(s, x):
    b = x + 1.0 - s
    c = 1.0 / FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < FPMIN:
            d = FPMIN
        c = b + an / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return math.exp(-x + s * math.log(x) - math.lgamma(s)) * h
    raise SyncProbError(f"gamma continued fraction did not converge for s={s}, x={x}")


def regularized_gamma_p(s: float, x: float) -> float:
    """``P(s, x) = gamma(s, x) / Gamma(s)`` for ``s > 0``, ``x >= 0``."""
    if not s > 0 or not x >= 0 or math.isnan(x):
        raise InvalidParameterError(f"regularized_gamma_p needs s > 0 and x >= 0, got s={s}, x={x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < s + 1.0:
        return min(1.0, _series(s, x))
    return max(0.0, 1.0 - _continued_fraction(s, x))


def regularized_gamma_q(s: float, x: float) -> float:
    """Upper complement ``Q(s, x) = 1 - P(s, x)``, computed without cancellation."""
    if not s > 0 or not x >= 0:
        raise InvalidParameterError(f"regularized_gamma_q needs s > 0 and x >= 0, got s={s}, x={x}")
    if x == 0.0:
        return 1.0
    if x < s + 1.0:
        return max(0.0, 1.0 - _series(s, x))
    return min(1.0, _continued_fraction(s, x))


def gamma_p_ladder(s: float, x: float, count: int) -> np.ndarray:
    """``P(s + j, x)`` for ``j = 0 .. count-1``.

    Uses ``P(a, x) = sum_{m >= 0} e^{-x} x^{a+m} / Gamma(a+m+1)``: the terms are
    summed from the far tail downwards, so every value is a sum of positive
    numbers.  Above the last shape (``x > s + count``) every value is close
    to 1 and the complement is built upward from :func:`regularized_gamma_q`
    instead.  When the tail would still be long, falls back to the downward
    recurrence ``P(a+1, x) = P(a, x) - e^{-x} x^a / Gamma(a+1)``.
    """
    if count <= 0:
        return np.zeros(0)
    if x == 0.0:
        return np.zeros(count)
    a = s + np.arange(count, dtype=float)
    if x > a[-1] + 1.0:
        # Every value is close to 1: step the complement upward instead,
        # Q(a+1, x) = Q(a, x) + e^{-x} x^a / Gamma(a+1), again a sum of positives.
        log_terms = a[:-1] * math.log(x) - x - gammaln(a[:-1] + 1.0)
        q = regularized_gamma_q(s, x) + np.concatenate([[0.0], np.cumsum(np.exp(log_terms))])
        return np.clip(1.0 - q, 0.0, 1.0)
    tail_end = max(count, int(math.ceil(x - s + 12.0 * math.sqrt(x) + 60.0)))
    if tail_end <= count + 20_000:
        m = s + np.arange(tail_end, dtype=float)
        terms = np.exp(m * math.log(x) - x - gammaln(m + 1.0))
        tails = np.cumsum(terms[::-1])[::-1]
        return np.clip(tails[:count], 0.0, 1.0)
    log_terms = a * math.log(x) - x - gammaln(a + 1.0)
    p0 = regularized_gamma_p(s, x)
    out = p0 - np.concatenate([[0.0], np.cumsum(np.exp(log_terms[:-1]))])
    return np.clip(out, 0.0, 1.0)

