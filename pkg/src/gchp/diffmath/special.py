"""Special functions for the interarrival loss families and the chi-squared score.

``log_gamma``, ``digamma``, ``normal_cdf`` and ``reg_upper_gamma`` are thin,
validated wrappers over :mod:`scipy.special`.  ``chi2_quantile`` inverts the
regularized gamma CDF by plain bisection.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sp

from gchp.errors import InvalidAlpha, NonPositiveArgument, NonPositiveDof


def _positive(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise NonPositiveArgument(f"{name} must be > 0")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def log_gamma(x):
    """log Gamma(x) for x > 0; scalar in, float out."""
    arr = _positive(x)
    return _out(sp.gammaln(arr), x)


def digamma(x):
    arr = _positive(x)
    return _out(sp.digamma(arr), x)


def normal_cdf(z):
    return _out(sp.ndtr(np.asarray(z, dtype=np.float64)), z)


def log_normal_cdf(z):
    return _out(sp.log_ndtr(np.asarray(z, dtype=np.float64)), z)


def reg_upper_gamma(s, x):
    """Q(s, x) = Gamma(s, x) / Gamma(s), for s > 0 and x >= 0."""
    s_arr = _positive(s, "s")
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(~(x_arr >= 0)):
        raise NonPositiveArgument("x must be >= 0")
    out = sp.gammaincc(s_arr, x_arr)
    return float(out) if np.ndim(s) == 0 and np.ndim(x) == 0 else out


def chi2_cdf(q: float, k: float) -> float:
    if q <= 0:
        return 0.0
    return float(sp.gammainc(0.5 * k, 0.5 * q))


def chi2_quantile(alpha: float, k: float, width: float = 1e-8) -> float:
    """Solve P(X <= q) = alpha for X ~ chi2(k) by bisection.

    The bracket ``[0, k + 20 sqrt(2k) + 20]`` holds every quantile we care
    about (alpha well below 1 - 1e-80); the loop stops once the interval is
    narrower than ``width``.
    """
    if not (0.0 < alpha < 1.0) or not math.isfinite(alpha):
        raise InvalidAlpha(f"alpha must lie in (0, 1), got {alpha}")
    if not (k > 0) or not math.isfinite(k):
        raise NonPositiveDof(f"degrees of freedom must be > 0, got {k}")
    lo, hi = 0.0, k + 20.0 * math.sqrt(2.0 * k) + 20.0
    while chi2_cdf(hi, k) < alpha:
        hi *= 2.0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if chi2_cdf(mid, k) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
