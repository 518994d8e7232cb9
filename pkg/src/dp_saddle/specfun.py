"""Numerically stable special functions shared by all accountants.

Everything here is a pure function of its arguments and safe to call from
any number of threads.  Probabilities that can drop far below the smallest
normal double are handled through the log-space helpers.
"""

import math

import numpy as np
from scipy import special as _special

SQRT2 = math.sqrt(2.0)
SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _require_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return arr


def phi_cdf(z):
    """Standard normal CDF.

    Evaluated through the complementary error function, so both tails keep
    full relative accuracy instead of saturating at ``1 - tiny``.

    Parameters
    ----------
    z : float or array_like
        Finite evaluation point(s).

    Returns
    -------
    float or ndarray
        Phi(z) in [0, 1].
    """
    arr = _require_finite("z", z)
    out = _special.ndtr(arr)
    return float(out) if np.isscalar(z) or arr.ndim == 0 else out


def log_phi_cdf(z):
    """log Phi(z), stable arbitrarily deep into the lower tail."""
    arr = _require_finite("z", z)
    out = _special.log_ndtr(arr)
    return float(out) if np.isscalar(z) or arr.ndim == 0 else out


def phi_inverse(p):
    """Inverse of the standard normal CDF on (0, 1)."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    return float(_special.ndtri(p))


def q_scaled(z):
    """Scaled Gaussian tail q(z) = (1 - Phi(z)) * sqrt(2*pi) * exp(z^2/2).

    Uses the identity q(z) = sqrt(pi/2) * erfcx(z / sqrt(2)); a naive
    product of the tail probability with exp(z^2/2) would overflow near
    z = 38 even though q itself stays bounded by sqrt(pi/2) + tail growth
    only for negative z.

    For z >= 0 the value obeys the Mills-ratio sandwich
    2 / (z + sqrt(z^2 + 4)) < q(z) <= 2 / (z + sqrt(z^2 + 8/pi)).
    """
    arr = _require_finite("z", z)
    out = SQRT_HALF_PI * _special.erfcx(arr / SQRT2)
    return float(out) if np.isscalar(z) or arr.ndim == 0 else out


def log_sum_exp(values):
    """log(sum(exp(values))) with the usual max-factoring trick."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return -math.inf
    return float(_special.logsumexp(arr))


def log1mexp(x):
    """log(1 - exp(x)) for x <= 0, accurate near both endpoints."""
    if x > 0.0:
        raise ValueError(f"log1mexp requires x <= 0, got {x!r}")
    if x == 0.0:
        return -math.inf
    # Split at log(1/2) per the standard recipe to keep full precision.
    if x > -math.log(2.0):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def log_diff_exp(a, b):
    """log(exp(a) - exp(b)) for a >= b; -inf when the difference underflows."""
    if b > a:
        raise ValueError(f"log_diff_exp requires a >= b, got a={a!r} b={b!r}")
    if b == -math.inf:
        return a
    d = b - a
    if d >= 0.0:
        return -math.inf
    return a + log1mexp(d)


def log_gaussian_privacy_delta(mean, variance, epsilon):
    """log of the privacy curve of a Gaussian loss variable N(mean, variance).

    Computes log of  Phi((mean - eps)/sd) - e^(eps - mean + variance/2)
    * Phi((mean - variance - eps)/sd)  entirely in log space, so the result
    stays meaningful when the linear value underflows.
    """
    if variance <= 0.0 or not math.isfinite(variance):
        raise ValueError(f"variance must be positive and finite, got {variance!r}")
    sd = math.sqrt(variance)
    la = log_phi_cdf((mean - epsilon) / sd)
    lb = epsilon - mean + 0.5 * variance + log_phi_cdf((mean - variance - epsilon) / sd)
    return log_diff_exp(la, lb)
