"""Privacy loss random variables and their cumulant generating functions.

Supported base mechanisms are the Gaussian mechanism and the Poisson
subsampled Gaussian mechanism.  A ``Composition`` is a multiset of
mechanisms with repetition counts; its CGF is the count-weighted sum of the
per-mechanism CGFs, so every evaluation costs O(#distinct mechanisms) and
is independent of the total number of compositions.

Conventions
-----------
The Gaussian pair (N(s, sigma^2), N(0, sigma^2)) induces a loss variable
distributed as N(eta/2, eta) with eta = (s/sigma)^2, giving the closed form
K(t) = eta * t * (t + 1) / 2.  For the subsampled mechanism (rate ``lam``)
the loss is log((1 - lam) + lam * e^Y) with Y drawn from the two-component
mixture (1 - lam) N(-eta/2, eta) + lam N(+eta/2, eta); its CGF is evaluated
by Gauss-Hermite quadrature applied to each mixture component, with
derivatives obtained from tilted raw moments through the cumulant
recursion.  Sensitivity enters only through the ratio s/sigma, so
everything is normalised to s = 1 internally.

All objects are immutable and all evaluations are pure; quadrature node
tables are built once per (mechanism, node count) and shared read-only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AccuracyError
from .specfun import log_gaussian_privacy_delta

# Gauss-Hermite ladder: node counts roughly double until two successive
# evaluations of the composed CGF agree to _CGF_RTOL.
_NODE_LADDER = (201, 401, 801, 1601)
_CGF_RTOL = 1e-12
# Below this total variance the composed loss is treated as a point mass.
DEGENERATE_VARIANCE = 1e-300


class MechanismKind(enum.Enum):
    GAUSSIAN = "gaussian"
    SUBSAMPLED_GAUSSIAN = "subsampled-gaussian"


@dataclass(frozen=True)
class MechanismSpec:
    """Parameters of one base mechanism.

    Attributes
    ----------
    kind : MechanismKind
    sigma : float
        Noise standard deviation, > 0.
    sensitivity : float
        l2 sensitivity of the query, > 0.
    lam : float
        Poisson subsampling rate in [0, 1]; fixed to 1 for the plain
        Gaussian mechanism.
    """

    kind: MechanismKind
    sigma: float
    sensitivity: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma!r}")
        if not (math.isfinite(self.sensitivity) and self.sensitivity > 0.0):
            raise ValueError(
                f"sensitivity must be positive and finite, got {self.sensitivity!r}"
            )
        if not (0.0 <= self.lam <= 1.0):
            raise ValueError(f"lam must lie in [0, 1], got {self.lam!r}")
        if self.kind is MechanismKind.GAUSSIAN and self.lam != 1.0:
            raise ValueError("a plain Gaussian mechanism has lam fixed to 1")

    @classmethod
    def gaussian(cls, sigma, sensitivity=1.0):
        return cls(MechanismKind.GAUSSIAN, float(sigma), float(sensitivity), 1.0)

    @classmethod
    def subsampled_gaussian(cls, sigma, lam, sensitivity=1.0):
        return cls(
            MechanismKind.SUBSAMPLED_GAUSSIAN, float(sigma), float(sensitivity), float(lam)
        )

    @property
    def loss_scale(self):
        """eta = (sensitivity / sigma)^2, the variance of the log-ratio kernel."""
        return (self.sensitivity / self.sigma) ** 2

    @property
    def is_degenerate(self):
        """True when the loss variable is identically zero."""
        return self.kind is MechanismKind.SUBSAMPLED_GAUSSIAN and self.lam == 0.0

    @property
    def uses_quadrature(self):
        return self.kind is MechanismKind.SUBSAMPLED_GAUSSIAN and self.lam > 0.0


@dataclass(frozen=True)
class Composition:
    """A multiset of mechanisms with repetition counts.

    The CGF domain is t in [0, inf): both supported mechanisms have a
    moment generating function that is finite for all nonnegative t.
    """

    terms: tuple

    def __post_init__(self):
        if not self.terms:
            raise ValueError("a composition needs at least one term")
        for mech, count in self.terms:
            if not isinstance(mech, MechanismSpec):
                raise TypeError(f"expected MechanismSpec, got {type(mech)!r}")
            if not (isinstance(count, int) and count >= 1):
                raise ValueError(f"counts must be positive integers, got {count!r}")

    @classmethod
    def repeat(cls, mechanism, count=1):
        """n-fold composition of a single mechanism."""
        return cls(((mechanism, int(count)),))


@dataclass(frozen=True)
class CgfEvaluation:
    """K and its first four derivatives at a real tilt t.

    K is convex on the reals, so k2 >= 0; at t = 0, k0 = 0 while k1 and k2
    are the mean and variance of the loss variable.
    """

    t: float
    k0: float
    k1: float
    k2: float
    k3: float
    k4: float


@lru_cache(maxsize=None)
def _hermgauss(n_nodes):
    x, w = np.polynomial.hermite.hermgauss(n_nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _plrv_quad_nodes(mech, n_nodes):
    """Loss values and log-weights of the PLRV base law for one mechanism.

    Gauss-Hermite nodes are placed separately under each mixture component
    of Y (change of variables y = component_mean + sqrt(2)*std*u).
    """
    eta = mech.loss_scale
    lam = mech.lam
    u, w = _hermgauss(n_nodes)
    log_w = np.log(w) - 0.5 * math.log(math.pi)
    shift = math.sqrt(2.0 * eta) * u

    components = []
    if lam < 1.0:
        components.append((-0.5 * eta, math.log1p(-lam)))
    if lam > 0.0:
        components.append((+0.5 * eta, math.log(lam)))

    log_one_minus_lam = math.log1p(-lam) if lam < 1.0 else -math.inf
    log_lam = math.log(lam)

    ys = []
    log_weights = []
    for mean, log_mix in components:
        ys.append(mean + shift)
        log_weights.append(log_mix + log_w)
    y = np.concatenate(ys)
    logw = np.concatenate(log_weights)
    # loss(y) = log((1 - lam) + lam * e^y), stable for any y via logaddexp
    loss = np.logaddexp(log_one_minus_lam, log_lam + y)
    loss.setflags(write=False)
    logw.setflags(write=False)
    return loss, logw


def _quad_cgf(loss, logw, t):
    """K(t) and raw tilted moments m1..m4 from one quadrature pass."""
    a = t * loss + logw
    c = float(a.max())
    e = np.exp(a - c)
    s0 = float(e.sum())
    k0 = c + math.log(s0)
    moments = []
    p = e
    for _ in range(4):
        p = p * loss
        moments.append(float(p.sum()) / s0)
    return k0, moments


def _cumulants_from_raw(moments):
    m1, m2, m3, m4 = moments
    k1 = m1
    k2 = m2 - m1 * m1
    k3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 ** 3
    k4 = m4 - 4.0 * m1 * m3 - 3.0 * m2 * m2 + 12.0 * m1 * m1 * m2 - 6.0 * m1 ** 4
    return k1, max(k2, 0.0), k3, k4


def _gaussian_cgf(eta, t):
    k0 = 0.5 * eta * t * (t + 1.0)
    k1 = 0.5 * eta * (2.0 * t + 1.0)
    return k0, k1, eta, 0.0, 0.0


def _check_tilt(t):
    t = float(t)
    if not math.isfinite(t) or t < 0.0:
        raise ValueError(f"tilt must be finite and >= 0, got {t!r}")
    return t


def _split_terms(composition):
    exact = []   # (eta, count) handled in closed form
    quad = []    # (mech, count) needing Gauss-Hermite
    for mech, count in composition.terms:
        if mech.is_degenerate:
            continue
        if mech.uses_quadrature:
            quad.append((mech, count))
        else:
            exact.append((mech.loss_scale, count))
    return exact, quad


def cgf(composition, t, max_order=4):
    """Composed CGF K(t) with derivatives up to order four.

    All orders come out of the same quadrature pass, so they are always
    populated regardless of ``max_order`` (which is validated for interface
    hygiene only).

    Raises
    ------
    ValueError
        If t is negative or non-finite.
    AccuracyError
        If the quadrature ladder fails to stabilise to 1e-12 relative.
    """
    t = _check_tilt(t)
    if not 0 <= max_order <= 4:
        raise ValueError(f"max_order must lie in [0, 4], got {max_order!r}")

    exact, quad = _split_terms(composition)
    base = np.zeros(5)
    for eta, count in exact:
        base += count * np.asarray(_gaussian_cgf(eta, t))

    if quad:
        base += _quad_terms_cgf(quad, t)

    return CgfEvaluation(t, *base)


def _quad_terms_cgf(quad, t):
    """Ladder-refined quadrature contribution of subsampled terms."""
    prev_k0 = None
    last_diff = None
    for n_nodes in _NODE_LADDER:
        total = np.zeros(5)
        for mech, count in quad:
            loss, logw = _plrv_quad_nodes(mech, n_nodes)
            k0, moments = _quad_cgf(loss, logw, t)
            k1, k2, k3, k4 = _cumulants_from_raw(moments)
            total += count * np.asarray((k0, k1, k2, k3, k4))
        if prev_k0 is not None:
            last_diff = abs(total[0] - prev_k0)
            if last_diff <= _CGF_RTOL * max(1.0, abs(total[0])):
                return total
        prev_k0 = total[0]
    achieved = last_diff / max(1.0, abs(prev_k0))
    raise AccuracyError(
        f"CGF quadrature did not stabilise at t={t!r} "
        f"(achieved {achieved:.3e}, wanted {_CGF_RTOL:.0e})",
        achieved_tol=achieved,
    )


def _quad_cgf_complex(loss, logw, t, s, chunk=4096):
    """K(t + i*s) for an array of imaginary offsets s, one mechanism."""
    a = t * loss + logw
    c = float(a.max())
    amp = np.exp(a - c)
    out = np.empty(s.shape, dtype=complex)
    for start in range(0, s.size, chunk):
        block = s[start:start + chunk]
        phases = np.exp(1j * np.outer(block, loss))
        vals = phases @ amp
        with np.errstate(divide="ignore", invalid="ignore"):
            out[start:start + chunk] = np.log(vals)
    return c + out


def cgf_complex(composition, t, s, num_nodes=None):
    """Composed CGF at the complex argument t + i*s.

    The subsampled-Gaussian integrand power is exp((t + i*s) * loss(y))
    with the real logarithm of the strictly positive base, so the
    principal branch is unambiguous.  ``s`` may be a scalar or an array.
    With ``num_nodes`` set, the quadrature runs at that fixed node count
    (used by the contour oracle, which owns its own refinement loop);
    otherwise the same ladder as :func:`cgf` applies.

    Satisfies |exp(K(t + i*s))| <= exp(K(t)) and conjugate symmetry in s.
    """
    t = _check_tilt(t)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if not np.all(np.isfinite(s_arr)):
        raise ValueError("s must be finite")

    exact, quad = _split_terms(composition)
    z = t + 1j * s_arr
    total = np.zeros(s_arr.shape, dtype=complex)
    for eta, count in exact:
        total += count * 0.5 * eta * z * (z + 1.0)

    if quad:
        if num_nodes is not None:
            for mech, count in quad:
                loss, logw = _plrv_quad_nodes(mech, int(num_nodes))
                total += count * _quad_cgf_complex(loss, logw, t, s_arr)
        else:
            total += _quad_terms_cgf_complex(quad, t, s_arr)

    if np.isscalar(s) or np.asarray(s).ndim == 0:
        return complex(total[0])
    return total


def _quad_terms_cgf_complex(quad, t, s_arr):
    prev = None
    last_diff = None
    for n_nodes in _NODE_LADDER:
        total = np.zeros(s_arr.shape, dtype=complex)
        for mech, count in quad:
            loss, logw = _plrv_quad_nodes(mech, n_nodes)
            total += count * _quad_cgf_complex(loss, logw, t, s_arr)
        if prev is not None:
            last_diff = float(np.max(np.abs(total - prev)))
            if last_diff <= _CGF_RTOL * max(1.0, float(np.max(np.abs(total)))):
                return total
        prev = total
    achieved = last_diff / max(1.0, float(np.max(np.abs(prev))))
    raise AccuracyError(
        f"complex CGF quadrature did not stabilise at t={t!r}",
        achieved_tol=achieved,
    )


def tilted_abs_third_moment(composition, t):
    """Sum over terms of E|tilted loss - its mean|^3.

    For the Gaussian mechanism the tilt only shifts the mean, so each term
    contributes count * eta^(3/2) * 2 * sqrt(2/pi) (the absolute third
    central moment of a normal); subsampled terms are evaluated by the same
    Gauss-Hermite pass as the CGF.
    """
    t = _check_tilt(t)
    exact, quad = _split_terms(composition)
    gauss_abs3 = 2.0 * math.sqrt(2.0 / math.pi)
    total = sum(count * eta ** 1.5 * gauss_abs3 for eta, count in exact)

    if quad:
        prev = None
        last_diff = None
        for n_nodes in _NODE_LADDER:
            part = 0.0
            for mech, count in quad:
                loss, logw = _plrv_quad_nodes(mech, n_nodes)
                a = t * loss + logw
                c = float(a.max())
                e = np.exp(a - c)
                s0 = float(e.sum())
                m1 = float((loss * e).sum()) / s0
                p3 = float((np.abs(loss - m1) ** 3 * e).sum()) / s0
                part += count * p3
            if prev is not None:
                last_diff = abs(part - prev)
                if last_diff <= _CGF_RTOL * max(abs(part), 1e-300):
                    total += part
                    break
            prev = part
        else:
            achieved = last_diff / max(abs(prev), 1e-300)
            raise AccuracyError(
                f"third-moment quadrature did not stabilise at t={t!r}",
                achieved_tol=achieved,
            )
    return float(total)


def mean_var(composition):
    """(mean, variance) of the composed loss variable, i.e. (K'(0), K''(0))."""
    ev = cgf(composition, 0.0, max_order=2)
    return ev.k1, ev.k2


def is_degenerate(composition):
    """True when the composed loss variable is a point mass at zero."""
    return all(mech.is_degenerate for mech, _ in composition.terms)


def log_gaussian_reference_delta(sigma, epsilon):
    """log of the exact optimal privacy curve of the Gaussian mechanism.

    Sensitivity-1 closed form: Phi(-eps*sigma + 1/(2*sigma))
    - e^eps * Phi(-eps*sigma - 1/(2*sigma)), evaluated in log space.
    """
    sigma = float(sigma)
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"sigma must be positive and finite, got {sigma!r}")
    epsilon = float(epsilon)
    if not (math.isfinite(epsilon) and epsilon >= 0.0):
        raise ValueError(f"epsilon must be finite and >= 0, got {epsilon!r}")
    eta = 1.0 / (sigma * sigma)
    return log_gaussian_privacy_delta(0.5 * eta, eta, epsilon)


def gaussian_reference_delta(sigma, epsilon):
    """Exact optimal privacy curve of the sensitivity-1 Gaussian mechanism."""
    return math.exp(log_gaussian_reference_delta(sigma, epsilon))
