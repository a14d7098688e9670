"""
Scalar building blocks: heat kernel, second differences, the functions
``g_kappa``/``h_kappa`` that appear in the increment covariances, absolute
Gaussian moments, Hermite coefficients of ``|x|**p`` and the covariance
``rho_p(a) = Cov(|Z1|**p, |Z2|**p)`` of a standard bivariate normal pair.

All functions accept numpy arrays where it makes sense and are pure.
"""
import math
from functools import lru_cache

import numpy as np
from scipy.special import erfc, roots_genlaguerre, roots_legendre


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


def _check_power(p):
    if int(p) != p or p < 1:
        raise DomainError(f"power p must be an integer >= 1, got {p!r}")
    return int(p)


def heat_kernel(t, x, theta):
    """Density of N(0, theta * t) evaluated at ``x``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or theta <= 0:
        raise DomainError("heat_kernel needs t > 0 and theta > 0")
    var = theta * t
    out = np.exp(-np.square(x) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)
    return out if out.ndim else float(out)


def d2(f, s):
    """Second-order increment ``f(s) - 2 f(s-1) + f(s-2)``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 2):
        raise DomainError(f"d2 needs s >= 2, got {s!r}")
    return f(s) - 2.0 * f(s - 1) + f(s - 2)


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("s must be non-negative")
    return s


def g_kappa(kappa, s, theta=1.0):
    """``sqrt(s) * exp(-kappa**2 / (2 theta s))`` with ``g_kappa(0) = 0``."""
    if kappa < 0:
        raise DomainError("kappa must be non-negative")
    s = _check_s(s)
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    out = np.where(pos, np.sqrt(safe) * np.exp(-kappa * kappa / (2.0 * theta * safe)), 0.0)
    return out if out.ndim else float(out)


def h_kappa(kappa, s, theta=1.0):
    """``P(Z >= kappa / sqrt(theta s))`` with ``h_kappa(0) = 0``.

    Evaluated through ``erfc`` so that the far tail keeps full relative
    precision.
    """
    if kappa < 0:
        raise DomainError("kappa must be non-negative")
    s = _check_s(s)
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    out = np.where(pos, 0.5 * erfc(kappa / np.sqrt(2.0 * theta * safe)), 0.0)
    return out if out.ndim else float(out)


def mu_p(p):
    """p-th absolute moment of a standard normal, ``2**(p/2) Gamma((p+1)/2) / sqrt(pi)``."""
    p = _check_power(p)
    return 2.0 ** (p / 2.0) * math.gamma((p + 1) / 2.0) / math.sqrt(math.pi)


# Number of half-line Gauss nodes; the rule is exact for q <= 2 * _NODES.
_NODES = 200
_Q_LIMIT = 160


@lru_cache(maxsize=None)
def _normalized_coefficients(p, q_max):
    """c_q = E[|Z|^p He_q(Z)] / sqrt(q!) for q = 0..q_max.

    Folding the Gaussian weight onto the half line with t = x**2 / 2 turns
    the integrand into t**((p-1)/2) e**-t times a polynomial in t, which a
    generalized Gauss-Laguerre rule integrates exactly.
    """
    alpha = (p - 1) / 2.0
    t, w = roots_genlaguerre(_NODES, alpha)
    x = np.sqrt(2.0 * t)
    scale = 2.0 ** ((p + 1) / 2.0) / math.sqrt(2.0 * math.pi)
    coeffs = np.zeros(q_max + 1)
    h_prev = np.ones_like(x)
    h_cur = x.copy()
    coeffs[0] = scale * np.dot(w, h_prev)
    if q_max >= 1:
        coeffs[1] = 0.0
    for q in range(1, q_max):
        # normalized probabilists' Hermite recurrence
        h_next = (x * h_cur - math.sqrt(q) * h_prev) / math.sqrt(q + 1)
        h_prev, h_cur = h_cur, h_next
        if (q + 1) % 2 == 0:
            coeffs[q + 1] = scale * np.dot(w, h_cur)
    coeffs.setflags(write=False)
    return coeffs


def hermite_coeff(p, q):
    """Coefficient a_q in ``|x|**p = sum_q a_q He_q(x)``.

    ``a_0 = mu_p``, and ``a_q = 0`` for every odd ``q``.
    """
    p = _check_power(p)
    if int(q) != q or q < 0:
        raise DomainError(f"q must be a non-negative integer, got {q!r}")
    q = int(q)
    if q > _Q_LIMIT:
        raise DomainError(f"q must be <= {_Q_LIMIT}")
    if q % 2:
        return 0.0
    c = _normalized_coefficients(p, max(q, 2))[q]
    return float(c * math.exp(-0.5 * math.lgamma(q + 1)))


def rho_p_tail_bound(p, a, q_max=40):
    """Upper bound on the neglected terms of the truncated Hermite series."""
    p = _check_power(p)
    a = abs(float(a))
    if a >= 1.0:
        return math.inf
    return (mu_p(2 * p) - mu_p(p) ** 2) * a ** (q_max + 1) / (1.0 - a)


def _rho_series(p, a, q_max):
    c2 = np.square(_normalized_coefficients(p, q_max))
    q = np.arange(2, q_max + 1, 2)
    a = np.asarray(a, dtype=float)
    terms = c2[q] * np.power.outer(a, q)
    return terms.sum(axis=-1)


def _rho_quadrature(p, a, nodes=96):
    # Polar form of the whitened pair (u, v): Z1 = u, Z2 = a u + b v.
    # The radial integral is 2**p p!; the angular integrand is smooth
    # between its kinks at pi/2 and where a cos + b sin vanishes.
    b = math.sqrt(max(0.0, 1.0 - a * a))
    kink = math.atan2(-a, b) % math.pi
    cuts = sorted({0.0, math.pi / 2, kink, math.pi})
    xg, wg = roots_legendre(nodes)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo <= 0:
            continue
        phi = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
        f = np.abs(np.cos(phi)) ** p * np.abs(a * np.cos(phi) + b * np.sin(phi)) ** p
        total += 0.5 * (hi - lo) * np.dot(wg, f)
    second = 2.0 * total * 2.0 ** p * math.factorial(p) / (2.0 * math.pi)
    return second - mu_p(p) ** 2


def rho_p(p, a, method="series", q_max=40):
    """Covariance of ``|Z1|**p`` and ``|Z2|**p`` for standard normals with correlation ``a``.

    Parameters
    ----------
    p : int
        Power, ``p >= 1``.
    a : float or array_like
        Correlation in ``[-1, 1]``. Arrays are supported in series mode.
    method : {"series", "quadrature"}
        ``"series"`` sums the Hermite expansion ``sum_q q! a_q**2 a**q`` up to
        ``q_max`` (see :func:`rho_p_tail_bound` for the truncation error).
        ``"quadrature"`` integrates the bivariate density directly and is
        meant as an independent check.
    """
    p = _check_power(p)
    a_arr = np.asarray(a, dtype=float)
    if np.any(np.abs(a_arr) > 1.0):
        raise DomainError("correlation must satisfy |a| <= 1")
    if method == "series":
        if q_max < 2 or q_max > _Q_LIMIT:
            raise DomainError(f"q_max must lie in [2, {_Q_LIMIT}]")
        out = _rho_series(p, a_arr, int(q_max))
        # |a| = 1 gives |Z1| = |Z2|; the series converges too slowly there
        out = np.where(np.abs(a_arr) == 1.0, mu_p(2 * p) - mu_p(p) ** 2, out)
        return out if out.ndim else float(out)
    if method == "quadrature":
        if a_arr.ndim:
            return np.array([_rho_quadrature(p, float(v)) for v in a_arr.ravel()]).reshape(a_arr.shape)
        return float(_rho_quadrature(p, float(a_arr)))
    raise DomainError(f"unknown method {method!r}")
