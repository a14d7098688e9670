"""
Limit mean and asymptotic variance of spatially averaged power variations,
with a certified truncation of the lag series.
"""
import math
from functools import lru_cache
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import zeta

from .kernel import DomainError, mu_p, rho_p, _check_power

DEFAULT_RADIUS = 10_000
GUYON_GRID = np.linspace(0.01, 0.3, 30)


def _d2_sqrt(r):
    r = np.asarray(r, dtype=float)
    return np.sqrt(r) - 2.0 * np.sqrt(r - 1.0) + np.sqrt(r - 2.0)


def increment_autocorr(r):
    """Correlation of two unit-variance increments ``r - 1`` steps apart (stationary part).

    Equal to ``D2(sqrt, r) / 2``.
    """
    r_arr = np.asarray(r)
    if np.any(r_arr < 2) or np.any(r_arr != np.floor(r_arr)):
        raise DomainError(f"lag index r must be an integer >= 2, got {r!r}")
    out = 0.5 * _d2_sqrt(r_arr)
    return out if out.ndim else float(out)


def population_mean(p, params):
    """Limit of the averaged power variation, ``(2/(pi theta))**(p/4) sigma**p mu_p``."""
    p = _check_power(p)
    return (2.0 / (math.pi * params.theta)) ** (p / 4.0) * params.sigma ** p * mu_p(p)


def exact_mean(p, params, n):
    """Exact ``E[V_n^p(x)]`` for finite ``n`` at a single point.

    The increment variances carry the non-stationary factor
    ``1 + D2(sqrt, 2i) / 2``, so the mean differs from
    :func:`population_mean` by ``O(1 / n)``.
    """
    p = _check_power(p)
    i = np.arange(1, int(n) + 1)
    factor = 1.0 + 0.5 * _d2_sqrt(2.0 * i)
    return population_mean(p, params) * float(np.mean(factor ** (p / 2.0)))


def guyon_constant(p):
    """Largest ratio ``rho_p(a) / a**2`` over ``a`` in ``(0, 0.3]``.

    The ratio increases in ``|a|`` (all Hermite terms are non-negative), so
    the grid maximum bounds ``rho_p(a) <= C a**2`` for every ``|a| <= 0.3``.
    """
    return float(np.max(rho_p(p, GUYON_GRID) / GUYON_GRID ** 2))


@dataclass(frozen=True)
class AsymVariance:
    p: int
    theta: float
    sigma: float
    lam: float
    v2: float
    radius: int
    tail_bound: float

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


@lru_cache(maxsize=None)
def _lambda(p, radius):
    a = 0.5 * _d2_sqrt(np.arange(2, radius + 1))
    return (mu_p(2 * p) - mu_p(p) ** 2) + 2.0 * math.fsum(rho_p(p, a))


@lru_cache(maxsize=None)
def lambda_tail_bound(p, radius):
    """Bound on ``2 sum_{r > R} rho_p(D2(sqrt, r) / 2)``.

    Uses ``|D2(sqrt, r)| <= (r - 2)**-1.5 / 4`` and ``rho_p(a) <= C a**2``;
    the remaining sum is a Hurwitz zeta value.
    """
    c = guyon_constant(p)
    return 2.0 * c * float(zeta(3.0, radius - 1)) / 16.0


def asymptotic_variance(p, params, radius=DEFAULT_RADIUS):
    """Asymptotic variance of ``sqrt(mn) (Vbar - mean)``.

    ``lam = (mu_2p - mu_p**2) + 2 sum_{r=2}^{R} rho_p(D2(sqrt, r) / 2)``
    and ``v2 = (2/(pi theta))**(p/2) sigma**(2p) lam``.
    """
    p = _check_power(p)
    if int(radius) != radius or radius < 2:
        raise DomainError(f"truncation radius must be an integer >= 2, got {radius!r}")
    radius = int(radius)
    lam = _lambda(p, radius)
    v2 = (2.0 / (math.pi * params.theta)) ** (p / 2.0) * params.sigma ** (2 * p) * lam
    return AsymVariance(p, params.theta, params.sigma, lam, v2, radius, lambda_tail_bound(p, radius))


def fbm_quarter_constant(dps=30):
    """``2 + 4 sum_{l>=1} rho(l)**2`` for the increments of fBM with Hurst index 1/4.

    ``rho(l) = (|l+1|**(1/2) - 2 l**(1/2) + |l-1|**(1/2)) / 2`` is the
    autocorrelation of unit-variance fractional Gaussian noise. The infinite
    sum is evaluated with mpmath's convergence acceleration so that this
    value does not share any code with :func:`asymptotic_variance`.
    """
    import mpmath

    with mpmath.workdps(dps):
        def rho(l):
            return (mpmath.sqrt(l + 1) - 2 * mpmath.sqrt(l) + mpmath.sqrt(l - 1)) / 2

        return float(2 + 4 * mpmath.nsum(lambda l: rho(l) ** 2, [1, mpmath.inf]))
