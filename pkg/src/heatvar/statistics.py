"""
Power variations, the CLT statistic and moment estimators with plug-in
delta-method confidence intervals.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .asymptotics import DEFAULT_RADIUS, asymptotic_variance, population_mean
from .covariance import ModelParams
from .kernel import DomainError, _check_power, mu_p

TARGETS = ("sigma", "theta", "viscosity_adjusted")


class EstimationError(ValueError):
    pass


def power_variation(column, p, delta_n):
    """``mean(|dX / delta_n**(1/4)|**p)`` over one spatial point."""
    p = _check_power(p)
    column = np.asarray(column, dtype=float)
    if column.size == 0:
        raise DomainError("cannot compute a power variation of an empty column")
    if delta_n <= 0:
        raise DomainError("delta_n must be positive")
    return float(np.mean(np.abs(column / delta_n ** 0.25) ** p))


@dataclass(frozen=True)
class PVResult:
    per_point: np.ndarray
    averaged: float
    p: int
    n: int
    m: int
    delta_n: float


def averaged_pv(field, p=2):
    """Power variation at every spatial point and their average."""
    p = _check_power(p)
    values = field.values
    dn = field.grid.delta_n
    per_point = np.mean(np.abs(values / dn ** 0.25) ** p, axis=0)
    return PVResult(per_point, float(np.mean(per_point)), p, field.grid.n, field.grid.m, dn)


def batch_averaged_pv(fields, p, delta_n):
    """Averaged power variations for a stack of fields shaped ``(reps, n, m)``."""
    return np.mean(np.abs(fields / delta_n ** 0.25) ** p, axis=(1, 2))


def clt_statistic(pv, params):
    """``sqrt(m n) (Vbar - population mean)`` at the true parameters."""
    return math.sqrt(pv.m * pv.n) * (pv.averaged - population_mean(pv.p, params))


@dataclass(frozen=True)
class EstimationResult:
    target: str
    point: float
    stderr: float
    ci: tuple
    level: float
    n: int
    m: int
    delta_n: float
    p: int
    known: dict = field(default_factory=dict)
    averaged: float = math.nan

    def to_dict(self):
        return {
            "target": self.target,
            "point": self.point,
            "stderr": self.stderr,
            "ci_low": self.ci[0],
            "ci_high": self.ci[1],
            "level": self.level,
            "n": self.n,
            "m": self.m,
            "delta_n": self.delta_n,
            "p": self.p,
            "known": dict(self.known),
            "averaged_pv": self.averaged,
        }


def _invert(vbar, p, known):
    """Point estimate and d(point)/d(Vbar) for the available knowledge."""
    mp = mu_p(p)
    if "theta" in known:
        theta0 = known["theta"]
        point = (vbar / mp) ** (1.0 / p) * (math.pi * theta0 / 2.0) ** 0.25
        return "sigma", point, point / (p * vbar)
    if "sigma" in known:
        sigma0 = known["sigma"]
        point = (2.0 / math.pi) * (sigma0 ** p * mp / vbar) ** (4.0 / p)
        return "theta", point, -4.0 * point / (p * vbar)
    point = math.sqrt(math.pi) * (vbar / mp) ** (2.0 / p)
    return "viscosity_adjusted", point, 2.0 * point / (p * vbar)


def _plugin_params(target, point, known):
    if target == "sigma":
        return ModelParams(known["theta"], point)
    if target == "theta":
        return ModelParams(point, known["sigma"])
    # only sigma^2 sqrt(2/theta) is identified; the variance depends on nothing else
    return ModelParams(1.0, math.sqrt(point / math.sqrt(2.0)))


def estimate(pv, known=None, alpha=0.05, radius=DEFAULT_RADIUS):
    """Estimate one parameter from an averaged power variation.

    Parameters
    ----------
    pv : PVResult
    known : dict, optional
        ``{"theta": theta0}`` estimates sigma, ``{"sigma": sigma0}``
        estimates theta, an empty dict estimates the viscosity-adjusted
        volatility ``sigma**2 * sqrt(2 / theta)``.
    alpha : float
        The interval has nominal coverage ``1 - alpha``.

    The standard error is the delta method applied to the asymptotic
    variance ``v2 / (m n)``, with ``v2`` evaluated at the estimate.
    """
    known = dict(known or {})
    unknown = set(known) - {"theta", "sigma"}
    if unknown or len(known) > 1:
        raise EstimationError(f"known must hold at most one of theta/sigma, got {sorted(known)}")
    for k, v in known.items():
        if not v > 0:
            raise EstimationError(f"known {k} must be positive, got {v!r}")
    if not 0 < alpha < 1:
        raise EstimationError("alpha must lie in (0, 1)")
    vbar = pv.averaged
    if not vbar > 0:
        raise EstimationError(f"averaged power variation must be positive, got {vbar!r}")
    target, point, slope = _invert(vbar, pv.p, known)
    v2 = asymptotic_variance(pv.p, _plugin_params(target, point, known), radius).v2
    stderr = abs(slope) * math.sqrt(v2 / (pv.m * pv.n))
    z = norm.ppf(1.0 - alpha / 2.0)
    ci = (point - z * stderr, point + z * stderr)
    return EstimationResult(target, point, stderr, ci, 1.0 - alpha, pv.n, pv.m, pv.delta_n, pv.p,
                            known, vbar)
