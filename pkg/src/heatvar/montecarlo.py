"""
Replication harness: many seeded fields, their CLT statistics, estimator
behaviour and distributional diagnostics.
"""
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .asymptotics import DEFAULT_RADIUS, asymptotic_variance, population_mean
from .covariance import DEFAULT_SIZE_CAP, GridSpec, ModelParams, build_cov_matrix
from .kernel import _check_power
from .sampler import sample_batch
from .statistics import PVResult, batch_averaged_pv, estimate

RATIO_WARN = 0.05
# fixed chunking keeps results independent of the number of workers
CHUNK = 128


class DecorrelationWarning(UserWarning):
    pass


def ks_statistic(samples, v2):
    """Kolmogorov-Smirnov distance between the samples and N(0, v2)."""
    if not v2 > 0:
        raise ValueError(f"v2 must be positive, got {v2!r}")
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("samples must be non-empty")
    return float(stats.kstest(samples, stats.norm(scale=math.sqrt(v2)).cdf).statistic)


@dataclass
class MCConfig:
    grid: GridSpec
    params: ModelParams
    p: int = 2
    reps: int = 2000
    root_seed: int = 0
    alpha: float = 0.05
    radius: int = DEFAULT_RADIUS
    threads: int = 1
    size_cap: int = DEFAULT_SIZE_CAP

    def __post_init__(self):
        self.p = _check_power(self.p)
        if int(self.reps) != self.reps or self.reps < 2:
            raise ValueError(f"reps must be an integer >= 2, got {self.reps!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.grid.decorrelation_ratio > RATIO_WARN:
            warnings.warn(
                f"delta_n / delta_m^2 = {self.grid.decorrelation_ratio:.4g} exceeds {RATIO_WARN}; "
                "spatial points are not de-correlated and the CLT variance will be inflated",
                DecorrelationWarning, stacklevel=2)

    def to_dict(self):
        return {
            "n": self.grid.n,
            "m": self.grid.m,
            "delta_n": self.grid.delta_n,
            "xs": list(self.grid.xs),
            "theta": self.params.theta,
            "sigma": self.params.sigma,
            "p": self.p,
            "reps": self.reps,
            "seed": self.root_seed,
            "alpha": self.alpha,
            "radius": self.radius,
        }


@dataclass
class MCReport:
    config: MCConfig
    samples: np.ndarray
    averaged: np.ndarray
    empirical_mean: float
    empirical_var: float
    ks_stat: float
    v2_theoretical: float
    decorrelation_ratio: float
    estimates: dict = field(default_factory=dict)

    @property
    def coverage(self):
        """CI coverage of the theta estimator with sigma known."""
        return self.estimates["theta"]["coverage"]

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "reps": int(self.samples.size),
            "empirical_mean": self.empirical_mean,
            "empirical_var": self.empirical_var,
            "var_ratio": self.empirical_var / self.v2_theoretical,
            "ks_stat": self.ks_stat,
            "v2_theoretical": self.v2_theoretical,
            "decorrelation_ratio": self.decorrelation_ratio,
            "ratio_flag": "warn" if self.decorrelation_ratio > RATIO_WARN else "ok",
            "estimates": self.estimates,
            "coverage": self.coverage,
        }

    def samples_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("s\n")
            for s in self.samples:
                fh.write(repr(float(s)) + "\n")


def simulate_averaged_pv(cov, p, reps, root_seed, threads=1):
    """Averaged power variations for streams ``1..reps``, in stream order."""
    chunks = [range(lo, min(lo + CHUNK, reps + 1)) for lo in range(1, reps + 1, CHUNK)]

    def work(streams):
        fields = sample_batch(cov, root_seed, list(streams))
        return batch_averaged_pv(fields, p, cov.grid.delta_n)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return np.concatenate(parts)


def _estimator_summary(vbars, config, known, truth):
    g = config.grid
    points = np.empty(vbars.size)
    covered = 0
    for r, v in enumerate(vbars):
        pv = PVResult(None, float(v), config.p, g.n, g.m, g.delta_n)
        res = estimate(pv, known, config.alpha, config.radius)
        points[r] = res.point
        covered += int(res.ci[0] <= truth <= res.ci[1])
    err = points - truth
    return {
        "truth": truth,
        "mean": float(np.mean(points)),
        "bias": float(np.mean(err)),
        "rmse": float(math.sqrt(np.mean(err ** 2))),
        "coverage": float(covered / vbars.size),
    }


def run_replications(config):
    """Run ``config.reps`` seeded replications and aggregate them.

    Replication ``r`` uses ``Seed(root_seed, r)``; the report is identical
    for any thread count.
    """
    g, prm = config.grid, config.params
    cov = build_cov_matrix(g, prm, size_cap=config.size_cap)
    vbars = simulate_averaged_pv(cov, config.p, config.reps, config.root_seed, config.threads)
    mean = population_mean(config.p, prm)
    samples = math.sqrt(g.m * g.n) * (vbars - mean)
    v2 = asymptotic_variance(config.p, prm, config.radius).v2
    eta = prm.sigma ** 2 * math.sqrt(2.0 / prm.theta)
    estimates = {
        "theta": _estimator_summary(vbars, config, {"sigma": prm.sigma}, prm.theta),
        "sigma": _estimator_summary(vbars, config, {"theta": prm.theta}, prm.sigma),
        "viscosity_adjusted": _estimator_summary(vbars, config, {}, eta),
    }
    return MCReport(
        config=config,
        samples=samples,
        averaged=vbars,
        empirical_mean=float(np.mean(samples)),
        empirical_var=float(np.var(samples, ddof=1)),
        ks_stat=ks_statistic(samples, v2),
        v2_theoretical=v2,
        decorrelation_ratio=g.decorrelation_ratio,
        estimates=estimates,
    )
