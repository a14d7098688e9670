"""Exact simulation and power-variation inference for the 1-D stochastic heat equation."""
from .asymptotics import AsymVariance, asymptotic_variance, increment_autocorr, population_mean
from .covariance import CovMatrix, GridSpec, ModelParams, build_cov_matrix, cov_oracle, increment_cov
from .kernel import DomainError, hermite_coeff, mu_p, rho_p
from .montecarlo import MCConfig, MCReport, run_replications
from .sampler import IncrementField, Seed, factorize, reconstruct_path, sample_increments
from .statistics import EstimationResult, PVResult, averaged_pv, clt_statistic, estimate, power_variation

__version__ = "0.1.0"
