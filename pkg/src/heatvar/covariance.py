"""
Exact covariances of space-time increments of the stochastic heat equation
started at zero, plus a numerical-integration oracle.

Notation: ``kappa = dx / sqrt(delta_n)`` and all time indices are 1-based,
so increment ``i`` covers ``[(i-1) delta_n, i delta_n]``.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .kernel import DomainError, g_kappa, h_kappa

DEFAULT_SIZE_CAP = 8192


class ResourceError(RuntimeError):
    """Raised when a requested matrix exceeds the configured size cap."""


class QuadratureError(RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class GridSpec:
    """Observation grid: ``n`` time steps of size ``delta_n`` at sorted points ``xs``."""

    n: int
    delta_n: float
    xs: tuple

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not self.delta_n > 0:
            raise DomainError(f"delta_n must be positive, got {self.delta_n!r}")
        xs = tuple(float(x) for x in self.xs)
        if not xs:
            raise DomainError("at least one spatial point is required")
        if any(not math.isfinite(x) for x in xs):
            raise DomainError("spatial points must be finite")
        if any(b <= a for a, b in zip(xs[:-1], xs[1:])):
            raise DomainError("spatial points must be strictly increasing")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "delta_n", float(self.delta_n))
        object.__setattr__(self, "xs", xs)

    @classmethod
    def uniform(cls, n, delta_n, m, dx, x0=0.0):
        return cls(n, delta_n, tuple(x0 + k * dx for k in range(m)))

    @property
    def m(self):
        return len(self.xs)

    @property
    def min_spacing(self):
        """delta_m, the smallest gap between neighbouring points (inf if m == 1)."""
        if self.m < 2:
            return math.inf
        return float(np.min(np.diff(self.xs)))

    @property
    def decorrelation_ratio(self):
        """``delta_n / delta_m**2``; 0 for a single spatial point."""
        return self.delta_n / self.min_spacing ** 2

    @property
    def times(self):
        return self.delta_n * np.arange(1, self.n + 1)

    def kappa(self, dx):
        # the only place the spatial distance gets rescaled
        return dx / math.sqrt(self.delta_n)


@dataclass(frozen=True)
class ModelParams:
    theta: float
    sigma: float

    def __post_init__(self):
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise DomainError(f"theta must be positive, got {self.theta!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")


def _check_dx(dx):
    if dx < 0:
        raise DomainError(f"dx is a distance and must be non-negative, got {dx!r}")


def _check_index(name, i, n):
    if int(i) != i or not 1 <= i <= n:
        raise DomainError(f"{name}={i!r} outside 1..{n}")
    return int(i)


class _Profile:
    """Tabulated g_kappa, h_kappa and their second differences on 0..s_max."""

    def __init__(self, kappa, theta, s_max):
        s = np.arange(s_max + 1, dtype=float)
        self.g = g_kappa(kappa, s, theta)
        self.h = h_kappa(kappa, s, theta)
        self.d2g = np.zeros_like(self.g)
        self.d2h = np.zeros_like(self.h)
        self.d2g[2:] = self.g[2:] - 2.0 * self.g[1:-1] + self.g[:-2]
        self.d2h[2:] = self.h[2:] - 2.0 * self.h[1:-1] + self.h[:-2]


def _cov_block(i, j, kappa, theta, sigma, delta_n, prof=None):
    """Vectorised covariance for integer arrays ``i``, ``j`` at fixed ``kappa``."""
    i = np.asarray(i)
    j = np.asarray(j)
    if prof is None:
        prof = _Profile(kappa, theta, int(np.max(i + j)))
    same = i == j
    lag = np.abs(i - j) + 1
    diag_g = np.where(same, prof.g[1], 0.5 * prof.d2g[np.where(same, 2, lag)])
    diag_h = np.where(same, 2.0 * prof.h[1], prof.d2h[np.where(same, 2, lag)])
    gterm = math.sqrt(2.0 / (math.pi * theta)) * (diag_g + 0.5 * prof.d2g[i + j])
    hterm = (kappa / theta) * (diag_h + prof.d2h[i + j])
    return sigma * sigma * math.sqrt(delta_n) * (gterm - hterm)


def increment_cov(i, j, dx, grid, params):
    """Cov(Delta_i X(x), Delta_j X(y)) for ``|x - y| = dx``."""
    i = _check_index("i", i, grid.n)
    j = _check_index("j", j, grid.n)
    _check_dx(dx)
    kappa = grid.kappa(dx)
    return float(_cov_block(i, j, kappa, params.theta, params.sigma, grid.delta_n))


def _check_window(i, j, b, grid):
    i = _check_index("i", i, grid.n)
    j = _check_index("j", j, grid.n)
    if j > i:
        raise DomainError(f"expected j <= i, got i={i}, j={j}")
    if int(b) != b or not 0 <= b <= j - 1:
        raise DomainError(f"b must satisfy 0 <= b <= j-1, got b={b!r}, j={j}")
    return i, j, int(b)


def _d2_pair(prof, s):
    return prof.d2g[s], prof.d2h[s]


def history_cov(i, j, b, dx, grid, params):
    """Covariance of the parts of Delta_i X(x), Delta_j X(y) driven by noise before t_b.

    Requires ``0 <= b <= j - 1`` and ``j <= i``.
    """
    i, j, b = _check_window(i, j, b, grid)
    _check_dx(dx)
    if b == 0:
        return 0.0
    th, sg = params.theta, params.sigma
    kappa = grid.kappa(dx)
    prof = _Profile(kappa, th, i + j)
    g1, h1 = _d2_pair(prof, i + j)
    g2, h2 = _d2_pair(prof, i + j - 2 * b)
    scale = sg * sg * math.sqrt(grid.delta_n)
    return float(scale * (0.5 * math.sqrt(2.0 / (math.pi * th)) * (g1 - g2) - (kappa / th) * (h1 - h2)))


def innovation_cov(i, j, b, dx, grid, params):
    """Covariance of the parts driven by noise after t_b (complement of :func:`history_cov`)."""
    i, j, b = _check_window(i, j, b, grid)
    _check_dx(dx)
    th, sg = params.theta, params.sigma
    kappa = grid.kappa(dx)
    prof = _Profile(kappa, th, i + j)
    g, h = _d2_pair(prof, i + j - 2 * b)
    if i == j:
        g += 2.0 * prof.g[1]
        h += 2.0 * prof.h[1]
    else:
        dg, dh = _d2_pair(prof, i - j + 1)
        g += dg
        h += dh
    scale = sg * sg * math.sqrt(grid.delta_n)
    return float(scale * (0.5 * math.sqrt(2.0 / (math.pi * th)) * g - (kappa / th) * h))


def cov_oracle(i, j, dx, grid, params, b=0, epsabs=1e-13):
    """Covariance by direct numerical integration over the noise time.

    After the spatial convolution of two heat kernels, each of the four
    kernel products contributes ``int G(r1 + r2 - 2s, dx) ds`` over the
    noise times ``s`` where both kernels are active (and ``s >= t_b``).
    The time integrals are done with adaptive quadrature in ``w = sqrt(u)``,
    which removes the ``u**-1/2`` singularity at ``u = 0``.
    With ``b > 0`` the result is the post-``t_b`` part, to compare with
    :func:`innovation_cov`.
    """
    i = _check_index("i", i, grid.n)
    j = _check_index("j", j, grid.n)
    _check_dx(dx)
    if int(b) != b or not 0 <= b <= min(i, j) - 1:
        raise DomainError(f"b must satisfy 0 <= b <= min(i, j) - 1, got {b!r}")
    th = params.theta
    dn = grid.delta_n
    lo = b * dn

    norm = 1.0 / math.sqrt(2.0 * math.pi * th)

    def integrand(w):
        # w G(w^2, dx) after u = w^2 and the factor 1/2 from du = -2 ds
        if w == 0.0:
            return norm if dx == 0 else 0.0
        return norm * math.exp(-dx * dx / (2.0 * th * w * w))

    total = 0.0
    worst = 0.0
    for r1, s1 in ((i * dn, 1.0), ((i - 1) * dn, -1.0)):
        for r2, s2 in ((j * dn, 1.0), ((j - 1) * dn, -1.0)):
            hi = min(r1, r2)
            if hi <= lo:
                continue
            w_lo = math.sqrt(r1 + r2 - 2.0 * hi)
            w_hi = math.sqrt(r1 + r2 - 2.0 * lo)
            val, err = integrate.quad(integrand, w_lo, w_hi, epsabs=epsabs, epsrel=1e-13, limit=200)
            total += s1 * s2 * val
            worst = max(worst, err)
    if worst > 1e-10:
        raise QuadratureError("time quadrature did not converge", worst)
    return params.sigma ** 2 * total


@dataclass
class CovMatrix:
    """Covariance of the flattened increment field, index ``(i - 1) * m + k``."""

    values: np.ndarray
    grid: GridSpec
    params: ModelParams
    _factor: Optional[object] = field(default=None, repr=False)

    @property
    def dim(self):
        return self.values.shape[0]

    def factor(self):
        if self._factor is None:
            from .sampler import factorize

            self._factor = factorize(self)
        return self._factor

    def to_csv(self, dest):
        """Full symmetric matrix, one row per line, shortest round-trip decimals."""
        if hasattr(dest, "write"):
            self._write(dest)
        else:
            with open(dest, "w", encoding="utf-8") as fh:
                self._write(fh)

    def _write(self, fh):
        for row in self.values:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def build_cov_matrix(grid, params, size_cap=DEFAULT_SIZE_CAP, validate=True):
    """Assemble the exact ``nm x nm`` increment covariance.

    Blocks are computed once per distinct spatial distance. With
    ``validate`` the matrix is factorized immediately, which both checks
    positive semidefiniteness and caches the factor for sampling.
    """
    n, m = grid.n, grid.m
    dim = n * m
    if dim > size_cap:
        raise ResourceError(f"n*m = {dim} exceeds the size cap {size_cap}; raise size_cap to proceed")
    xs = np.asarray(grid.xs)
    ii, jj = np.meshgrid(np.arange(1, n + 1), np.arange(1, n + 1), indexing="ij")
    out = np.empty((n, m, n, m))
    blocks = {}
    for k in range(m):
        for l in range(k, m):
            dx = abs(xs[l] - xs[k])
            if dx not in blocks:
                kappa = grid.kappa(dx)
                prof = _Profile(kappa, params.theta, 2 * n)
                blocks[dx] = _cov_block(ii, jj, kappa, params.theta, params.sigma, grid.delta_n, prof)
            out[:, k, :, l] = blocks[dx]
            out[:, l, :, k] = blocks[dx]
    values = out.reshape(dim, dim)
    # exact symmetry regardless of the block arithmetic
    values = 0.5 * (values + values.T)
    cov = CovMatrix(values, grid, params)
    if validate:
        cov.factor()
    return cov


def temporal_decay_bound(i, j, params, delta_n):
    """Envelope on |Cov| at dx = 0 for |i - j| >= 2 from the second-derivative bound of sqrt."""
    lag = abs(i - j)
    return params.sigma ** 2 * math.sqrt(2.0 / (math.pi * params.theta)) * math.sqrt(delta_n) * (
        0.25 * (lag - 1) ** -1.5 + 0.25 * (i + j - 2) ** -1.5)


def spatial_decay_envelope(i, j, dx, delta_n):
    """``delta_n / dx * (1 / (|i-j-1| v 1) + 1{i=j})`` without its constant."""
    return delta_n / dx * (1.0 / max(abs(abs(i - j) - 1), 1) + (1.0 if i == j else 0.0))
