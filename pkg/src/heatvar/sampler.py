"""
Exact Gaussian sampling of increment fields through a Cholesky factor of
the full space-time covariance.
"""
import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .covariance import CovMatrix, GridSpec, ModelParams, build_cov_matrix, DEFAULT_SIZE_CAP

log = logging.getLogger(__name__)

PIVOT_RTOL = 1e-10
_MASK64 = (1 << 64) - 1


class FactorizationError(np.linalg.LinAlgError):
    def __init__(self, index, pivot, tol):
        super().__init__(f"matrix is indefinite: pivot {index} equals {pivot:.6e} (tolerance {-tol:.3e})")
        self.index = index
        self.pivot = pivot


@dataclass(frozen=True)
class Factorization:
    lower: np.ndarray
    clamped: int = 0


def _clamped_cholesky(a, tol):
    dim = a.shape[0]
    lower = np.zeros_like(a)
    clamped = 0
    for j in range(dim):
        row = lower[j, :j]
        pivot = a[j, j] - row @ row
        if pivot < -tol:
            raise FactorizationError(j, pivot, tol)
        if pivot <= 0.0:
            clamped += 1
            continue
        d = math.sqrt(pivot)
        lower[j, j] = d
        lower[j + 1:, j] = (a[j + 1:, j] - lower[j + 1:, :j] @ row) / d
    return lower, clamped


def factorize(cov):
    """Lower-triangular ``L`` with ``L @ L.T == cov``.

    LAPACK is tried first. If it rejects the matrix, a column-by-column
    factorization clamps pivots in ``[-tol, 0]`` to zero (counted in
    ``Factorization.clamped``) and raises :class:`FactorizationError` for
    anything more negative, with ``tol = 1e-10 * trace / dim``.
    """
    a = cov.values if isinstance(cov, CovMatrix) else np.asarray(cov, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("covariance must be a square matrix")
    if not np.array_equal(a, a.T):
        raise ValueError("covariance must be exactly symmetric")
    dim = a.shape[0]
    tol = PIVOT_RTOL * np.trace(a) / dim
    try:
        return Factorization(np.linalg.cholesky(a), 0)
    except np.linalg.LinAlgError:
        pass
    lower, clamped = _clamped_cholesky(a, tol)
    if clamped:
        log.warning("clamped %d non-positive pivot(s) to zero", clamped)
    return Factorization(lower, clamped)


@dataclass(frozen=True)
class Seed:
    """Counter-style seed: ``(root, stream)`` maps to an independent generator."""

    root: int
    stream: int = 0

    def __post_init__(self):
        for name in ("root", "stream"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self):
        ss = np.random.SeedSequence(int(self.root), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class IncrementField:
    """``values[i - 1, k]`` is the increment over ``[(i-1) dn, i dn]`` at ``xs[k]``."""

    values: np.ndarray
    grid: GridSpec
    params: ModelParams = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.m):
            raise ValueError(f"field shape {v.shape} does not match grid ({self.grid.n}, {self.grid.m})")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite entries")
        object.__setattr__(self, "values", v)

    def scaled(self, c):
        return IncrementField(c * self.values, self.grid, self.params)

    def to_csv(self, path):
        write_field_csv(path, self.grid, self.values, "dX")


def write_field_csv(dest, grid, values, column):
    """Rows ``i,k,t,x,<column>`` with shortest round-trip decimals; ``dest`` is a path or file."""
    if hasattr(dest, "write"):
        _write_rows(dest, grid, values, column)
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        _write_rows(fh, grid, values, column)


def _write_rows(fh, grid, values, column):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["i", "k", "t", "x", column])
    for i in range(grid.n):
        t = repr((i + 1) * grid.delta_n)
        for k, x in enumerate(grid.xs):
            w.writerow([i + 1, k + 1, t, repr(x), repr(float(values[i, k]))])


def _resolve_cov(grid, params, cov, size_cap):
    if cov is None:
        return build_cov_matrix(grid, params, size_cap=size_cap)
    if cov.grid != grid or cov.params != params:
        raise ValueError("supplied covariance was built for a different grid or parameters")
    return cov


def sample_increments(grid, params, seed, cov=None, size_cap=DEFAULT_SIZE_CAP):
    """Draw one increment field from its exact joint Gaussian law."""
    cov = _resolve_cov(grid, params, cov, size_cap)
    lower = cov.factor().lower
    z = seed.generator().standard_normal(cov.dim)
    return IncrementField((lower @ z).reshape(grid.n, grid.m), grid, params)


def sample_batch(cov, root, streams):
    """Fields for several streams at once, shape ``(len(streams), n, m)``.

    Each row uses the generator of ``Seed(root, stream)`` so the draw of a
    given stream never depends on which other streams share the batch.
    """
    grid = cov.grid
    lower = cov.factor().lower
    z = np.empty((len(streams), cov.dim))
    for r, s in enumerate(streams):
        z[r] = Seed(root, s).generator().standard_normal(cov.dim)
    return (z @ lower.T).reshape(len(streams), grid.n, grid.m)


def reconstruct_path(field):
    """Values ``X_{t_i}(x_k)`` for ``i = 1..n`` from increments, with ``X_0 = 0``."""
    values = field.values if isinstance(field, IncrementField) else np.asarray(field, dtype=float)
    return np.cumsum(values, axis=0)


class CSVFormatError(ValueError):
    pass


def read_field_csv(path):
    """Parse an increments CSV written by :meth:`IncrementField.to_csv`.

    The grid is recovered from the ``t`` and ``x`` columns; every ``(i, k)``
    pair must appear exactly once.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = ["i", "k", "t", "x", "dX"]
    if not rows or [c.strip() for c in rows[0]] != header:
        got = rows[0] if rows else []
        raise CSVFormatError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
    parsed = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 5:
            raise CSVFormatError(f"{path}: row {lineno} has {len(row)} columns, expected 5")
        vals = []
        for col, (name, cell) in enumerate(zip(header, row), start=1):
            try:
                vals.append(int(cell) if name in ("i", "k") else float(cell))
            except ValueError:
                raise CSVFormatError(
                    f"{path}: row {lineno}, column {col} ({name}): non-numeric value {cell!r}") from None
        parsed.append(vals)
    if not parsed:
        raise CSVFormatError(f"{path}: no data rows")
    n = max(r[0] for r in parsed)
    m = max(r[1] for r in parsed)
    if min(r[0] for r in parsed) < 1 or min(r[1] for r in parsed) < 1 or len(parsed) != n * m:
        raise CSVFormatError(f"{path}: expected a complete n x m = {n} x {m} set of (i, k) rows")
    values = np.full((n, m), np.nan)
    times = np.full(n, np.nan)
    xs = np.full(m, np.nan)
    for i, k, t, x, dx in parsed:
        if not np.isnan(values[i - 1, k - 1]):
            raise CSVFormatError(f"{path}: duplicate row for i={i}, k={k}")
        values[i - 1, k - 1] = dx
        times[i - 1] = t
        xs[k - 1] = x
    delta_n = times[0]
    if not np.allclose(times, delta_n * np.arange(1, n + 1), rtol=1e-12, atol=0):
        raise CSVFormatError(f"{path}: time column is not an equidistant grid t_i = i * delta_n")
    return IncrementField(values, GridSpec(n, float(delta_n), tuple(xs)))
