"""Gaussian product-kernel density estimation.

The estimate at ``x`` is the sample average of products of univariate normal
densities, one per coordinate, each with its own bandwidth::

    f(x) = 1/n * sum_i prod_j phi((x_j - x_ij) / h_j) / h_j

Evaluation works in log space (log-sum-exp over the sample), so log densities
stay finite far from the data where the linear value underflows.

Summation order is fixed by sorting the sample rows lexicographically when a
model is built, which makes results independent of the input row order down
to the last bit.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateError

_LOG_2PI = math.log(2.0 * math.pi)
# kernel-matrix entries per tile; keeps a tile's scratch around 32 MB
_TILE_ENTRIES = 1 << 22


def normal_reference_bandwidth(sample) -> np.ndarray:
    """Normal-reference bandwidths ``h_j = s_j * (4 / ((d + 2) n))**(1 / (d + 4))``.

    ``s_j`` is the sample standard deviation (``ddof=1``) of coordinate ``j``.

    Raises
    ------
    DataError
        Fewer than two points.
    DegenerateError
        A coordinate has zero spread; the message names it.
    """
    x = _as_matrix(sample)
    n, d = x.shape
    if n < 2:
        raise DataError("bandwidth selection needs at least 2 points")
    s = x.std(axis=0, ddof=1)
    for j in range(d):
        if not s[j] > 0:
            raise DegenerateError(f"coordinate {j} has zero variance; bandwidth undefined")
    return s * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))


def _as_matrix(a) -> np.ndarray:
    x = np.asarray(a, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError("expected an (n, d) array")
    return x


@dataclass(frozen=True, eq=False)
class DensityModel:
    """A sample plus per-coordinate bandwidths.

    Parameters
    ----------
    sample : array_like, shape (n, d)
    bandwidths : array_like, shape (d,)
        Strictly positive and finite.
    """

    sample: np.ndarray
    bandwidths: np.ndarray

    def __post_init__(self):
        x = _as_matrix(self.sample)
        h = np.atleast_1d(np.asarray(self.bandwidths, dtype=float))
        if x.shape[0] < 1:
            raise DataError("density model needs at least one sample point")
        if not np.isfinite(x).all():
            raise DataError("sample contains non-finite values")
        if h.shape != (x.shape[1],):
            raise DataError(f"expected {x.shape[1]} bandwidths, got {h.shape[0]}")
        if not (np.isfinite(h).all() and (h > 0).all()):
            raise DataError("bandwidths must be positive and finite")
        x = x.copy()
        x.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "sample", x)
        object.__setattr__(self, "bandwidths", h)
        # canonical summation order, see module docstring
        order = np.lexsort(x.T[::-1])
        scaled = np.ascontiguousarray(x[order] / h)
        scaled.setflags(write=False)
        object.__setattr__(self, "_scaled", scaled)
        object.__setattr__(self, "_log_norm",
                           -math.log(x.shape[0]) - float(np.log(h).sum()) - 0.5 * x.shape[1] * _LOG_2PI)

    @classmethod
    def fit(cls, sample, scale: float = 1.0) -> "DensityModel":
        """Model with normal-reference bandwidths multiplied by ``scale``."""
        if not scale > 0:
            raise DataError("bandwidth scale must be positive")
        return cls(sample, normal_reference_bandwidth(sample) * scale)

    @property
    def n(self) -> int:
        return self.sample.shape[0]

    @property
    def d(self) -> int:
        return self.sample.shape[1]

    def log_density(self, queries, threads: int | None = None) -> np.ndarray:
        """Log density at each query row (``-inf`` never occurs for finite
        queries, but is allowed by the contract)."""
        q = _as_matrix(queries)
        if q.shape[1] != self.d:
            raise DataError(f"query dimension {q.shape[1]} does not match model dimension {self.d}")
        qs = q / self.bandwidths
        out = np.empty(q.shape[0])
        tile = max(1, _TILE_ENTRIES // self.n)
        starts = range(0, q.shape[0], tile)

        def work(lo):
            out[lo:lo + tile] = _log_sum_kernels(qs[lo:lo + tile], self._scaled) + self._log_norm

        workers = _n_workers(threads, len(starts))
        if workers <= 1:
            for lo in starts:
                work(lo)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(work, starts))
        return out

    def __call__(self, queries) -> np.ndarray:
        return np.exp(self.log_density(queries))


def _n_workers(threads, tasks):
    if tasks <= 1:
        return 1
    if threads is None:
        threads = os.cpu_count() or 1
    return max(1, min(int(threads), tasks))


def _log_sum_kernels(qs: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """``log sum_i exp(-|q - x_i|^2 / 2)`` for each row of ``qs``."""
    e = np.zeros((qs.shape[0], xs.shape[0]))
    for j in range(qs.shape[1]):
        diff = qs[:, j, None] - xs[None, :, j]
        e -= 0.5 * diff * diff
    top = e.max(axis=1)
    e -= top[:, None]
    np.exp(e, out=e)
    return top + np.log(e.sum(axis=1))


@dataclass(frozen=True, eq=False)
class DensitySurface:
    query_points: np.ndarray
    values: np.ndarray
    log_values: np.ndarray


def kde_evaluate(model: DensityModel, queries, threads: int | None = None) -> DensitySurface:
    """Density and log density of ``model`` at each query row."""
    q = _as_matrix(queries)
    logf = model.log_density(q, threads=threads)
    return DensitySurface(query_points=q, values=np.exp(logf), log_values=logf)


def kde_at_sample(model: DensityModel, threads: int | None = None) -> np.ndarray:
    """Densities at the model's own sample points, in sample order."""
    return kde_evaluate(model, model.sample, threads=threads).values


def regular_grid(bbox, nx: int, ny: int) -> np.ndarray:
    """``(nx * ny, 2)`` lattice over ``(xmin, xmax, ymin, ymax)``, x fastest."""
    xmin, xmax, ymin, ymax = bbox
    gx = np.linspace(xmin, xmax, nx)
    gy = np.linspace(ymin, ymax, ny)
    xx, yy = np.meshgrid(gx, gy)
    return np.column_stack([xx.ravel(), yy.ravel()])
