"""Planted synthetic catalogs, slip fields and trenches.

Events come from an isotropic Gaussian mixture whose components sit on the
vertices of a regular polygon with a fixed side length, so neighbouring
blobs are ``separation`` standard deviations apart. Each blob receives
arrivals from its own homogeneous Poisson process; given the number of
events, arrival times are uniform over the observation period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalog import EventCatalog
from .errors import DataError

ORIGIN = np.datetime64("2010-02-27T06:34:00", "ms")
MS_PER_DAY = 86_400_000


@dataclass(frozen=True)
class MixtureSpec:
    blobs: int = 5
    n: int = 1000
    sigma: float = 0.1
    separation: float = 10.0
    center: tuple = (-72.5, -36.0)
    days: float = 60.0
    mag_min: float = 2.0
    b_value: float = 1.0

    def __post_init__(self):
        if self.blobs < 1:
            raise DataError("need at least one blob")
        if self.n < self.blobs:
            raise DataError("need at least one event per blob")
        if not (self.sigma > 0 and self.separation > 0 and self.days > 0):
            raise DataError("sigma, separation and days must be positive")


def blob_centers(blobs: int, sigma: float, separation: float, center=(0.0, 0.0)) -> np.ndarray:
    """Vertices of a regular ``blobs``-gon with side ``separation * sigma``."""
    cx, cy = center
    if blobs == 1:
        return np.array([[cx, cy]], dtype=float)
    side = separation * sigma
    radius = side / (2.0 * math.sin(math.pi / blobs))
    ang = math.pi / 2 + 2.0 * math.pi * np.arange(blobs) / blobs
    return np.column_stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)])


def gaussian_blobs(spec: MixtureSpec, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points, true labels (1-based) and arrival offsets in days."""
    centers = blob_centers(spec.blobs, spec.sigma, spec.separation, spec.center)
    counts = np.full(spec.blobs, spec.n // spec.blobs)
    counts[: spec.n % spec.blobs] += 1
    labels = np.repeat(np.arange(1, spec.blobs + 1), counts)
    pts = centers[labels - 1] + spec.sigma * rng.standard_normal((spec.n, 2))
    days = rng.uniform(0.0, spec.days, spec.n)
    return pts, labels, days


def synth_catalog(spec: MixtureSpec, seed: int) -> tuple[EventCatalog, np.ndarray]:
    """Catalog sorted by time, plus the planted blob label of each event."""
    rng = np.random.default_rng(seed)
    pts, labels, days = gaussian_blobs(spec, rng)
    beta = spec.b_value * math.log(10.0)
    mags = np.round(spec.mag_min + rng.exponential(1.0 / beta, spec.n), 1)
    depth = np.round(rng.uniform(5.0, 40.0, spec.n), 1)
    order = np.argsort(days, kind="stable")
    offs = np.round(days[order] * MS_PER_DAY).astype(np.int64)
    cat = EventCatalog.from_arrays(
        lon=pts[order, 0], lat=pts[order, 1], mag=mags[order],
        time=ORIGIN + offs.astype("timedelta64[ms]"),
        depth=depth[order], provenance=f"synthetic seed={seed}",
    )
    return cat, labels[order]


def synth_slip(spec: MixtureSpec, patches, nx: int = 81, ny: int = 81, width: float = 1.5,
               margin: float = 4.0, floor: float = 1e-3):
    """Lattice slip model with Gaussian patches centred on chosen blobs.

    Parameters
    ----------
    patches : sequence of (blob, peak_m)
        1-based blob index and peak slip in metres.
    width : float
        Patch standard deviation in units of ``spec.sigma``.
    floor : float
        Slip below this value is set to exactly 0 (outside the rupture).

    Returns
    -------
    lon nodes, lat nodes, slip array of shape (ny, nx)
    """
    centers = blob_centers(spec.blobs, spec.sigma, spec.separation, spec.center)
    pad = margin * spec.sigma
    gx = np.linspace(centers[:, 0].min() - pad, centers[:, 0].max() + pad, nx)
    gy = np.linspace(centers[:, 1].min() - pad, centers[:, 1].max() + pad, ny)
    xx, yy = np.meshgrid(gx, gy)
    slip = np.zeros_like(xx)
    w = width * spec.sigma
    for blob, peak in patches:
        if not 1 <= blob <= spec.blobs:
            raise DataError(f"slip patch on nonexistent blob {blob}")
        if peak < 0:
            raise DataError("slip peak must be nonnegative")
        cx, cy = centers[blob - 1]
        slip += peak * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * w * w))
    slip[slip < floor] = 0.0
    return gx, gy, slip


def synth_trench(spec: MixtureSpec, offset: float = 5.0) -> np.ndarray:
    """Straight north-south trench ``offset`` sigmas west of every blob."""
    centers = blob_centers(spec.blobs, spec.sigma, spec.separation, spec.center)
    lon = centers[:, 0].min() - offset * spec.sigma
    pad = 6.0 * spec.sigma
    return np.array([[lon, centers[:, 1].min() - pad], [lon, centers[:, 1].max() + pad]])
