"""Slip versus aftershock-density workflow.

A slip model is a complete rectilinear lon/lat lattice read from text rows
``lon, lat, slip``. Slip is interpolated bilinearly to events or to a masked
regular grid, log-transformed as ``log(k + slip)`` with ``k = 0.01`` m, and
paired with the log kernel density. Distances to the trench polyline are
great-circle kilometres.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.stats import spearmanr

from .errors import DataError
from .kde import DensityModel, regular_grid

EARTH_RADIUS_KM = 6371.0
LOG_SLIP_OFFSET = 0.01


@dataclass(frozen=True, eq=False)
class SlipField:
    """Slip in metres on a lattice; ``slip[iy, ix]`` sits at ``(lon[ix], lat[iy])``."""

    lon: np.ndarray
    lat: np.ndarray
    slip: np.ndarray

    def __post_init__(self):
        lon = np.asarray(self.lon, dtype=float)
        lat = np.asarray(self.lat, dtype=float)
        s = np.asarray(self.slip, dtype=float)
        if len(lon) < 2 or len(lat) < 2:
            raise DataError("slip lattice needs at least 2 nodes per axis")
        if np.any(np.diff(lon) <= 0) or np.any(np.diff(lat) <= 0):
            raise DataError("slip lattice axes must be strictly increasing")
        if s.shape != (len(lat), len(lon)):
            raise DataError(f"slip array shape {s.shape} does not match lattice "
                            f"({len(lat)}, {len(lon)})")
        ok = ~np.isnan(s)
        if (s[ok] < 0).any():
            raise DataError("slip must be nonnegative")
        for name, a in (("lon", lon), ("lat", lat), ("slip", s)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def node_count(self) -> int:
        return self.slip.size

    @property
    def bbox(self):
        return (self.lon[0], self.lon[-1], self.lat[0], self.lat[-1])


def load_slip(path, delimiter: str = ",", nodata: float | None = None) -> SlipField:
    """Read ``lon, lat, slip`` rows (header optional) forming a full lattice.

    Row order is free. Nodes equal to ``nodata`` are stored as NaN and
    interpolate to 0 like points outside the lattice.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"slip file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not rec or not "".join(rec).strip() or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec[:3]])
            except ValueError:
                if not rows and lineno == 1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: unparseable slip row") from None
            if len(rows[-1]) != 3:
                raise DataError(f"{path}:{lineno}: expected lon, lat, slip")
    if not rows:
        raise DataError(f"{path}: no slip rows")
    a = np.array(rows)
    gx, ix = np.unique(a[:, 0], return_inverse=True)
    gy, iy = np.unique(a[:, 1], return_inverse=True)
    if len(a) != len(gx) * len(gy):
        raise DataError(f"{path}: rows do not form a complete {len(gx)}x{len(gy)} lattice")
    slip = np.full((len(gy), len(gx)), np.nan)
    slip[iy, ix] = a[:, 2]
    if np.isnan(slip).any() and nodata is None:
        raise DataError(f"{path}: duplicate or missing lattice nodes")
    if nodata is not None:
        slip[slip == nodata] = np.nan
    if (slip[~np.isnan(slip)] < 0).any():
        raise DataError(f"{path}: negative slip")
    return SlipField(gx, gy, slip)


def write_slip(field: SlipField, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lon", "lat", "slip"])
        for iy, y in enumerate(field.lat):
            for ix, x in enumerate(field.lon):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(field.slip[iy, ix]))])


def interpolate_slip(field: SlipField, points) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear slip at ``(lon, lat)`` points.

    Returns ``(slip, outside)``; points outside the lattice, or in a cell
    touching a nodata node, get slip 0 and ``outside=True``.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    interp = RegularGridInterpolator((field.lat, field.lon), field.slip, method="linear",
                                     bounds_error=False, fill_value=np.nan)
    vals = interp(p[:, ::-1])
    outside = np.isnan(vals)
    vals[outside] = 0.0
    return vals, outside


def log_slip(slip, k: float = LOG_SLIP_OFFSET) -> np.ndarray:
    """Natural ``log(k + slip)``."""
    s = np.asarray(slip, dtype=float)
    if (s < 0).any():
        raise DataError("slip must be nonnegative")
    if not k > 0:
        raise DataError("log offset must be positive")
    return np.log(k + s)


def points_in_polygon(points, polygon) -> np.ndarray:
    """Even-odd test of each ``(x, y)`` against a closed vertex ring.

    Points on an edge (to within 1e-12 of the polygon's extent) count as
    inside.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    v = np.asarray(polygon, dtype=float)
    if len(v) >= 2 and np.array_equal(v[0], v[-1]):
        v = v[:-1]
    if len(v) < 3:
        raise DataError("polygon needs at least 3 distinct vertices")
    x, y = p[:, 0], p[:, 1]
    tol = 1e-12 * max(float(np.ptp(v[:, 0])), float(np.ptp(v[:, 1])), 1.0)
    inside = np.zeros(len(p), dtype=bool)
    edge = np.zeros(len(p), dtype=bool)
    xj, yj = v[-1]
    for xi, yi in v:
        if yi != yj:
            crosses = (yi > y) != (yj > y)
            xcross = xi + (y - yi) * (xj - xi) / (yj - yi)
            inside ^= crosses & (x < xcross)
        ex, ey = xi - xj, yi - yj
        seg2 = ex * ex + ey * ey
        t = np.clip(((x - xj) * ex + (y - yj) * ey) / seg2, 0.0, 1.0)
        edge |= np.hypot(x - (xj + t * ex), y - (yj + t * ey)) <= tol
        xj, yj = xi, yi
    return inside | edge


def polygon_area(polygon) -> float:
    v = np.asarray(polygon, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True, eq=False)
class MaskedGrid:
    nx: int
    ny: int
    bbox: tuple
    polygons: tuple
    points: np.ndarray

    @property
    def retained(self) -> int:
        return len(self.points)


def build_masked_grid(bbox, nx: int, ny: int, mask_polygons=None) -> MaskedGrid:
    """``nx x ny`` lattice over ``bbox = (lon_min, lon_max, lat_min, lat_max)``
    keeping points inside any mask polygon (all points if no mask)."""
    if nx < 2 or ny < 2:
        raise DataError("grid needs at least 2 points per axis")
    lo, hi, bo, to = bbox
    if not (lo < hi and bo < to):
        raise DataError("invalid bounding box")
    pts = regular_grid(bbox, nx, ny)
    polys = tuple(np.asarray(pg, dtype=float) for pg in (mask_polygons or ()))
    if polys:
        keep = np.zeros(len(pts), dtype=bool)
        for pg in polys:
            if abs(polygon_area(pg)) == 0.0:
                raise DataError("degenerate mask polygon (zero area)")
            keep |= points_in_polygon(pts, pg)
        pts = pts[keep]
    return MaskedGrid(nx, ny, tuple(bbox), polys, pts)


def read_polylines(path) -> list[np.ndarray]:
    """Vertex lists ``lon, lat`` one per line; blank lines separate shapes."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    shapes, cur = [], []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        s = line.strip()
        if not s:
            if cur:
                shapes.append(np.array(cur))
                cur = []
            continue
        if s.startswith("#"):
            continue
        parts = s.replace(",", " ").split()
        try:
            cur.append([float(parts[0]), float(parts[1])])
        except (ValueError, IndexError):
            if lineno == 1:
                continue  # header
            raise DataError(f"{path}:{lineno}: expected 'lon, lat'") from None
    if cur:
        shapes.append(np.array(cur))
    if not shapes:
        raise DataError(f"{path}: no vertices")
    return shapes


def haversine_km(lon1, lat1, lon2, lat2) -> np.ndarray:
    lon1, lat1, lon2, lat2 = map(np.radians, (lon1, lat1, lon2, lat2))
    a = (np.sin((lat2 - lat1) / 2) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def trench_distance(points, trench) -> np.ndarray:
    """Great-circle distance (km) from each point to a polyline.

    For each segment the closest point is found in an equirectangular
    projection centred on the query point, then measured with the haversine
    formula. The projection error is below 0.5 % for segments within a few
    hundred kilometres of the query.
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    v = np.asarray(trench, dtype=float)
    if v.ndim != 2 or len(v) < 2:
        raise DataError("trench needs at least 2 vertices")
    if (np.abs(np.diff(v, axis=0)).sum(axis=1) == 0).any():
        raise DataError("consecutive trench vertices coincide")
    best = np.full(len(p), np.inf)
    coslat = np.cos(np.radians(p[:, 1]))
    for (ax, ay), (bx, by) in zip(v[:-1], v[1:]):
        ux, uy = (ax - p[:, 0]) * coslat, ay - p[:, 1]
        dx, dy = (bx - ax) * coslat, np.full(len(p), by - ay)
        t = np.clip(-(ux * dx + uy * dy) / (dx * dx + dy * dy), 0.0, 1.0)
        d = haversine_km(p[:, 0], p[:, 1], ax + t * (bx - ax), ay + t * (by - ay))
        best = np.minimum(best, d)
    return best


@dataclass(frozen=True)
class ScatterRow:
    lon: float
    lat: float
    slip: float
    log_slip: float
    log_density: float
    cluster: int | None
    outside: bool


def scatter_table(points, field: SlipField, density: DensityModel, labels=None,
                  k: float = LOG_SLIP_OFFSET) -> list[ScatterRow]:
    """Rows pairing log-slip with log-density, one per point."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    slip, outside = interpolate_slip(field, p)
    ls = log_slip(slip, k)
    ld = density.log_density(p)
    lab = [None] * len(p) if labels is None else [int(x) for x in labels]
    if len(lab) != len(p):
        raise DataError("labels and points differ in length")
    return [ScatterRow(float(x), float(y), float(s), float(a), float(b), c, bool(o))
            for (x, y), s, a, b, c, o in zip(p, slip, ls, ld, lab, outside)]


def cluster_spearman(rows) -> dict:
    """Spearman correlation of log-slip with log-density per cluster.

    NaN for clusters where either variable is constant.
    """
    by = {}
    for r in rows:
        by.setdefault(r.cluster, []).append((r.log_slip, r.log_density))
    out = {}
    for c in sorted(by, key=lambda c: (c is None, c)):
        a = np.array(by[c])
        if len(a) < 3 or np.ptp(a[:, 0]) == 0 or np.ptp(a[:, 1]) == 0:
            out[c] = math.nan
        else:
            out[c] = float(spearmanr(a[:, 0], a[:, 1])[0])
    return out


@dataclass(frozen=True)
class ClusterSlipSummary:
    cluster: int
    n: int
    mean: float
    min: float
    max: float
    sd: float | None
    dist_min: float
    dist_max: float
    dist_mean: float


def cluster_slip_summary(labels, slip, trench_dist) -> list[ClusterSlipSummary]:
    """Slip mean/min/max/sd (``ddof=1``) and trench-distance range per cluster."""
    lab = np.asarray(labels)
    s = np.asarray(slip, dtype=float)
    d = np.asarray(trench_dist, dtype=float)
    if not (len(lab) == len(s) == len(d)):
        raise DataError("labels, slip and distances differ in length")
    out = []
    for c in np.unique(lab):
        m = lab == c
        sc, dc = s[m], d[m]
        out.append(ClusterSlipSummary(
            cluster=int(c), n=int(m.sum()), mean=float(sc.mean()), min=float(sc.min()),
            max=float(sc.max()), sd=float(sc.std(ddof=1)) if m.sum() > 1 else None,
            dist_min=float(dc.min()), dist_max=float(dc.max()), dist_mean=float(dc.mean()),
        ))
    return out
