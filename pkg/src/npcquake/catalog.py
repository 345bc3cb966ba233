"""Event catalogs: loading, validation and space/time/magnitude selection.

Catalogs are read from delimited text with a header row. Which column holds
which quantity is given by a column map, so the same loader reads SSN, USGS
or synthetic layouts::

    >>> cmap = ColumnMap.parse("lon=longitude,lat=latitude,mag=ml,time=origin")

Longitudes are signed degrees with west negative. Times are stored as UTC
``datetime64[ms]``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

TIME_UNIT = "ms"
REQUIRED_KEYS = ("lon", "lat", "mag", "time")
OPTIONAL_KEYS = ("id", "depth")


@dataclass(frozen=True)
class Event:
    id: int
    lon: float
    lat: float
    magnitude: float
    time: np.datetime64
    depth: float | None = None


@dataclass(frozen=True)
class ColumnMap:
    """Names of the header columns holding each event attribute."""

    lon: str = "lon"
    lat: str = "lat"
    mag: str = "mag"
    time: str = "time"
    id: str | None = "id"
    depth: str | None = "depth"

    @classmethod
    def parse(cls, text: str) -> "ColumnMap":
        """Parse ``"lon=<col>,lat=<col>,mag=<col>,time=<col>[,id=..][,depth=..]"``.

        Keys not given fall back to columns of the same name for ``id`` and
        ``depth`` (used only if present in the file).
        """
        mapping = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            key, sep, col = item.partition("=")
            key = key.strip()
            if not sep or not col.strip():
                raise DataError(f"bad column map entry {item!r}; expected key=column")
            if key not in REQUIRED_KEYS + OPTIONAL_KEYS:
                raise DataError(f"unknown column map key {key!r}")
            mapping[key] = col.strip()
        missing = [k for k in REQUIRED_KEYS if k not in mapping]
        if missing:
            raise DataError(f"column map lacks {', '.join(missing)}")
        return cls(**mapping)


@dataclass(frozen=True, eq=False)
class EventCatalog:
    """An immutable, ordered collection of events.

    Attributes are parallel numpy arrays; ``depth`` holds NaN where a depth
    was not reported. ``rejected`` lists ``(line_number, reason)`` for input
    rows that were skipped during loading.
    """

    ids: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    mag: np.ndarray
    time: np.ndarray
    depth: np.ndarray
    provenance: str = ""
    rejected: tuple = field(default=())

    def __post_init__(self):
        n = len(self.ids)
        for name in ("lon", "lat", "mag", "time", "depth"):
            if len(getattr(self, name)) != n:
                raise DataError(f"catalog column {name!r} has wrong length")
        if len(np.unique(self.ids)) != n:
            raise DataError("event ids are not unique")
        if np.isnan(self.lon).any() or np.isnan(self.lat).any():
            raise DataError("catalog contains NaN coordinates")
        for arr in (self.ids, self.lon, self.lat, self.mag, self.time, self.depth):
            arr.setflags(write=False)

    @classmethod
    def from_arrays(cls, lon, lat, mag, time, ids=None, depth=None,
                    provenance="") -> "EventCatalog":
        lon = np.asarray(lon, dtype=float)
        n = len(lon)
        ids = np.arange(1, n + 1) if ids is None else np.asarray(ids, dtype=np.int64)
        depth = np.full(n, np.nan) if depth is None else np.asarray(depth, dtype=float)
        time = np.asarray(time).astype(f"datetime64[{TIME_UNIT}]")
        return cls(ids=ids.astype(np.int64), lon=lon, lat=np.asarray(lat, dtype=float),
                   mag=np.asarray(mag, dtype=float), time=time, depth=depth,
                   provenance=provenance)

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.events)

    def __eq__(self, other):
        if not isinstance(other, EventCatalog):
            return NotImplemented
        return (np.array_equal(self.ids, other.ids)
                and np.array_equal(self.lon, other.lon)
                and np.array_equal(self.lat, other.lat)
                and np.array_equal(self.mag, other.mag)
                and np.array_equal(self.time, other.time)
                and np.array_equal(self.depth, other.depth, equal_nan=True))

    __hash__ = None

    @property
    def events(self) -> list[Event]:
        return [
            Event(int(i), float(x), float(y), float(m), t, None if math.isnan(d) else float(d))
            for i, x, y, m, t, d in zip(self.ids, self.lon, self.lat, self.mag,
                                        self.time, self.depth)
        ]

    @property
    def coords(self) -> np.ndarray:
        """``(n, 2)`` array of (lon, lat)."""
        return np.column_stack([self.lon, self.lat])

    def subset(self, selector) -> "EventCatalog":
        """Catalog restricted to a boolean mask or index array, order kept."""
        sel = np.asarray(selector)
        if sel.dtype == bool:
            sel = np.flatnonzero(sel)
        else:
            sel = np.sort(sel)
        return EventCatalog(
            ids=self.ids[sel], lon=self.lon[sel], lat=self.lat[sel], mag=self.mag[sel],
            time=self.time[sel], depth=self.depth[sel], provenance=self.provenance,
        )


@dataclass(frozen=True)
class SelectionWindow:
    """Closed selection box in lon/lat/time plus a magnitude floor.

    Any bound left as ``None`` is unbounded.
    """

    lon_min: float | None = None
    lon_max: float | None = None
    lat_min: float | None = None
    lat_max: float | None = None
    mag_min: float = -math.inf
    t_start: np.datetime64 | None = None
    t_end: np.datetime64 | None = None

    def __post_init__(self):
        for lo, hi, axis in ((self.lon_min, self.lon_max, "lon"),
                             (self.lat_min, self.lat_max, "lat"),
                             (self.t_start, self.t_end, "time")):
            if lo is not None and hi is not None and not lo < hi:
                raise DataError(f"selection window: {axis} minimum must be below maximum")
        if math.isnan(self.mag_min):
            raise DataError("selection window: mag_min is NaN")

    def mask(self, catalog: EventCatalog) -> np.ndarray:
        keep = catalog.mag >= self.mag_min
        if self.lon_min is not None:
            keep &= catalog.lon >= self.lon_min
        if self.lon_max is not None:
            keep &= catalog.lon <= self.lon_max
        if self.lat_min is not None:
            keep &= catalog.lat >= self.lat_min
        if self.lat_max is not None:
            keep &= catalog.lat <= self.lat_max
        if self.t_start is not None:
            keep &= catalog.time >= np.datetime64(self.t_start, TIME_UNIT)
        if self.t_end is not None:
            keep &= catalog.time <= np.datetime64(self.t_end, TIME_UNIT)
        return keep


def filter_catalog(catalog: EventCatalog, window: SelectionWindow) -> EventCatalog:
    """Events inside ``window``; order and ids are preserved.

    An empty selection is returned as an empty catalog, not an error.
    """
    return catalog.subset(window.mask(catalog))


def parse_time(text: str) -> np.datetime64:
    """Parse an ISO-8601 timestamp to UTC ``datetime64[ms]``.

    Naive timestamps are taken as UTC; a trailing ``Z`` or numeric offset is
    honoured.
    """
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError:
        raise DataError(f"unparseable time {text!r}") from None
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(dt, TIME_UNIT)


def format_time(t: np.datetime64) -> str:
    return np.datetime_as_string(np.datetime64(t, TIME_UNIT), unit=TIME_UNIT) + "Z"


def _parse_float(text: str, what: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataError(f"{what} {text!r} is not a number") from None
    if not math.isfinite(value):
        raise DataError(f"{what} {text!r} is not finite")
    return value


def _parse_row(row: dict, cmap: ColumnMap, has_id: bool, has_depth: bool):
    def get(col, what):
        value = row.get(col)
        if value is None or value.strip() == "":
            raise DataError(f"missing {what}")
        return value

    lon = _parse_float(get(cmap.lon, "lon"), "lon")
    lat = _parse_float(get(cmap.lat, "lat"), "lat")
    mag = _parse_float(get(cmap.mag, "magnitude"), "magnitude")
    t = parse_time(get(cmap.time, "time"))
    if not -180.0 <= lon <= 180.0:
        raise DataError(f"lon={lon} outside [-180, 180]")
    if not -90.0 <= lat <= 90.0:
        raise DataError(f"lat={lat} outside [-90, 90]")
    depth = math.nan
    if has_depth:
        raw = (row.get(cmap.depth) or "").strip()
        if raw:
            depth = _parse_float(raw, "depth")
    eid = None
    if has_id:
        raw = get(cmap.id, "id")
        try:
            eid = int(raw)
        except ValueError:
            raise DataError(f"id {raw!r} is not an integer") from None
    return eid, lon, lat, mag, t, depth


def load_catalog(path, columns: ColumnMap | str | None = None, on_error: str = "fail",
                 delimiter: str = ",") -> EventCatalog:
    """Read an event catalog from delimited text with a header.

    Parameters
    ----------
    path : path-like
        Input file.
    columns : ColumnMap or str, optional
        Column mapping; a string is parsed with :meth:`ColumnMap.parse`.
        Defaults to columns named ``id, lon, lat, depth, mag, time``.
    on_error : {'fail', 'skip'}
        What to do with a row that cannot be parsed or validated. Skipped rows
        are recorded in ``EventCatalog.rejected`` with their line numbers.
    delimiter : str
        Field separator.

    Raises
    ------
    DataError
        Missing file, missing mapped column, duplicate ids, or (with
        ``on_error='fail'``) the first bad row, named by line number.
    """
    if on_error not in ("fail", "skip"):
        raise ValueError("on_error must be 'fail' or 'skip'")
    if columns is None:
        cmap = ColumnMap()
    elif isinstance(columns, str):
        cmap = ColumnMap.parse(columns)
    else:
        cmap = columns
    path = Path(path)
    if not path.is_file():
        raise DataError(f"catalog file not found: {path}")

    with path.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter, skipinitialspace=True)
        header = reader.fieldnames or []
        for key in REQUIRED_KEYS:
            col = getattr(cmap, key)
            if col not in header:
                raise DataError(f"{path}: column {col!r} (for {key}) not in header")
        has_id = cmap.id is not None and cmap.id in header
        has_depth = cmap.depth is not None and cmap.depth in header

        parsed, rejected = [], []
        for row in reader:
            if not any((v or "").strip() for v in row.values() if isinstance(v, str)):
                continue
            line = reader.line_num
            try:
                parsed.append(_parse_row(row, cmap, has_id, has_depth))
            except DataError as exc:
                if on_error == "fail":
                    raise DataError(f"{path}:{line}: {exc}") from None
                rejected.append((line, str(exc)))
                logger.warning("%s:%d: skipped row: %s", path, line, exc)

    n = len(parsed)
    if has_id:
        ids = np.array([p[0] for p in parsed], dtype=np.int64)
    else:
        ids = np.arange(1, n + 1, dtype=np.int64)
    cols = list(zip(*[p[1:] for p in parsed])) if parsed else [[]] * 5
    catalog = EventCatalog(
        ids=ids,
        lon=np.array(cols[0], dtype=float),
        lat=np.array(cols[1], dtype=float),
        mag=np.array(cols[2], dtype=float),
        time=np.array(cols[3], dtype=f"datetime64[{TIME_UNIT}]"),
        depth=np.array(cols[4], dtype=float),
        provenance=str(path),
        rejected=tuple(rejected),
    )
    return catalog


def write_catalog(catalog: EventCatalog, path, extra: dict[str, Sequence] | None = None):
    """Write ``catalog`` as CSV readable by :func:`load_catalog` with the
    default column map. ``extra`` adds named columns (e.g. true labels)."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "lon", "lat", "depth", "mag", "time", *extra])
        for k in range(len(catalog)):
            d = catalog.depth[k]
            w.writerow([
                int(catalog.ids[k]), repr(float(catalog.lon[k])), repr(float(catalog.lat[k])),
                "" if math.isnan(d) else repr(float(d)), repr(float(catalog.mag[k])),
                format_time(catalog.time[k]), *(v[k] for v in extra.values()),
            ])


def concat(catalogs: Iterable[EventCatalog], provenance: str = "") -> EventCatalog:
    cats = list(catalogs)
    return EventCatalog(
        ids=np.concatenate([c.ids for c in cats]),
        lon=np.concatenate([c.lon for c in cats]),
        lat=np.concatenate([c.lat for c in cats]),
        mag=np.concatenate([c.mag for c in cats]),
        time=np.concatenate([c.time for c in cats]),
        depth=np.concatenate([c.depth for c in cats]),
        provenance=provenance,
    )
