"""Agreement between two partitions of the same events.

Skill scores (proportion correct, Heidke, Hanssen-Kuipers) and the adjusted
Rand index from a contingency table, optimal matching of cluster labels,
and a day-over-day consistency sweep of clustering on a growing catalog.

Rows of a contingency table are the *forecast* partition and columns the
*observed* one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .catalog import EventCatalog
from .errors import DataError, DegenerateError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2:
            raise DataError("contingency table must be 2-D")
        if (c < 0).any():
            raise DataError("contingency counts must be nonnegative")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def contingency(forecast_labels, observed_labels, K: int | None = None) -> ContingencyTable:
    """Cross-count two labelings with labels in ``1..K``.

    ``K`` defaults to the largest label present in either list.
    """
    f = np.asarray(forecast_labels, dtype=np.int64)
    o = np.asarray(observed_labels, dtype=np.int64)
    if f.shape != o.shape:
        raise DataError(f"label lists differ in length ({len(f)} vs {len(o)})")
    if len(f) and (f.min() < 1 or o.min() < 1):
        raise DataError("labels must be 1-based")
    if K is None:
        K = int(max(f.max(initial=0), o.max(initial=0)))
    counts = np.zeros((K, K), dtype=np.int64)
    np.add.at(counts, (f - 1, o - 1), 1)
    return ContingencyTable(counts)


@dataclass(frozen=True)
class AgreementScores:
    nss: float
    hss: float
    hk: float
    ha: float | None = None


def skill_scores(table: ContingencyTable) -> AgreementScores:
    """Proportion correct, Heidke skill score and Hanssen-Kuipers score.

    ``HK = HSS * (N^2 - sum_i N(F_i) N(O_i)) / (N^2 - sum_i N(O_i)^2)``.

    Raises
    ------
    DegenerateError
        Chance agreement equals 1 (HSS undefined) or a single observed
        category (HK undefined).
    """
    c = table.counts
    if c.shape[0] != c.shape[1]:
        raise DataError("skill scores need a square table")
    N = table.total
    if N == 0:
        raise DataError("empty contingency table")
    F, O = table.row_sums, table.col_sums
    N2 = N * N
    fo = int((F * O).sum())
    oo = int((O * O).sum())
    nss = float(np.trace(c)) / N
    if fo == N2:
        raise DegenerateError("chance agreement is 1; Heidke score undefined")
    chance = fo / N2
    hss = (nss - chance) / (1.0 - chance)
    if oo == N2:
        raise DegenerateError("single observed category; Hanssen-Kuipers score undefined")
    hk = hss * (N2 - fo) / (N2 - oo)
    return AgreementScores(nss, hss, hk)


def _pairs(x):
    x = np.asarray(x, dtype=np.int64)
    return int((x * (x - 1) // 2).sum())


def adjusted_rand(table: ContingencyTable, expectation_mode: str = "standard") -> float:
    """Adjusted Rand index from pair counts.

    ``expectation_mode='standard'`` uses the Hubert-Arabie expectation
    ``|N(O)| |N(F)| / C(N, 2)``, which has mean zero under random labelings.
    ``'paper'`` uses ``|N(O)| |N(F)| / (2 N (N - 1))``, a quarter of it, kept
    to reproduce published numbers.

    Raises
    ------
    DegenerateError
        The maximum and the expectation coincide (both partitions trivial).
    """
    if expectation_mode not in ("standard", "paper"):
        raise ValueError("expectation_mode must be 'standard' or 'paper'")
    N = table.total
    if N < 2:
        raise DataError("adjusted Rand index needs at least 2 events")
    r = _pairs(table.counts)
    pf = _pairs(table.row_sums)
    po = _pairs(table.col_sums)
    if expectation_mode == "standard":
        expected = po * pf / (N * (N - 1) / 2)
    else:
        expected = 0.5 * po * pf / (N * (N - 1))
    top = 0.5 * (po + pf)
    if top == expected:
        raise DegenerateError("adjusted Rand index undefined: max(r) equals E(r)")
    return (r - expected) / (top - expected)


def match_labels(table: ContingencyTable) -> np.ndarray:
    """Relabeling of forecast clusters maximising the matched diagonal.

    Returns ``perm`` (0-based) such that forecast cluster ``i + 1`` is
    renamed ``perm[i] + 1``; ``sum_i counts[i, perm[i]]`` is maximal. Among
    optimal permutations the lexicographically smallest is returned.
    """
    c = table.counts
    K = c.shape[0]
    if c.shape != (K, K):
        raise DataError("label matching needs a square table")

    def best(rows, cols):
        if not len(rows):
            return 0
        sub = c[np.ix_(rows, cols)]
        r, q = linear_sum_assignment(sub, maximize=True)
        return int(sub[r, q].sum())

    target = best(np.arange(K), np.arange(K))
    perm = np.empty(K, dtype=np.int64)
    free = list(range(K))
    gained = 0
    for i in range(K):
        rest_rows = np.arange(i + 1, K)
        for col in free:
            cols = np.array([q for q in free if q != col], dtype=np.int64)
            if gained + int(c[i, col]) + best(rest_rows, cols) == target:
                perm[i] = col
                gained += int(c[i, col])
                free.remove(col)
                break
    return perm


def relabel(labels, perm) -> np.ndarray:
    lab = np.asarray(labels, dtype=np.int64)
    return np.asarray(perm, dtype=np.int64)[lab - 1] + 1


def compare_partitions(forecast, observed, expectation_mode="standard",
                       K: int | None = None) -> tuple[AgreementScores, np.ndarray]:
    """Match forecast labels to observed ones, then score the agreement.

    Both labelings must use the same number of clusters. Returns the scores
    and the matching permutation.
    """
    f = np.asarray(forecast, dtype=np.int64)
    o = np.asarray(observed, dtype=np.int64)
    if K is None:
        K = int(max(f.max(), o.max()))
    perm = match_labels(contingency(f, o, K))
    table = contingency(relabel(f, perm), o, K)
    s = skill_scores(table)
    ha = adjusted_rand(table, expectation_mode)
    return AgreementScores(s.nss, s.hss, s.hk, ha), perm


@dataclass(frozen=True)
class DayComparison:
    day: int
    n_common: int
    K: int
    nss: float = math.nan
    hss: float = math.nan
    hk: float = math.nan
    ha: float = math.nan
    skipped: bool = False
    reason: str = ""


def temporal_consistency(catalog: EventCatalog, cluster_fn, start_day: int = 1,
                         days: int | None = None, origin=None,
                         expectation_mode: str = "standard", min_events: int = 3):
    """Compare clusterings of the cumulative catalog on consecutive days.

    Day ``t`` covers every event before the end of day ``t`` counted from
    ``origin`` (midnight UTC of the first event by default), day 0 being the
    first. For each ``t >= start_day`` the day-``t`` partition restricted to
    events already present on day ``t - 1`` is compared with the day
    ``t - 1`` partition (forecast and observed respectively). Days whose
    cluster counts differ are skipped and logged.

    Parameters
    ----------
    cluster_fn : callable
        Maps ``(n, 2)`` coordinates to 1-based labels.

    Returns
    -------
    list of DayComparison
    """
    if len(catalog) == 0:
        raise DataError("empty catalog")
    if start_day < 1:
        raise DataError("start_day must be >= 1")
    if origin is None:
        origin = catalog.time.min().astype("datetime64[D]")
    origin = np.datetime64(origin, "ms")
    day_of = ((catalog.time - origin) // np.timedelta64(1, "D")).astype(np.int64)
    last = int(day_of.max())
    end = last if days is None else min(last, start_day + days - 1)
    coords = catalog.coords

    cache = {}

    def labels_for(t):
        if t not in cache:
            idx = np.flatnonzero(day_of <= t)
            cache[t] = (idx, None if len(idx) < min_events else np.asarray(cluster_fn(coords[idx])))
        return cache[t]

    out = []
    for t in range(start_day, end + 1):
        idx_prev, lab_prev = labels_for(t - 1)
        idx_now, lab_now = labels_for(t)
        cache.pop(t - 2, None)
        n_common = len(idx_prev)
        if lab_prev is None or lab_now is None:
            out.append(DayComparison(t, n_common, 0, skipped=True, reason="too few events"))
            continue
        # idx_prev is a prefix-closed subset of idx_now; both are sorted
        pos = np.searchsorted(idx_now, idx_prev)
        f = lab_now[pos]
        o = lab_prev
        kf, ko = int(lab_now.max()), int(o.max())
        if kf != ko:
            logger.info("day %d skipped: %d clusters vs %d on the previous day", t, kf, ko)
            out.append(DayComparison(t, n_common, max(kf, ko), skipped=True,
                                     reason="cluster count changed"))
            continue
        try:
            s, _ = compare_partitions(f, o, expectation_mode, K=kf)
        except DegenerateError as exc:
            out.append(DayComparison(t, n_common, kf, skipped=True, reason=str(exc)))
            continue
        out.append(DayComparison(t, n_common, kf, s.nss, s.hss, s.hk, s.ha))
    if not any(not d.skipped for d in out):
        raise DataError("no valid comparison days")
    return out
