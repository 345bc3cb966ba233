"""Rank-based comparison of a variable across clusters.

Kruskal-Wallis omnibus test, two-sided Wilcoxon rank-sum tests for every
pair of groups, and a Bonferroni threshold. Ties receive midranks in both
tests.

The rank-sum p-value is exact (enumerated over all splits of the pooled
midranks) when the smaller group has fewer than ``EXACT_BELOW`` values, and
otherwise uses the normal approximation with tie-corrected variance and a
continuity correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _st

from .errors import DataError, DegenerateError

EXACT_BELOW = 8
P_FLOOR = 1e-15


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    df: int | None = None
    sizes: tuple = ()
    tie_correction_applied: bool = False
    method: str = ""
    note: str = ""

    __test__ = False  # not a pytest class


def format_p(p: float, digits: int = 4) -> str:
    """p-value for reports; anything below 1e-15 prints as ``<1e-15``."""
    if p < P_FLOOR:
        return "<1e-15"
    return f"{p:.{digits}g}"


def _groups(groups):
    out = [np.asarray(g, dtype=float).reshape(-1) for g in groups]
    for k, g in enumerate(out):
        if len(g) == 0:
            raise DataError(f"group {k + 1} is empty")
        if not np.isfinite(g).all():
            raise DataError(f"group {k + 1} has non-finite values")
    return out


def _tie_term(ranks_or_values) -> float:
    _, t = np.unique(ranks_or_values, return_counts=True)
    t = t.astype(float)
    return float((t ** 3 - t).sum())


def kruskal_wallis(groups) -> TestResult:
    """Kruskal-Wallis H with tie correction; chi-square reference with
    ``M - 1`` degrees of freedom.

    Raises
    ------
    DataError
        Fewer than two groups, an empty group, or ``N < M + 1``.
    DegenerateError
        All pooled values identical.
    """
    gs = _groups(groups)
    M = len(gs)
    if M < 2:
        raise DataError("Kruskal-Wallis needs at least 2 groups")
    sizes = np.array([len(g) for g in gs])
    N = int(sizes.sum())
    if N < M + 1:
        raise DataError("Kruskal-Wallis needs more observations than groups")
    pooled = np.concatenate(gs)
    ranks = _st.rankdata(pooled)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    R = np.array([ranks[bounds[k]:bounds[k + 1]].sum() for k in range(M)])
    H = 12.0 / (N * (N + 1)) * float((R ** 2 / sizes).sum()) - 3.0 * (N + 1)
    ties = _tie_term(pooled)
    corr = 1.0 - ties / (N ** 3 - N)
    if corr <= 0:
        raise DegenerateError("all values are tied; Kruskal-Wallis undefined")
    H /= corr
    p = float(_st.chi2.sf(H, M - 1))
    return TestResult(H, p, df=M - 1, sizes=tuple(int(s) for s in sizes),
                      tie_correction_applied=ties > 0, method="chi2")


def _exact_rank_sum_cdf(ranks2: np.ndarray, na: int):
    """Distribution of the sum of ``na`` values drawn without replacement from
    the integers ``ranks2`` (doubled midranks), indexed by the sum."""
    total = int(np.sort(ranks2)[-na:].sum()) if na else 0
    # counts[k, s]: number of k-subsets of the items seen so far with sum s
    counts = np.zeros((na + 1, total + 1))
    counts[0, 0] = 1.0
    for r in ranks2:
        r = int(r)
        if r <= total:
            counts[1:, r:] += counts[:-1, : total + 1 - r].copy()
    probs = counts[na] / counts[na].sum()
    return probs


def wilcoxon_rank_sum(a, b, method: str = "auto", continuity: bool = True) -> TestResult:
    """Two-sided Wilcoxon rank-sum test of ``a`` against ``b``.

    The statistic is the midrank sum of ``a``.

    Parameters
    ----------
    method : {'auto', 'exact', 'normal'}
        ``auto`` is exact below ``EXACT_BELOW`` values in the smaller group.
    continuity : bool
        Continuity correction for the normal approximation.
    """
    a, b = _groups([a, b])
    na, nb = len(a), len(b)
    N = na + nb
    pooled = np.concatenate([a, b])
    ranks = _st.rankdata(pooled)
    W = float(ranks[:na].sum())
    ties = _tie_term(pooled)
    if method == "auto":
        method = "exact" if min(na, nb) < EXACT_BELOW else "normal"
    if method not in ("exact", "normal"):
        raise ValueError("method must be 'auto', 'exact' or 'normal'")
    if np.all(pooled == pooled[0]):
        return TestResult(W, 1.0, sizes=(na, nb), tie_correction_applied=True,
                          method=method, note="all values identical; p set to 1")

    if method == "exact":
        # enumerate the smaller group; the two-sided p-value is the same
        ranks2 = np.rint(2 * ranks).astype(np.int64)
        k = min(na, nb)
        w2 = int(ranks2[:na].sum()) if na <= nb else int(ranks2[na:].sum())
        probs = _exact_rank_sum_cdf(ranks2, k)
        lower = probs[: w2 + 1].sum()
        upper = probs[w2:].sum()
        p = min(1.0, 2.0 * min(lower, upper))
    else:
        mu = na * (N + 1) / 2.0
        var = na * nb / 12.0 * ((N + 1) - ties / (N * (N - 1)))
        dev = abs(W - mu)
        if continuity:
            dev = max(dev - 0.5, 0.0)
        p = min(1.0, float(2.0 * _st.norm.sf(dev / math.sqrt(var))))
    return TestResult(W, float(p), sizes=(na, nb), tie_correction_applied=ties > 0,
                      method=method)


@dataclass(frozen=True)
class BonferroniResult:
    threshold: float
    significant: tuple


def bonferroni(p_values, alpha: float = 0.05) -> BonferroniResult:
    """Per-test threshold ``alpha / m`` and ``p < threshold`` flags."""
    p = list(p_values)
    if not p:
        raise DataError("no p-values given")
    if not 0 < alpha < 1:
        raise DataError("alpha must lie in (0, 1)")
    thr = alpha / len(p)
    return BonferroniResult(thr, tuple(bool(x < thr) for x in p))


def pairwise_wilcoxon_matrix(groups, method: str = "auto") -> np.ndarray:
    """Symmetric ``M x M`` matrix of two-sided rank-sum p-values with NaN on
    the diagonal."""
    gs = _groups(groups)
    M = len(gs)
    if M < 2:
        raise DataError("need at least 2 groups")
    out = np.full((M, M), np.nan)
    for i in range(M):
        for j in range(i + 1, M):
            out[i, j] = out[j, i] = wilcoxon_rank_sum(gs[i], gs[j], method=method).p_value
    return out


def upper_pairs(matrix) -> list[tuple[int, int, float]]:
    """``(i, j, p)`` for ``i < j`` (1-based), row-major."""
    m = np.asarray(matrix)
    return [(i + 1, j + 1, float(m[i, j])) for i in range(len(m)) for j in range(i + 1, len(m))]
