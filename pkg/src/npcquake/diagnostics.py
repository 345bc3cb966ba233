"""Density-based silhouette.

Each point gets posterior cluster probabilities from the per-cluster kernel
estimates weighted by cluster proportions. Its silhouette value is the log
ratio of the posterior of its own cluster to that of the best competitor,
scaled by the largest absolute log ratio over the sample, so values lie in
[-1, 1] and are negative for points that sit more comfortably in another
cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .cluster import Partition
from .errors import DataError, DegenerateError


@dataclass(frozen=True, eq=False)
class DbsReport:
    """Per-point silhouette with the two competing clusters (1-based)."""

    cluster: np.ndarray
    runner_up: np.ndarray
    p_cluster: np.ndarray
    p_runner_up: np.ndarray
    dbs: np.ndarray
    cluster_mean: dict
    mean: float

    def summary_rows(self):
        """Silhouette-plot data: ``(cluster, rank, index, dbs)`` with points
        sorted by decreasing dbs inside each cluster."""
        rows = []
        for j in sorted(self.cluster_mean):
            idx = np.flatnonzero(self.cluster == j)
            idx = idx[np.lexsort((idx, -self.dbs[idx]))]
            rows.extend((j, r + 1, int(i), float(self.dbs[i])) for r, i in enumerate(idx))
        return rows


def log_posteriors(points, models, priors) -> np.ndarray:
    """``(M, n)`` log posterior probabilities of each cluster at each point."""
    logp = np.vstack([np.log(pi) + m.log_density(points) for pi, m in zip(priors, models)])
    return logp - logsumexp(logp, axis=0)


def dbs(partition: Partition, models, points=None) -> DbsReport:
    """Density-based silhouette of a partition.

    Parameters
    ----------
    partition : Partition
        Labels ``1..M`` with ``M >= 2``.
    models : sequence of DensityModel
        One per cluster, in label order.
    points : array_like, optional
        Coordinates of the partitioned points, in partition order. May be
        omitted when each model was built from its cluster's final members;
        the points are then reassembled from the model samples.

    Raises
    ------
    DegenerateError
        Fewer than two clusters; the silhouette compares a point's cluster
        with an alternative and is undefined otherwise.
    """
    labels = np.asarray(partition.labels)
    M = partition.M
    if M < 2:
        raise DegenerateError("density-based silhouette needs at least 2 clusters")
    if len(models) != M:
        raise DataError(f"expected {M} cluster models, got {len(models)}")
    n = len(labels)
    counts = np.bincount(labels, minlength=M + 1)[1:]
    if (counts == 0).any():
        raise DataError("every cluster needs at least one member")
    priors = counts / n

    if points is None:
        points = np.empty((n, models[0].d))
        for j, m in enumerate(models, start=1):
            idx = np.flatnonzero(labels == j)
            if len(idx) != m.n:
                raise DataError("pass points explicitly when models are not built "
                                "from the final cluster members")
            points[idx] = m.sample
    x = np.asarray(points, dtype=float)

    logp = log_posteriors(x, models, priors)
    cols = np.arange(n)
    own = labels - 1
    lp_own = logp[own, cols]
    masked = logp.copy()
    masked[own, cols] = -np.inf
    rival = np.argmax(masked, axis=0)
    lp_rival = masked[rival, cols]

    with np.errstate(invalid="ignore"):
        ratio = lp_own - lp_rival
    # both posteriors underflowed to zero: no evidence either way
    ratio[np.isnan(ratio)] = 0.0
    finite = np.isfinite(ratio)
    scale = np.abs(ratio[finite]).max() if finite.any() else 0.0
    if not finite.all():
        # an infinite ratio dominates all finite ones
        out = np.where(finite, 0.0, np.sign(ratio))
    elif scale == 0.0:
        out = np.zeros(n)
    else:
        out = ratio / scale

    cluster_mean = {j: float(out[labels == j].mean()) for j in range(1, M + 1)}
    return DbsReport(
        cluster=labels.copy(), runner_up=rival + 1,
        p_cluster=np.exp(lp_own), p_runner_up=np.exp(lp_rival),
        dbs=out, cluster_mean=cluster_mean, mean=float(out.mean()),
    )
