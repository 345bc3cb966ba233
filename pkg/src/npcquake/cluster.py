"""Level-set clustering over a Delaunay graph.

For a decreasing sequence of density thresholds ``alpha`` the sample points
with estimated density at least ``alpha`` are split into connected groups
using the Delaunay graph restricted to those points. Following the groups
across thresholds gives a tree whose leaves are the density modes. The
largest group each mode owns before it merges with another one is that
mode's *core*; the remaining points are then allocated to cores by the
likelihood ratio of per-core kernel estimates.

Groups smaller than ``min_size`` points are treated as noise: they are not
counted as modes and never become tree nodes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .catalog import EventCatalog
from .errors import DataError
from .kde import DensityModel, _log_sum_kernels, kde_at_sample, normal_reference_bandwidth
from .topology import TriangulationGraph, connected_components, delaunay

logger = logging.getLogger(__name__)

POLICIES = ("static", "sequential", "batch")
_POLICY_ALIASES = {"seq": "sequential", "sequential-update": "sequential",
                   "batch-by-density": "batch"}


@dataclass(frozen=True)
class AlphaGrid:
    levels: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float).reshape(-1)
        if len(lv) == 0:
            raise DataError("alpha grid is empty")
        if lv[0] < 0 or np.any(np.diff(lv) <= 0):
            raise DataError("alpha grid must be nonnegative and strictly increasing")
        object.__setattr__(self, "levels", lv)

    def __len__(self):
        return len(self.levels)


def density_quantile_grid(densities, n_levels: int = 99) -> AlphaGrid:
    """Alpha levels at the density quantiles ``k / (n_levels + 1)``,
    ``k = 1..n_levels``. Repeated quantiles are merged."""
    if n_levels < 1:
        raise DataError("need at least one alpha level")
    q = np.arange(1, n_levels + 1) / (n_levels + 1)
    return AlphaGrid(np.unique(np.quantile(np.asarray(densities, dtype=float), q)))


@dataclass
class TreeNode:
    id: int
    level: int
    alpha: float
    members: np.ndarray
    parent: int = -1
    children: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass
class ClusterTree:
    """Connected groups per alpha level, linked to the group containing them
    at the next lower level."""

    levels: np.ndarray
    nodes: list

    @property
    def leaves(self) -> list:
        return [nd for nd in self.nodes if not nd.children]

    @property
    def roots(self) -> list:
        return [nd for nd in self.nodes if nd.parent < 0]

    def rows(self):
        """``(node id, parent id, level alpha, size)`` per node."""
        return [(nd.id, nd.parent, nd.alpha, nd.size) for nd in self.nodes]


@dataclass(frozen=True)
class ModeFunction:
    """Number of groups ``m`` against retained sample fraction ``p``, one
    entry per alpha level, ordered by increasing ``p``."""

    alpha: np.ndarray
    p: np.ndarray
    m: np.ndarray

    @property
    def increments(self) -> int:
        """Total positive increments of ``m(p)`` with ``m(0) = m(1) = 0``."""
        steps = np.diff(np.concatenate([[0], self.m, [0]]))
        return int(steps[steps > 0].sum())


def _level_labels(graph, densities, alpha, min_size):
    """Per-event group label at ``alpha`` (-1 outside or in a noise group)."""
    members = np.flatnonzero(densities >= alpha)
    lab = np.full(len(densities), -1, dtype=np.int64)
    if len(members) == 0:
        return lab, 0
    comp = connected_components(graph, members)
    sizes = np.bincount(comp.labels, minlength=comp.component_count)
    keep = sizes >= min_size
    newid = np.cumsum(keep) - 1
    good = keep[comp.labels]
    lab[comp.member_indices[good]] = newid[comp.labels[good]]
    return lab, int(keep.sum())


def _step_events(lower, upper, m_lower):
    """Births and merge excess between a lower level and the next higher one."""
    child_parent = {}
    for c in np.unique(upper[upper >= 0]):
        i = np.flatnonzero(upper == c)[0]
        child_parent[c] = lower[i]
    nchild = np.bincount(np.fromiter(child_parent.values(), dtype=np.int64, count=len(child_parent)),
                         minlength=m_lower) if child_parent else np.zeros(m_lower, dtype=np.int64)
    births = int((nchild == 0).sum())
    excess = int(np.maximum(nchild - 1, 0).sum())
    return births, excess


def build_mode_function(densities, graph: TriangulationGraph, grid: AlphaGrid,
                        min_size: int = 1, refine: bool = True):
    """Sweep the alpha grid and build the mode function and cluster tree.

    When a mode appears between two adjacent levels at which two other groups
    also merge, the step count of ``m(p)`` would hide the new mode. With
    ``refine`` such steps are split by inserting intermediate levels taken
    from the sample densities until every step is a pure birth or merge;
    the returned tree then has exactly as many leaves as ``m(p)`` has
    positive increments.

    Returns
    -------
    (ModeFunction, ClusterTree)
    """
    f = np.asarray(densities, dtype=float)
    if len(f) != graph.vertex_count:
        raise DataError("densities and graph disagree on the number of points")
    levels = np.asarray(grid.levels, dtype=float)
    top = f.max()
    if levels[-1] > top:
        logger.warning("alpha grid exceeds the maximum sample density; clamping")
        levels = np.unique(np.minimum(levels, top))

    levels = list(levels)
    labs = [_level_labels(graph, f, a, min_size) for a in levels]
    fsorted = np.unique(f)

    while refine:
        inserted = False
        k = len(levels) - 2
        while k >= 0:
            births, excess = _step_events(labs[k][0], labs[k + 1][0], labs[k][1])
            if births and excess:
                lo, hi = levels[k], levels[k + 1]
                between = fsorted[(fsorted > lo) & (fsorted < hi)]
                if len(between):
                    mid = float(between[len(between) // 2])
                    levels.insert(k + 1, mid)
                    labs.insert(k + 1, _level_labels(graph, f, mid, min_size))
                    inserted = True
                    k += 1
                    continue
                logger.warning("tied densities at alpha=%g: mode birth and merge "
                               "cannot be separated", hi)
            k -= 1
        if not inserted:
            break

    levels = np.asarray(levels)
    n = len(f)
    p = np.array([(f >= a).sum() / n for a in levels])
    m = np.array([c for _, c in labs])

    nodes = []
    ids_by_level = []
    for k, (lab, count) in enumerate(labs):
        ids = []
        for c in range(count):
            nd = TreeNode(id=len(nodes), level=k, alpha=float(levels[k]),
                          members=np.flatnonzero(lab == c))
            nodes.append(nd)
            ids.append(nd.id)
        ids_by_level.append(ids)
    for k in range(len(labs) - 1):
        lower = labs[k][0]
        for nid in ids_by_level[k + 1]:
            nd = nodes[nid]
            parent = nodes[ids_by_level[k][lower[nd.members[0]]]]
            nd.parent = parent.id
            parent.children.append(nd.id)

    mf = ModeFunction(alpha=levels[::-1].copy(), p=p[::-1].copy(), m=m[::-1].copy())
    return mf, ClusterTree(levels=levels, nodes=nodes)


def extract_cores(tree: ClusterTree, densities=None) -> list[np.ndarray]:
    """One core per leaf: the leaf's largest ancestor reached before the
    branch merges with another one.

    Cores are ordered by decreasing peak density when ``densities`` are given
    (otherwise by decreasing leaf alpha), ties broken by smallest member.
    """
    cores = []
    for leaf in tree.leaves:
        node = leaf
        while node.parent >= 0 and len(tree.nodes[node.parent].children) == 1:
            node = tree.nodes[node.parent]
        cores.append((leaf, node.members))
    if densities is not None:
        f = np.asarray(densities)
        key = [(-f[c].max(), int(c.min())) for _, c in cores]
    else:
        key = [(-leaf.alpha, int(c.min())) for leaf, c in cores]
    order = sorted(range(len(cores)), key=key.__getitem__)
    return [cores[i][1] for i in order]


@dataclass(frozen=True, eq=False)
class Partition:
    """Final cluster labels ``1..M`` with core membership flags.

    ``ties`` lists the points whose allocation ratio tied between clusters
    (resolved toward the lowest cluster id).
    """

    labels: np.ndarray
    core_flag: np.ndarray
    M: int
    ties: tuple = ()

    def __post_init__(self):
        for arr in (self.labels, self.core_flag):
            arr.setflags(write=False)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.labels == j)


def _normalize_policy(policy):
    policy = _POLICY_ALIASES.get(policy, policy)
    if policy not in POLICIES:
        raise DataError(f"unknown allocation policy {policy!r}")
    return policy


def _best(logf):
    """Cluster maximising ``f_j / max_{k != j} f_k`` per column of ``logf``.

    Returns 0-based winners and a tie mask."""
    M = logf.shape[0]
    if M == 1:
        return np.zeros(logf.shape[1], dtype=np.int64), np.zeros(logf.shape[1], dtype=bool)
    ratio = np.empty_like(logf)
    for j in range(M):
        others = np.delete(logf, j, axis=0).max(axis=0)
        with np.errstate(invalid="ignore"):
            ratio[j] = logf[j] - others
    ratio = np.nan_to_num(ratio, nan=-np.inf)
    win = np.argmax(ratio, axis=0)
    srt = np.sort(ratio, axis=0)
    tie = srt[-1] == srt[-2]
    return win, tie


def allocate(cores, points, bandwidths, policy: str = "batch", densities=None,
             n_batches: int = 10) -> Partition:
    """Assign non-core points to clusters by likelihood ratio.

    Parameters
    ----------
    cores : sequence of index arrays
        Disjoint, nonempty; core ``j`` becomes cluster ``j + 1``.
    points : array_like, shape (n, d)
    bandwidths : array_like, shape (d,)
        Used for every per-cluster kernel estimate.
    policy : {'static', 'sequential', 'batch'}
        ``static`` keeps the core estimates fixed. ``sequential`` allocates
        points one at a time in decreasing density order and updates the
        receiving cluster's estimate after each. ``batch`` does the same per
        density decile.
    densities : array_like, optional
        Overall density at each point, defining the allocation order. Computed
        from ``points`` and ``bandwidths`` if omitted.
    """
    policy = _normalize_policy(policy)
    x = np.asarray(points, dtype=float)
    n = len(x)
    h = np.asarray(bandwidths, dtype=float)
    cores = [np.asarray(c, dtype=np.int64) for c in cores]
    if not cores:
        raise DataError("no cluster cores")
    for j, c in enumerate(cores):
        if len(c) == 0:
            raise DataError(f"core {j + 1} is empty")
    flat = np.concatenate(cores)
    if len(np.unique(flat)) != len(flat):
        raise DataError("cluster cores overlap")

    labels = np.zeros(n, dtype=np.int64)
    core_flag = np.zeros(n, dtype=bool)
    for j, c in enumerate(cores):
        labels[c] = j + 1
        core_flag[c] = True
    M = len(cores)
    rest = np.flatnonzero(~core_flag)
    if M == 1 or len(rest) == 0:
        labels[rest] = 1
        return Partition(labels, core_flag, M)

    if densities is None:
        densities = kde_at_sample(DensityModel(x, h))
    f = np.asarray(densities, dtype=float)
    order = rest[np.lexsort((rest, -f[rest]))]

    xs = x / h
    counts = np.array([len(c) for c in cores], dtype=float)
    # log of the unnormalised kernel sum of each cluster at each pending point
    logS = np.vstack([_log_sum_kernels(xs[order], xs[c]) for c in cores])
    ties = []

    def assign(cols):
        logf = logS[:, cols] - np.log(counts)[:, None]
        win, tie = _best(logf)
        labels[order[cols]] = win + 1
        ties.extend(int(i) for i in order[cols][tie])
        return win

    if policy == "static":
        assign(np.arange(len(order)))
    elif policy == "sequential":
        for k in range(len(order)):
            j = int(assign(np.array([k]))[0])
            counts[j] += 1
            if k + 1 < len(order):
                tail = slice(k + 1, None)
                logS[j, tail] = np.logaddexp(logS[j, tail],
                                             _log_kernel_row(xs[order[tail]], xs[order[k]]))
    else:
        for cols in np.array_split(np.arange(len(order)), min(n_batches, len(order))):
            win = assign(cols)
            later = np.arange(cols[-1] + 1, len(order))
            if len(later) == 0:
                break
            for j in np.unique(win):
                added = order[cols[win == j]]
                counts[j] += len(added)
                logS[j, later] = np.logaddexp(logS[j, later],
                                              _log_sum_kernels(xs[order[later]], xs[added]))
    if ties:
        logger.info("%d allocation ties resolved toward the lower cluster id", len(ties))
    return Partition(labels, core_flag, M, tuple(sorted(ties)))


def _log_kernel_row(qs, x):
    d = qs - x
    return -0.5 * np.einsum("ij,ij->i", d, d)


@dataclass(frozen=True)
class ClusterOptions:
    bandwidth_scale: float = 1.0
    alpha_levels: int = 99
    policy: str = "batch"
    min_core: int = 3
    bandwidths: tuple | None = None
    threads: int | None = None


@dataclass(eq=False)
class ClusterResult:
    partition: Partition
    tree: ClusterTree
    mode_function: ModeFunction
    model: DensityModel
    densities: np.ndarray
    graph: TriangulationGraph
    cores: list
    log_densities: np.ndarray

    @property
    def M(self) -> int:
        return self.partition.M

    def cluster_models(self, on_cores: bool = False) -> list[DensityModel]:
        """Per-cluster kernel estimates (final members, or cores only)."""
        x = self.model.sample
        h = self.model.bandwidths
        if on_cores:
            return [DensityModel(x[c], h) for c in self.cores]
        return [DensityModel(x[self.partition.members(j)], h)
                for j in range(1, self.M + 1)]


def pdf_cluster(data, options: ClusterOptions | None = None, **kwargs) -> ClusterResult:
    """Cluster 2-D points (or a catalog's lon/lat) end to end.

    Bandwidth selection, density at the sample, Delaunay graph, alpha sweep,
    core extraction and allocation. Keyword arguments override fields of
    ``options``. The result is fully determined by the input and options.
    """
    opts = options or ClusterOptions()
    if kwargs:
        opts = ClusterOptions(**{**opts.__dict__, **kwargs})
    x = data.coords if isinstance(data, EventCatalog) else np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2:
        raise DataError("clustering expects (n, 2) coordinates")
    if len(x) < 3:
        raise DataError(f"need >= 3 events, got {len(x)}")

    if opts.bandwidths is not None:
        h = np.asarray(opts.bandwidths, dtype=float) * opts.bandwidth_scale
    else:
        h = normal_reference_bandwidth(x) * opts.bandwidth_scale
    model = DensityModel(x, h)
    logf = model.log_density(x, threads=opts.threads)
    f = np.exp(logf)
    graph = delaunay(x)
    grid = density_quantile_grid(f, opts.alpha_levels)
    mf, tree = build_mode_function(f, graph, grid, min_size=opts.min_core)
    cores = extract_cores(tree, f)
    if not cores:
        # everything is noise at every level: one cluster over all points
        logger.warning("no group reached min_core=%d; returning one cluster", opts.min_core)
        cores = [np.arange(len(x))]
    part = allocate(cores, x, h, policy=opts.policy, densities=f)
    return ClusterResult(part, tree, mf, model, f, graph, cores, logf)
