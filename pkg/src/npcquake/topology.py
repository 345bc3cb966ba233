"""Delaunay connectivity of a planar sample and connected components of
arbitrary vertex subsets.

The triangulation is computed once per sample with Qhull and then checked
edge by edge with an exact in-circle predicate; any edge that fails is
flipped (Lawson's algorithm) until the triangulation is locally Delaunay.

Robustness strategy for the predicates: each determinant is first evaluated
in double precision together with a forward error bound (Shewchuk's stage-A
bounds). Only when the magnitude of the result does not exceed the bound is
the determinant recomputed exactly with rational arithmetic on the input
doubles. Signs are therefore always correct, and the exact path is taken
only near degeneracy.

Duplicate coordinates are collapsed onto a single triangulation vertex, the
first occurrence in input order. All copies share that vertex's edges.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc
from scipy.spatial import Delaunay, QhullError

from .errors import DataError, DegenerateError

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps / 2
_CCW_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_ICC_BOUND = (10.0 + 96.0 * _EPS) * _EPS


def _orient_exact(a, b, c) -> int:
    ax, ay = map(Fraction, a)
    bx, by = map(Fraction, b)
    cx, cy = map(Fraction, c)
    det = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx)
    return (det > 0) - (det < 0)


def _incircle_exact(a, b, c, d) -> int:
    dx, dy = map(Fraction, d)
    rows = []
    for p in (a, b, c):
        px, py = Fraction(p[0]) - dx, Fraction(p[1]) - dy
        rows.append((px, py, px * px + py * py))
    (a0, a1, a2), (b0, b1, b2), (c0, c1, c2) = rows
    det = (a2 * (b0 * c1 - b1 * c0)
           - b2 * (a0 * c1 - a1 * c0)
           + c2 * (a0 * b1 - a1 * b0))
    return (det > 0) - (det < 0)


def orient2d(a, b, c) -> np.ndarray:
    """Sign of the orientation of triangle(s) ``abc``: +1 counter-clockwise,
    -1 clockwise, 0 collinear. Inputs broadcast over leading axes."""
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    a, b, c = np.broadcast_arrays(a, b, c)
    shape = a.shape[:-1]
    a, b, c = (p.reshape(-1, 2) for p in (a, b, c))
    detl = (a[:, 0] - c[:, 0]) * (b[:, 1] - c[:, 1])
    detr = (a[:, 1] - c[:, 1]) * (b[:, 0] - c[:, 0])
    det = detl - detr
    bound = _CCW_BOUND * (np.abs(detl) + np.abs(detr))
    sign = np.sign(det).astype(int)
    for k in np.flatnonzero(np.abs(det) <= bound):
        sign[k] = _orient_exact(a[k], b[k], c[k])
    return sign.reshape(shape)


def incircle(a, b, c, d) -> np.ndarray:
    """Positive where ``d`` lies strictly inside the circle through ``a, b, c``
    (given counter-clockwise), negative outside, 0 when cocircular."""
    a, b, c, d = (np.asarray(p, dtype=float) for p in (a, b, c, d))
    a, b, c, d = np.broadcast_arrays(a, b, c, d)
    shape = a.shape[:-1]
    a, b, c, d = (p.reshape(-1, 2) for p in (a, b, c, d))
    adx, ady = a[:, 0] - d[:, 0], a[:, 1] - d[:, 1]
    bdx, bdy = b[:, 0] - d[:, 0], b[:, 1] - d[:, 1]
    cdx, cdy = c[:, 0] - d[:, 0], c[:, 1] - d[:, 1]
    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady)
    permanent = (alift * (np.abs(bdxcdy) + np.abs(cdxbdy))
                 + blift * (np.abs(cdxady) + np.abs(adxcdy))
                 + clift * (np.abs(adxbdy) + np.abs(bdxady)))
    sign = np.sign(det).astype(int)
    for k in np.flatnonzero(np.abs(det) <= _ICC_BOUND * permanent):
        sign[k] = _incircle_exact(a[k], b[k], c[k], d[k])
    return sign.reshape(shape)


@dataclass(frozen=True, eq=False)
class TriangulationGraph:
    """Delaunay graph over a sample of ``vertex_count`` events.

    Attributes
    ----------
    vertex_count : int
        Number of input events ``n``.
    vertex_of : ndarray of int, shape (n,)
        Triangulation vertex (the representative event index) of each event.
    edges : ndarray of int, shape (E, 2)
        Unordered edges between representative events, ``i < j``, sorted.
    triangles : ndarray of int, shape (T, 3)
        Counter-clockwise triangles over representative events.
    indptr, indices : ndarray
        CSR adjacency over event slots; only representatives have neighbours.
    """

    vertex_count: int
    vertex_of: np.ndarray
    edges: np.ndarray
    triangles: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray

    def neighbors(self, i: int) -> np.ndarray:
        v = self.vertex_of[i]
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        return [list(self.neighbors(i)) for i in range(self.vertex_count)]


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    """Components of an induced subgraph.

    ``labels[k]`` is the component (0-based, numbered by the smallest member
    index) of ``member_indices[k]``.
    """

    member_indices: np.ndarray
    labels: np.ndarray
    component_count: int

    def groups(self) -> list[np.ndarray]:
        return [self.member_indices[self.labels == c] for c in range(self.component_count)]


def delaunay(points) -> TriangulationGraph:
    """Delaunay graph of ``(n, 2)`` points.

    Raises
    ------
    DataError
        Fewer than three points, or fewer than three distinct locations.
    DegenerateError
        All points collinear. Callers may jitter the input and retry.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DataError("delaunay expects an (n, 2) array")
    n = len(pts)
    if n < 3:
        raise DataError(f"need >= 3 events for a triangulation, got {n}")
    if not np.isfinite(pts).all():
        raise DataError("non-finite coordinates")

    _, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    reps = first  # representative event index per unique location
    vertex_of = reps[inverse]
    upts = pts[reps]
    if len(upts) < 3:
        raise DataError("need >= 3 distinct event locations for a triangulation")

    try:
        tri = Delaunay(upts, qhull_options="Qbb Qc Qz Q12")
    except QhullError as exc:
        raise DegenerateError("points are collinear; triangulation undefined") from exc

    simplices = tri.simplices.copy()
    # Qhull reports orientation inconsistently across versions; normalise to CCW
    cw = orient2d(upts[simplices[:, 0]], upts[simplices[:, 1]], upts[simplices[:, 2]]) < 0
    simplices[cw] = simplices[cw][:, [0, 2, 1]]
    simplices = _legalize(upts, simplices)

    extra = []
    if len(tri.coplanar):
        # vertices Qhull dropped as numerically coincident with a neighbour
        for p, _s, nearest in tri.coplanar:
            extra.append((p, nearest))
        logger.warning("%d near-duplicate points attached to their nearest vertex",
                       len(tri.coplanar))

    e = np.concatenate([simplices[:, [0, 1]], simplices[:, [1, 2]], simplices[:, [2, 0]]])
    if extra:
        e = np.concatenate([e, np.asarray(extra, dtype=e.dtype)])
    e = np.sort(e, axis=1)
    e = np.unique(e, axis=0)
    edges = reps[e]
    edges = np.sort(edges, axis=1)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    triangles = reps[simplices]

    indptr, indices = _csr(n, edges)
    for arr in (vertex_of, edges, triangles, indptr, indices):
        arr.setflags(write=False)
    return TriangulationGraph(n, vertex_of, edges, triangles, indptr, indices)


def _csr(n, edges):
    both = np.concatenate([edges, edges[:, ::-1]])
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    counts = np.bincount(both[:, 0], minlength=n)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return indptr, both[:, 1].copy()


def _legalize(pts, simplices):
    """Flip edges whose opposite vertex lies inside the adjacent circumcircle."""
    tris = [tuple(int(v) for v in s) for s in simplices]

    def edge_map():
        m = {}
        for t, (a, b, c) in enumerate(tris):
            for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
                m[(u, v)] = (t, w)
        return m

    emap = edge_map()
    # vectorised screen of every interior edge first; flips are rare
    keys = [(u, v) for (u, v) in emap if (v, u) in emap and u < v]
    if not keys:
        return simplices
    a = np.array([k[0] for k in keys])
    b = np.array([k[1] for k in keys])
    c = np.array([emap[k][1] for k in keys])
    d = np.array([emap[(k[1], k[0])][1] for k in keys])
    bad = incircle(pts[a], pts[b], pts[c], pts[d]) > 0
    if not bad.any():
        return simplices

    queue = deque(keys[k] for k in np.flatnonzero(bad))
    flips = 0
    while queue:
        u, v = queue.popleft()
        if (u, v) not in emap or (v, u) not in emap:
            continue
        t1, c_ = emap[(u, v)]
        t2, d_ = emap[(v, u)]
        if incircle(pts[u], pts[v], pts[c_], pts[d_]) <= 0:
            continue
        # CCW quad u, d, v, c: replace diagonal u-v by d-c
        for t in (t1, t2):
            x, y, z = tris[t]
            for p, q in ((x, y), (y, z), (z, x)):
                emap.pop((p, q), None)
        tris[t1] = (u, d_, c_)
        tris[t2] = (d_, v, c_)
        for t in (t1, t2):
            x, y, z = tris[t]
            for p, q, r in ((x, y, z), (y, z, x), (z, x, y)):
                emap[(p, q)] = (t, r)
        for p, q in ((u, c_), (c_, v), (v, d_), (d_, u)):
            queue.append((p, q) if p < q else (q, p))
        flips += 1
    logger.info("legalized triangulation with %d flips", flips)
    return np.array(tris, dtype=simplices.dtype)


def connected_components(graph: TriangulationGraph, subset) -> ComponentLabeling:
    """Components of the subgraph induced by ``subset`` (event indices).

    Two members share a label iff a path joins them using only edges whose
    endpoints both belong to ``subset``. An empty subset yields zero
    components.
    """
    members = np.unique(np.asarray(subset, dtype=np.int64).reshape(-1))
    if len(members) and (members[0] < 0 or members[-1] >= graph.vertex_count):
        raise DataError("subset indices out of range")
    if len(members) == 0:
        return ComponentLabeling(members, np.zeros(0, dtype=np.int64), 0)
    n = graph.vertex_count
    inside = np.zeros(n, dtype=bool)
    inside[graph.vertex_of[members]] = True
    e = graph.edges
    keep = inside[e[:, 0]] & inside[e[:, 1]]
    ek = e[keep]
    mat = coo_matrix((np.ones(len(ek), dtype=np.int8), (ek[:, 0], ek[:, 1])), shape=(n, n))
    _, raw = _cc(mat, directed=False)
    vlab = raw[graph.vertex_of[members]]
    # renumber by first appearance over sorted members
    _, first, labels = np.unique(vlab, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    labels = rank[labels.reshape(-1)]
    return ComponentLabeling(members, labels, len(first))


def write_edges(graph: TriangulationGraph, path):
    """Dump the edge list as ``i,j`` rows for plotting."""
    with open(path, "w") as fh:
        fh.write("i,j\n")
        for i, j in graph.edges:
            fh.write(f"{i},{j}\n")
