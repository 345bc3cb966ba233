#!/usr/bin/env python3
# coding: utf-8

# # Delaunay connectivity of high-density sets
#
# The triangulation of the sample is built once. For any density threshold
# the points above it are grouped by the edges that join two such points.

# In[1]:

import numpy as np

from npcquake.kde import DensityModel
from npcquake.topology import connected_components, delaunay
from npcquake.synth import MixtureSpec, gaussian_blobs

pts, labels, _ = gaussian_blobs(MixtureSpec(blobs=2, n=400), np.random.default_rng(3))
g = delaunay(pts)
print("vertices", g.vertex_count, "edges", len(g.edges), "triangles", len(g.triangles))
print("planar bound 3n-6 =", 3 * g.vertex_count - 6)

# In[2]:

f = DensityModel.fit(pts)(pts)

# Sweep a few thresholds. Low thresholds keep everything in one piece; once
# the sparse bridge between the blobs drops out there are two components.
for q in (0.0, 0.2, 0.5, 0.8, 0.97):
    alpha = np.quantile(f, q)
    comp = connected_components(g, np.flatnonzero(f >= alpha))
    sizes = np.bincount(comp.labels)
    print("quantile %.2f  alpha %8.3f  members %3d  components %d  sizes %s"
          % (q, alpha, len(comp.member_indices), comp.component_count, sizes.tolist()))

# In[3]:

# Duplicate locations share one triangulation vertex
dup = np.vstack([pts[:50], pts[:5]])
g2 = delaunay(dup)
print("duplicate 50 -> vertex", g2.vertex_of[50], "; duplicate 54 -> vertex", g2.vertex_of[54])
