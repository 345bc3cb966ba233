#!/usr/bin/env python3
# coding: utf-8

# # Density-based silhouette
#
# Each point's log posterior ratio between its own cluster and the best
# alternative, scaled to [-1, 1]. Negative values flag points that sit more
# comfortably in another cluster.

# In[1]:

import numpy as np

from npcquake.cluster import Partition, pdf_cluster
from npcquake.diagnostics import dbs
from npcquake.kde import DensityModel
from npcquake.synth import MixtureSpec, gaussian_blobs

pts, truth, _ = gaussian_blobs(MixtureSpec(blobs=3, n=900), np.random.default_rng(1))
res = pdf_cluster(pts)
rep = dbs(res.partition, res.cluster_models(), pts)
print("mean dbs %.3f" % rep.mean)
for j, m in rep.cluster_mean.items():
    print("  cluster %d  mean %.3f" % (j, m))

# In[2]:

# Move ten points of cluster 1 that lie closest to cluster 2 into cluster 2
lab = np.array(res.partition.labels)
c2 = pts[lab == 2].mean(0)
cand = np.flatnonzero(lab == 1)
moved = cand[np.argsort(np.linalg.norm(pts[cand] - c2, axis=1))[:10]]
lab[moved] = 2
h = res.model.bandwidths
bad = dbs(Partition(lab, np.zeros(len(lab), bool), res.M),
          [DensityModel(pts[lab == j], h) for j in range(1, res.M + 1)], pts)
print("dbs of the moved points:", np.round(bad.dbs[moved], 3))

# In[3]:

# silhouette-plot data: points sorted by dbs within each cluster
rows = rep.summary_rows()
print("first rows", rows[:3])
