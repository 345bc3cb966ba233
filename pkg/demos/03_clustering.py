#!/usr/bin/env python3
# coding: utf-8

# # Level-set clustering end to end
#
# Density at the sample, a sweep over density-quantile thresholds, the mode
# function m(p), the cluster tree and its cores, and likelihood-ratio
# allocation of the remaining points.

# In[1]:

import numpy as np

from npcquake.agreement import compare_partitions
from npcquake.cluster import pdf_cluster
from npcquake.synth import MixtureSpec, synth_catalog

cat, truth = synth_catalog(MixtureSpec(blobs=5, n=1000), seed=7)
res = pdf_cluster(cat)
print("clusters:", res.M)

# In[2]:

# m(p): number of groups against the fraction of the sample retained.
# Its positive increments count the modes.
mf = res.mode_function
steps = np.flatnonzero(np.diff(np.concatenate([[0], mf.m])) != 0)
for k in steps:
    print("p = %.2f  m = %d" % (mf.p[k], mf.m[k]))
print("increments", mf.increments, "leaves", len(res.tree.leaves))

# In[3]:

# Cores are each mode's largest group before it merges with a neighbour
for j, core in enumerate(res.cores, start=1):
    print("core %d: %4d points, peak density %.1f" % (j, len(core), res.densities[core].max()))
print("non-core points allocated:", int((~res.partition.core_flag).sum()))

# In[4]:

# The three allocation policies, compared with the planted labels
for policy in ("static", "sequential", "batch"):
    lab = pdf_cluster(cat, policy=policy).partition.labels
    scores, _ = compare_partitions(lab, truth)
    print("%-10s adjusted Rand %.4f" % (policy, scores.ha))

# In[5]:

# The result barely depends on the bandwidth
print("M with bandwidths x2:", pdf_cluster(cat, bandwidth_scale=2.0).M)
