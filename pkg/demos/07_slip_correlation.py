#!/usr/bin/env python3
# coding: utf-8

# # Coseismic slip against aftershock density
#
# Slip is interpolated to events, log-transformed with a 1 cm offset and
# paired with the log density. Rupture-free events form a vertical strip at
# ln(0.01).

# In[1]:

import math

import numpy as np

from npcquake.cluster import pdf_cluster
from npcquake.correlate import (SlipField, build_masked_grid, cluster_slip_summary,
                                cluster_spearman, scatter_table, trench_distance)
from npcquake.synth import MixtureSpec, synth_catalog, synth_slip, synth_trench

spec = MixtureSpec(blobs=5, n=1000)
cat, truth = synth_catalog(spec, seed=7)
field = SlipField(*synth_slip(spec, [(1, 16.6), (4, 11.9)]))
print("slip lattice %d nodes, max %.2f m" % (field.node_count, field.slip.max()))

# In[2]:

res = pdf_cluster(cat)
rows = scatter_table(cat.coords, field, res.model, labels=res.partition.labels)
zero = sum(r.slip == 0 for r in rows)
print("%d of %d events outside the rupture, all at log-slip %.4f" % (zero, len(rows), math.log(0.01)))

# In[3]:

rho = cluster_spearman(rows)
for j, r in rho.items():
    print("cluster %d  Spearman(log slip, log density) = %s" % (j, "undefined" if math.isnan(r) else "%.3f" % r))

# In[4]:

# Per-cluster slip summary with distances to the trench
trench = synth_trench(spec)
dist = trench_distance(cat.coords, trench)
slip = np.array([r.slip for r in rows])
for s in cluster_slip_summary(res.partition.labels, slip, dist):
    print("cluster %d  N %4d  slip mean %6.3f max %6.3f  trench %6.1f-%6.1f km"
          % (s.cluster, s.n, s.mean, s.max, s.dist_min, s.dist_max))

# In[5]:

# Evaluation on a masked regular grid instead of at the events
box = field.bbox
mask = [[(box[0], box[2]), ((box[0] + box[1]) / 2, box[2]), ((box[0] + box[1]) / 2, box[3]),
         (box[0], box[3])]]
grid = build_masked_grid(box, 60, 60, mask)
print("masked grid keeps %d of %d points" % (grid.retained, 60 * 60))
