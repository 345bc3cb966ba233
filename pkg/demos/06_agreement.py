#!/usr/bin/env python3
# coding: utf-8

# # Agreement between partitions, and stability over time
#
# Skill scores and the adjusted Rand index from a contingency table, after
# matching the labels of one partition to the other.

# In[1]:

import numpy as np

from npcquake.agreement import (ContingencyTable, adjusted_rand, compare_partitions, match_labels,
                                skill_scores, temporal_consistency)
from npcquake.cluster import pdf_cluster
from npcquake.synth import MixtureSpec, synth_catalog

t = ContingencyTable(np.array([[40, 10], [10, 40]]))
s = skill_scores(t)
print("NSS %.2f  HSS %.2f  HK %.2f  HA %.4f" % (s.nss, s.hss, s.hk, adjusted_rand(t)))
# the printed-formula expectation is a quarter of the usual one
print("HA with the alternative expectation: %.4f" % adjusted_rand(t, "paper"))

# In[2]:

# label matching picks the permutation with the largest diagonal
c = np.array([[0, 9, 1], [8, 0, 0], [0, 1, 7]])
print("match:", match_labels(ContingencyTable(c)) + 1)

# In[3]:

# Day-over-day consistency on a stationary synthetic sequence: cluster the
# cumulative catalog every day and compare with the previous day
cat, truth = synth_catalog(MixtureSpec(blobs=5, n=1000, days=30), seed=2)
days = temporal_consistency(cat, lambda x: pdf_cluster(x).partition.labels, start_day=1)
for d in days:
    if d.skipped:
        print("day %2d  skipped (%s)" % (d.day, d.reason))
    elif d.day % 5 == 0:
        print("day %2d  n=%4d  NSS %.3f HSS %.3f HK %.3f HA %.3f"
              % (d.day, d.n_common, d.nss, d.hss, d.hk, d.ha))

# In[4]:

scores, perm = compare_partitions(pdf_cluster(cat).partition.labels, truth)
print("final clustering vs planted labels: HA %.4f" % scores.ha)
