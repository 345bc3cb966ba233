#!/usr/bin/env python3
# coding: utf-8

# # Kernel density of an aftershock-like point cloud
#
# A Gaussian product kernel with one bandwidth per coordinate. The default
# bandwidths come from the normal-reference rule; a scale factor widens or
# narrows them.

# In[1]:

import numpy as np
from scipy.integrate import trapezoid

from npcquake.kde import DensityModel, kde_evaluate, normal_reference_bandwidth, regular_grid
from npcquake.synth import MixtureSpec, gaussian_blobs

spec = MixtureSpec(blobs=3, n=600)
pts, labels, _ = gaussian_blobs(spec, np.random.default_rng(0))
print("sample", pts.shape, "lon range", pts[:, 0].min().round(3), pts[:, 0].max().round(3))

# In[2]:

# normal-reference bandwidths, one per coordinate (degrees)
h = normal_reference_bandwidth(pts)
print("bandwidths", h)

model = DensityModel(pts, h)

# In[3]:

# density at the sample, and where it peaks
f = model(pts)
top = np.argmax(f)
print("max density %.2f at (%.3f, %.3f), blob %d" % (f[top], *pts[top], labels[top]))

# In[4]:

# The estimate integrates to one. Quadrature over a box padded by six
# bandwidths on every side:
pad = 6 * h.max()
lo, hi = pts.min(0) - pad, pts.max(0) + pad
nx = ny = 300
grid = regular_grid((lo[0], hi[0], lo[1], hi[1]), nx, ny)
surf = kde_evaluate(model, grid)
gx, gy = np.linspace(lo[0], hi[0], nx), np.linspace(lo[1], hi[1], ny)
print("integral", trapezoid(trapezoid(surf.values.reshape(ny, nx), gx, axis=1), gy))

# In[5]:

# log densities come from log-sum-exp, so they stay finite far from the data
# where the linear density underflows to zero
far = np.array([[pts[:, 0].max() + 50, pts[:, 1].mean()]])
s = kde_evaluate(model, far)
print("far away: f =", s.values[0], " log f =", s.log_values[0])

# In[6]:

# Doubling the bandwidths smooths the surface; the peak drops
wide = DensityModel.fit(pts, scale=2.0)
print("peak at scale 1: %.2f, at scale 2: %.2f" % (f.max(), wide(pts).max()))
