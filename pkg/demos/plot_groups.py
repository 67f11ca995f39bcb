"""
Finding walking groups
======================

Pairs that stay in the same density cluster for most of the observation
are treated as a group and stop repelling each other.
"""

# %%
# Cluster one frame. Points within ``eps`` of each other chain into a
# cluster; isolated points are labelled -1.
import numpy as np

from goalforce import dbscan, detect_groups, window_scene
from goalforce.synthetic import crowd, side_by_side_dyad

points = np.array([[0, 0], [0.6, 0], [1.2, 0.1], [5, 5], [9, 0], [9.4, 0.3]])
print("labels:", dbscan(points, eps=1.0, min_pts=2))

# %%
# Over eight observed frames the dyad co-clusters every time, which is
# more than the four frames required.
w1, _ = window_scene(side_by_side_dyad(seed=3))
groups = detect_groups(w1.observed_frames, eps=1.0, min_pts=2, sigma=4)
print("dyad pairs:", sorted(groups.pairs), "frames:", groups.co_cluster_frames)

# %%
# In a random crowd most encounters are brief. Raising ``sigma`` keeps only
# the pairs that stay together longer.
w = window_scene(crowd(5, n_agents=25, area=6.0))[0]
for sigma in (0, 2, 4, 6):
    print(f"sigma={sigma}: {len(detect_groups(w.observed_frames, sigma=sigma).pairs)} grouped pairs")
