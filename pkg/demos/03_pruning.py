# Pruning a symmetric cloud down to its convex hull vertices.
import numpy as np

from pwlcis import SampleSet, hull_2d, prune, symmetrize

g = np.random.default_rng(0)
cloud = symmetrize(SampleSet(g.standard_normal((500, 2)) * [1.0, 0.4]))
kept = prune(cloud)
print(f"{len(cloud)} points -> {len(kept)} hull vertices")
print("counts of the zero / negative / positive last coordinate groups:",
      len(kept.i0), len(kept.i_neg), len(kept.i_pos))

# The survivors are exactly the vertices of the planar hull.
hull = hull_2d(cloud.points)
print("monotone-chain hull vertices:", len(hull))

# Higher dimensions use the same call.
cloud4 = symmetrize(SampleSet(g.uniform(-1, 1, (2000, 4))))
print(f"4-D: {len(cloud4)} points -> {len(prune(cloud4))} survivors")
