r"""
Hypervolume and expected improvement
------------------------------------
All objectives are minimized. The hypervolume of a bi-objective front is the
area it dominates inside the box bounded by a reference point.
"""
import numpy as np

from nostra import ehvi_mc, ehvi_mc_batch, hv_2d, hvi, pareto_front

points = np.array([[1.0, 3.0], [2.0, 2.0], [3.0, 1.0], [3.0, 3.0]])
front = pareto_front(points)
print(front.points, front.source_indices)

ref = np.array([4.0, 4.0])
print("HV", hv_2d(front, ref))

#%%
# The improvement from a new point is the difference of two volumes. A point
# inside the dominated region adds nothing.
print(hvi([[1.5, 1.5]], front, ref))
print(hvi([[3.5, 3.5]], front, ref))

#%%
# Under a Gaussian posterior the expected improvement is estimated by Monte
# Carlo. With zero variance it collapses to the plain improvement.
print(ehvi_mc([1.5, 1.5], [0.0, 0.0], front, ref, n_samples=64, seed=0))
print(ehvi_mc([1.5, 1.5], [0.2, 0.2], front, ref, n_samples=4096, seed=0))

#%%
# Many candidates are scored at once with one shared block of normal draws, so
# differences between candidates are not drowned by sampling noise.
means = np.array([[1.5, 1.5], [0.5, 3.5], [2.5, 2.5]])
variances = np.full((3, 2), 0.1)
print(ehvi_mc_batch(means, variances, front, ref, n_samples=2048, seed=1))
