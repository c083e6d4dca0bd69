r"""
Trust regions from Pareto probabilities
---------------------------------------
Fit one GP per objective, estimate how often each candidate is
non-dominated across posterior draws, cluster those probabilities and weight
the acquisition by the mean probability of each cluster.
"""
import numpy as np

from nostra import (
    TrainingSet,
    build_pool,
    cluster_weights,
    elbow_select_k,
    fit_map,
    get_problem,
    init_design,
    kmeans_probs,
    pareto_probabilities,
    wcss_curve,
)

problem = get_problem("branin-currin", noise_fraction=0.05)
x = init_design(2, 12, seed=0)
y = np.array([problem.observe(xi, seed=(0, i)).values for i, xi in enumerate(x)])
models = [fit_map(TrainingSet(x, y[:, k], noise_sd=float(problem.noise_sd[k])), seed=k)
          for k in range(2)]

pool = build_pool(models, init_design(2, 500, seed=1))
field = pareto_probabilities(pool, n_samples=256, seed=2)
print("probabilities sum to", field.probs.sum())

#%%
# The within-cluster sum of squares drops fast and then levels off. The elbow
# is the sharpest bend.
curve = wcss_curve(field.probs, k_max=10, seed=3)
print(np.round(curve, 4))
k = elbow_select_k(field.probs, k_max=10, seed=3)
print("elbow at k =", k)

#%%
# Cluster 0 has the smallest centre. The last cluster holds the candidates most
# likely to be Pareto-optimal and carries the largest weight.
clustering = kmeans_probs(field.probs, k, seed=4)
print(clustering.centers, cluster_weights(field.probs, clustering))
for j in range(k):
    members = pool.inputs[clustering.labels == j]
    print(f"cluster {j}: {len(members)} candidates")
