r"""
Prior-informed GP hyperparameters
---------------------------------
With a handful of noisy samples the likelihood surface over the roughness
``omega`` and the nugget ``delta2`` is flat in places, so restarts of a
likelihood-only fit wander off to very different answers. A normal prior on
``(omega, log10 delta2)`` gives the surface a single interior mode.

We fit five noisy samples of the Currin function both ways.
"""
import numpy as np

from nostra import HyperPrior, TrainingSet, fit_map, get_problem, init_design

problem = get_problem("currin", noise_fraction=0.05)
x = init_design(2, 5, seed=3)
y = np.array([problem.observe(xi, seed=(3, i)).values[0] for i, xi in enumerate(x)])
train = TrainingSet(x, y, noise_sd=float(problem.noise_sd[0]))

#%%
# Likelihood only. Each row is where one restart ended up.
flat = fit_map(train, prior=None, restarts=8, seed=0)
for r in flat.restarts:
    print(f"omega {r.omega:7.3f}  log10 delta2 {r.log10_delta2:7.3f}  objective {r.value:.4f}")

#%%
# With the noise-informed prior (``prior="auto"``) the nugget prior is centred
# on the known noise variance in standardized units, and every restart lands
# on the same point.
post = fit_map(train, prior="auto", restarts=8, seed=0)
print(post.prior)
for r in post.restarts:
    print(f"omega {r.omega:7.3f}  log10 delta2 {r.log10_delta2:7.3f}  objective {r.value:.4f}")

#%%
# Any prior can be passed explicitly; its values live in standardized units.
tight = fit_map(train, prior=HyperPrior(omega_mean=0.5, omega_sd=0.5, delta_mean=-1.5),
                seed=0)
print(tight.params)

#%%
# Predictions come back in raw output units. ``noisy=True`` adds the nugget
# to the latent variance.
xq = np.array([[0.25, 0.75], [0.9, 0.1]])
mean, var = post.predict(xq)
_, noisy_var = post.predict(xq, noisy=True)
print(mean, var, noisy_var)
