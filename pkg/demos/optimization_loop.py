r"""
The optimization loop
---------------------
``run`` drives a problem from the registry end to end. ``AskTellOptimizer``
does the same when the objectives are evaluated elsewhere.
"""
import numpy as np

from nostra import AskTellOptimizer, OptimizerConfig, get_problem, hv_2d, run

problem = get_problem("bohachevsky-sphere", noise_fraction=0.05)
config = OptimizerConfig(d=2, budget=24, cluster_mode="elbow", seed=1)
record = run(config, problem)

print("evaluations", record.n_evaluations)
print("EHVI of each chosen point", np.round(record.ehvi_curve, 2))
print("cluster counts", [it.k_used for it in record.iterations])

#%%
# Noise-free values of every evaluated point give a clean hypervolume trace.
clean = record.all_noise_free()
hv = [hv_2d(clean[:n], problem.ref_point) for n in range(config.n_init, len(clean) + 1)]
print(np.round(hv, 1))

#%%
# Ask/tell. Inputs are in the raw units of the domain handed to the optimizer.
opt = AskTellOptimizer(OptimizerConfig(d=2, budget=10, seed=2, noise_sd=tuple(problem.noise_sd)),
                       problem.domain, ref_point=problem.ref_point)
for x in opt.initial_design():
    opt.tell(x, problem.observe(x).values)
for _ in range(3):
    x = opt.propose()
    opt.tell(x, problem.observe(x).values)
    print(np.round(x, 3), opt.last_proposal.k_used)
print(opt.frontier().points)
