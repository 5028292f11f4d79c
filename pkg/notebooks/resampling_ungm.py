# %% [markdown]
# # Multinomial vs classified resampling on the UNGM benchmark
#
# The univariate nonstationary growth model is strongly nonlinear and its
# observation `x**2 / 20` hides the sign of the state, so particle clouds
# split into two modes.  Both filters below see the same trajectory, the same
# initial cloud and the same random stream.

# %%
import numpy as np

from pftrack import filter_core as fc
from pftrack import ungm

params = ungm.UngmParams(runs=20, seed=0)
results = ungm.run_comparison(params)
summary = ungm.summarize(results)
print(summary)

# %% [markdown]
# Per-run RMSE pairs.  A win is a run where the classified scheme has the
# lower error.

# %%
pairs = np.array([[r.rmse_trpf, r.rmse_irpf] for r in results])
print(np.round(pairs, 3))
print("resampling events per run:", results[0].resample_counts)

# %% [markdown]
# ## One resampling step up close
#
# A four-particle cloud with one light particle at 0 and one heavy particle
# at 10.  With both in class A and a 1-D state the shrink factor is 1/2, so
# the light particle moves `0.4 * 0.5 * 10 = 2` toward the heavy one.

# %%
cloud = fc.ParticleSet(np.array([0.0, 3.0, 4.0, 10.0]), np.array([0.05, 0.175, 0.175, 0.6]), normalized=True)
moved = fc.resample_improved(cloud, fc.ResampleConfig(reweight="retain"), lambda s: np.ones(len(s)), rng_seed=0)
print(moved.states[:, 0], np.round(moved.weights, 3))

# %% [markdown]
# The effective sample size before and after each scheme:

# %%
print("ESS in:", fc.effective_sample_size(cloud))
print("ESS after multinomial:", fc.effective_sample_size(fc.resample_traditional(cloud, 0)))
print("ESS after classified:", fc.effective_sample_size(moved))
