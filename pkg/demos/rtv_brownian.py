# %% [markdown]
# # Penalised total variation of Brownian motion
#
# For a penalty lam, the best partition of a Brownian path collects about
# 1/lam of variation.  The optimal intervals alternate in sign, which is what
# the constructor uses to decide where a crossing switches rows.

# %%
import numpy as np

from fppbrw.rtv import brownian_path, rtv_dp, rtv_scaling, rtv_signs

# %%
path = brownian_path(20_000, seed=3)
for lam in (0.5, 0.2, 0.05):
    p = rtv_dp(path, lam)
    print(f"lam={lam:5.2f}  Phi={p.value:7.3f}  lam*Phi={lam * p.value:5.3f}  switches k={p.k}")

# %%
p = rtv_dp(path, 0.2)
signs = rtv_signs(p)
print("interval increments:", np.round(p.increments, 2))
print("sign changes along the grid:", int(np.sum(signs[1:] != signs[:-1])))

# %%
for row in rtv_scaling([0.2, 0.1, 0.05], 100_000, 40, seed=9):
    print(f"lam={row['lambda']:.2f}  mean Phi={row['mean_phi']:.2f} +- {row['stderr']:.2f}  lam*mean={row['lambda_phi']:.3f}")
