# %% [markdown]
# # Crossing weights on a branching random walk
#
# Sample a BRW field, exponentiate it, and look at how the lightest
# left-right crossing grows with the box size compared with a straight row.

# %%
from fppbrw.field import FieldKind, GaussianSource, sample_field
from fppbrw.geodesic import WeightGrid, crossing_distance
from fppbrw.harness import STRAIGHT_LINE_SLOPE, ExperimentConfig, run_exponent

# %%
# one field, one geodesic
n, gamma = 8, 1.0
field = sample_field(FieldKind.BRW, n, 1, GaussianSource(2024))
grid = WeightGrid.from_field(field.values, gamma)
geo = crossing_distance(grid)
rows = grid.weights.sum(axis=1)
print(f"N = {2 ** n}: geodesic weight {geo.weight:.2f} over {len(geo.path)} vertices")
print(f"lightest row {rows.min():.2f}, mean row {rows.mean():.2f}")

# %%
# exponent fit on median-of-means, a small version of the acceptance run
rows, fit, _ = run_exponent(ExperimentConfig(gamma, tuple(range(4, 9)), 48, seed=1, bootstrap=300))
for r in rows:
    print(f"n={r['n']:2d}  mean D={r['mean_d']:9.2f}  MoM D={r['mom_d']:9.2f}  mean min row={r['mean_min_row']:10.2f}")
print(f"fitted slope {fit.slope:.3f}, 95% CI [{fit.ci[0]:.3f}, {fit.ci[1]:.3f}]")
print(f"straight-line exponent {STRAIGHT_LINE_SLOPE:.3f}")
