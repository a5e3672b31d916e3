# %% [markdown]
# # Benchmark tables
#
# `reproduce_tables` runs every estimator on the three built-in models and
# returns CSV (or JSON). The same output is available from the command line:
#
#     hypoexp bench --seed 1
#     hypoexp bench --format json --output tables.json

# %%
from hypoexp import reproduce_tables

print(reproduce_tables(K=10, master_seed=1))

# %% [markdown]
# Reading the table:
#
# * `IS` rows carry the mean of K runs, RE-hat and the relative time variance
#   `cpu * RE^2`.
# * `exact-ross` is `nan` and flagged `catastrophic` when rates repeat.
# * `exact-expm` is flagged `floor-regime`: its value is rounding noise.
# * `crude-MC` returns zero every time, so RE-hat is `undefined`.
# * `oracle:<source>` rows give the reference value and how it was computed.
