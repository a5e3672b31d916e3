# %% [markdown]
# # The double-precision floor
#
# For rare events the CDF is `1 - survival` with survival within 1e-16 of one.
# Any method that computes the survival function first cannot see a
# probability of 1e-22: it gets rounded away.

# %%
from hypoexp import builtin_models
from hypoexp.exact import exact_cdf, expm_survival

# %%
for model in builtin_models():
    p = model.problem
    surv = expm_survival(p)
    res = exact_cdf(p)
    print(f"{model.name}: survival={surv.raw!r}  1-survival={1 - surv.raw:.1e}  "
          f"oracle={model.oracle_value:.4e}  floor_regime={res.floor_regime}")

# %% [markdown]
# For Models 1 and 2 all rates are equal, so the distribution is Erlang and the
# CDF is a Poisson tail that can be summed directly in floating point. Model 3
# repeats three rates, so the closed form is undefined and the oracle comes from
# a Taylor series of the matrix exponential evaluated with mpmath.

# %%
from hypoexp.core import erlang_cdf, highprecision_series_cdf

print(erlang_cdf(10, 0.03, 1.0))
print(highprecision_series_cdf(builtin_models()[2].problem))
