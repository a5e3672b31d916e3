# %% [markdown]
# # When the closed form breaks
#
# The hypoexponential CDF has a textbook closed form: a sum over the rates of
# `e^{-lambda_i t}` times a product of `lambda_j / (lambda_j - lambda_i)`. The
# products blow up as rates get close, and the sum then cancels catastrophically.

# %%
import numpy as np

from hypoexp import validate_problem
from hypoexp.core import highprecision_hypoexp_cdf
from hypoexp.exact import expm_survival, ross_cdf

# %% [markdown]
# Twelve rates spaced 0.01 apart around 10.

# %%
rates = np.round(np.arange(10.00, 9.885, -0.01), 2).tolist()
p = validate_problem(rates, 1.0)
value, report = ross_cdf(p)
print(f"closed form        {value: .6e}")
print(f"largest term       {report.max_term_magnitude:.3e}")
print(f"digits cancelled   {report.cancellation_digits:.1f}")
print(f"verdict            {report.verdict.value}")

# %% [markdown]
# The matrix-exponential route and an extended-precision evaluation of the same
# closed form agree with each other; the double-precision sum is off by eight
# orders of magnitude.

# %%
print(f"1 - expm survival  {1 - expm_survival(p).raw:.15f}")
print(f"mpmath closed form {highprecision_hypoexp_cdf(p):.15f}")

# %% [markdown]
# Widening the gap brings the closed form back. The verdict tracks the loss.

# %%
for gap in (0.01, 0.05, 0.2, 1.0):
    q = validate_problem([10.0 - gap * k for k in range(6)], 0.5)
    v, r = ross_cdf(q)
    ref = highprecision_hypoexp_cdf(q)
    print(f"gap={gap:<5} value={v:.6e} abs err={abs(v - ref):.1e} verdict={r.verdict.value}")
