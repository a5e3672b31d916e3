import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from hypoexp.core import (
    DuplicateRates,
    EmptyRates,
    HypoexpError,
    HypoexpProblem,
    InvalidOrder,
    NonFiniteInput,
    NonPositiveRate,
    NonPositiveThreshold,
    RateVector,
    SpecialFunctionDomain,
    erlang_cdf,
    exp_moment_integral,
    highprecision_hypoexp_cdf,
    highprecision_series_cdf,
    lower_incomplete_gamma,
    poisson_tail,
    stirling_upper_bound,
    validate_problem,
)

MODEL3 = [0.01, 0.011, 0.009] * 3 + [0.01]


# ---------------------------------------------------------------- validation


def test_validate_model1():
    p = validate_problem([0.03] * 10, 1.0)
    assert p.n == 10
    assert p.rates.max_rate == p.rates.min_rate == 0.03


def test_validate_single_rate():
    assert validate_problem([1.0], 1.0).n == 1


def test_rates_keep_input_order():
    p = validate_problem([3.0, 1.0, 2.0])
    assert p.rates.rates == (3.0, 1.0, 2.0)


@pytest.mark.parametrize(
    "rates, t, exc",
    [
        ([0.0, 1.0], 1.0, NonPositiveRate),
        ([-1.0], 1.0, NonPositiveRate),
        ([], 1.0, EmptyRates),
        ([1.0, math.nan], 1.0, NonFiniteInput),
        ([math.inf], 1.0, NonFiniteInput),
        ([1.0], 0.0, NonPositiveThreshold),
        ([1.0], -2.0, NonPositiveThreshold),
        ([1.0], math.inf, NonFiniteInput),
        ("1,2", 1.0, NonFiniteInput),
        ([1.0, "2"], 1.0, NonFiniteInput),
        (None, 1.0, NonFiniteInput),
        ([True], 1.0, NonFiniteInput),
    ],
)
def test_validate_errors(rates, t, exc):
    with pytest.raises(exc):
        validate_problem(rates, t)


_anything = st.recursive(
    st.none() | st.booleans() | st.integers() | st.floats(allow_nan=True) | st.text(max_size=3),
    lambda children: st.lists(children, max_size=4),
    max_leaves=8,
)


@given(rates=_anything, t=_anything)
@settings(max_examples=300, deadline=None)
def test_validate_is_total(rates, t):
    try:
        p = validate_problem(rates, t)
    except HypoexpError:
        return
    assert p.n >= 1
    assert all(r > 0 and math.isfinite(r) for r in p.rates)
    assert p.threshold > 0


def test_rate_vector_accessors():
    rv = RateVector((2.0, 5.0, 1.0))
    assert rv.max_rate == 5.0 and rv.min_rate == 1.0
    assert len(rv) == 3
    assert not rv.has_duplicates()
    assert RateVector((1.0, 1.0)).has_duplicates()


def test_special_function_domain():
    SpecialFunctionDomain(3, 0.0)
    with pytest.raises(InvalidOrder):
        SpecialFunctionDomain(0, 1.0)
    with pytest.raises(HypoexpError):
        SpecialFunctionDomain(1, -1.0)


@given(
    rates=st.lists(st.floats(0.05, 20.0), min_size=1, max_size=6),
    t=st.floats(0.05, 5.0),
)
@settings(max_examples=60, deadline=None)
def test_rescaled_problem_same_cdf(rates, t):
    p = validate_problem(rates, t)
    q = validate_problem(list(np.asarray(rates) * t), 1.0)
    a = highprecision_series_cdf(p)
    b = highprecision_series_cdf(q)
    assert a == pytest.approx(b, rel=1e-12, abs=0)


# ------------------------------------------------------------ special funcs


def _gamma_quad(n, x):
    with mpmath.workdps(40):
        return float(mpmath.quad(lambda s: s ** (n - 1) * mpmath.exp(-s), [0, x]))


def _imoment_quad(n, x):
    with mpmath.workdps(40):
        return float(mpmath.quad(lambda s: s ** (n - 1) * mpmath.exp(s), [0, x]))


@pytest.mark.parametrize("x", [0.0, 1e-8, 0.3, 1.0, 7.5, 40.0])
def test_gamma_order_one(x):
    assert lower_incomplete_gamma(1, x) == pytest.approx(-math.expm1(-x), rel=1e-14, abs=0)


@pytest.mark.parametrize("n", [1, 2, 10, 30])
def test_gamma_at_zero(n):
    assert lower_incomplete_gamma(n, 0.0) == 0.0


def test_gamma_10_003_matches_quadrature():
    # quadrature of t^9 e^-t on [0, 0.03] at 40 digits
    expected = 5.746051311745639e-17
    assert lower_incomplete_gamma(10, 0.03) == pytest.approx(expected, rel=1e-12)
    value, _ = integrate.quad(lambda s: s**9 * math.exp(-s), 0, 0.03, epsabs=0, epsrel=1e-13)
    assert lower_incomplete_gamma(10, 0.03) == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 10, 17, 30])
@pytest.mark.parametrize("x", [1e-3, 0.03, 0.5, 1.0, 2.9, 5.0, 12.0, 29.5, 60.0])
def test_gamma_matches_quadrature(n, x):
    assert lower_incomplete_gamma(n, x) == pytest.approx(_gamma_quad(n, x), rel=1e-12)


@pytest.mark.parametrize("n", [1, 4, 12, 30])
def test_gamma_regularized_monotone_and_bounded(n):
    xs = np.linspace(0.0, 3.0 * n, 200)
    vals = [lower_incomplete_gamma(n, float(x)) / math.factorial(n - 1) for x in xs]
    assert all(0.0 <= v <= 1.0 for v in vals)
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert lower_incomplete_gamma(n, 1e3) == pytest.approx(math.factorial(n - 1), rel=1e-14)


def test_gamma_invalid_order():
    with pytest.raises(InvalidOrder):
        lower_incomplete_gamma(0, 1.0)
    with pytest.raises(InvalidOrder):
        lower_incomplete_gamma(2.5, 1.0)


@pytest.mark.parametrize("x", [0.0, 1e-9, 0.2, 2.0, 30.0])
def test_imoment_order_one(x):
    assert exp_moment_integral(1, x) == pytest.approx(math.expm1(x), rel=1e-14, abs=0)


def test_imoment_at_zero():
    assert exp_moment_integral(7, 0.0) == 0.0


def test_imoment_3_2():
    # closed form e^2 (4 - 4 + 2) - 2 agrees with 40-digit quadrature
    assert exp_moment_integral(3, 2.0) == pytest.approx(12.778112197861300, rel=1e-12)
    assert exp_moment_integral(3, 2.0) == pytest.approx(_imoment_quad(3, 2.0), rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 6, 10, 20, 30])
@pytest.mark.parametrize("x", [1e-4, 0.03, 0.5, 3.0, 9.9, 25.0, 60.0])
def test_imoment_matches_quadrature(n, x):
    assert exp_moment_integral(n, x) == pytest.approx(_imoment_quad(n, x), rel=1e-10)


@pytest.mark.parametrize("n", [2, 5, 10])
@pytest.mark.parametrize("x", [5.0, 20.0, 50.0])
def test_imoment_satisfies_by_parts_recurrence(n, x):
    # I(n, x) = x^(n-1) e^x - (n-1) I(n-1, x); stable for x >= n
    lhs = exp_moment_integral(n, x)
    rhs = x ** (n - 1) * math.exp(x) - (n - 1) * exp_moment_integral(n - 1, x)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_imoment_large_argument_is_finite():
    with mpmath.workdps(30):
        expected = float(mpmath.quad(lambda s: s**2 * mpmath.exp(s), [0, 600]))
    assert exp_moment_integral(3, 600.0) == pytest.approx(expected, rel=1e-10)
    assert exp_moment_integral(3, 800.0) == math.inf


@given(n=st.integers(1, 30), u=st.floats(1e-6, 1.0))
@settings(max_examples=200, deadline=None)
def test_imoment_upper_bound_up_to_n(n, u):
    x = u * n
    assert exp_moment_integral(n, x) <= x**n * math.e**n / n * (1 + 1e-12)


@given(n=st.integers(1, 30), u=st.floats(1e-6, 2.0))
@settings(max_examples=200, deadline=None)
def test_gamma_lower_bound(n, u):
    x = u * n
    assert lower_incomplete_gamma(n, x) >= x**n * math.exp(-x) / n * (1 - 1e-12)


@pytest.mark.xfail(strict=True, reason="x^n e^n / n is not an upper bound for I(n, x) once x > n")
def test_imoment_upper_bound_beyond_n():
    # n = 1, x = 2: e^2 - 1 = 6.39 > 2e = 5.44
    n, x = 1, 2.0
    assert exp_moment_integral(n, x) <= x**n * math.e**n / n


@given(n=st.integers(1, 25), a=st.floats(0, 40), b=st.floats(0, 40))
@settings(max_examples=100, deadline=None)
def test_imoment_monotone(n, a, b):
    lo, hi = sorted((a, b))
    assert 0.0 <= exp_moment_integral(n, lo) <= exp_moment_integral(n, hi)


# ------------------------------------------------------------ Erlang oracle


@pytest.mark.parametrize("lam, t", [(0.5, 1.0), (3.0, 0.2), (1e-3, 2.0)])
def test_erlang_order_one(lam, t):
    assert erlang_cdf(1, lam, t) == pytest.approx(-math.expm1(-lam * t), rel=1e-14)


def test_erlang_model1():
    # Poisson-tail series summed in 40-digit arithmetic
    assert erlang_cdf(10, 0.03, 1.0) == pytest.approx(1.583457702751774e-22, rel=1e-12)


def test_erlang_model2():
    assert erlang_cdf(10, 0.01, 1.0) == pytest.approx(2.730794283696246e-27, rel=1e-12)


def test_erlang_non_rare():
    assert erlang_cdf(10, 10.0, 1.0) == pytest.approx(0.5420702855281478, rel=1e-13)


def test_erlang_cross_scipy():
    from scipy import special

    for n in (2, 5, 12):
        for x in (0.5, 4.0, 15.0):
            assert erlang_cdf(n, x, 1.0) == pytest.approx(special.gammainc(n, x), rel=1e-12)


def test_poisson_tail_deep():
    # leading term x^n/n! dominates for tiny x
    assert poisson_tail(30, 1e-3) == pytest.approx(1e-90 / math.factorial(30), rel=1e-3)


@pytest.mark.parametrize("n, lam", [(2, 1.0), (4, 3.0), (6, 0.7), (10, 1.5)])
def test_erlang_matches_perturbed_hypoexp(n, lam):
    rates = [lam * (1.0 + 1e-6 * k) for k in range(n)]
    p = validate_problem(rates, 1.0)
    erl = erlang_cdf(n, lam, 1.0)
    assert erl > 1e-10
    assert highprecision_hypoexp_cdf(p) == pytest.approx(erl, rel=1e-4)


# ----------------------------------------------------------- extended precision


def test_highprecision_single_rate():
    assert highprecision_hypoexp_cdf(validate_problem([1.0])) == pytest.approx(1 - math.exp(-1), rel=1e-15)


def test_highprecision_two_rates():
    expected = 1 - 2 * math.exp(-1) + math.exp(-2)
    assert highprecision_hypoexp_cdf(validate_problem([1.0, 2.0])) == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(0.39958, abs=1e-5)


def test_highprecision_rejects_duplicates():
    with pytest.raises(DuplicateRates):
        highprecision_hypoexp_cdf(validate_problem(MODEL3))
    with pytest.raises(ValueError):
        highprecision_hypoexp_cdf(validate_problem([1.0, 2.0]), digits=20)


def test_model3_oracle_two_routes():
    series = highprecision_series_cdf(validate_problem(MODEL3))
    assert series == pytest.approx(2.6496870228879e-27, rel=1e-12)
    # distinct-rate closed form on a 1e-9 relative perturbation of the rates
    perturbed = [r * (1.0 + 1e-9 * k) for k, r in enumerate(MODEL3)]
    ross = highprecision_hypoexp_cdf(validate_problem(perturbed), digits=60)
    assert ross == pytest.approx(series, rel=1e-7)


def test_series_matches_closed_form_on_distinct_rates():
    p = validate_problem([0.7, 1.3, 2.2, 4.0, 5.5], 1.7)
    assert highprecision_series_cdf(p) == pytest.approx(highprecision_hypoexp_cdf(p), rel=1e-14)


def test_series_matches_erlang():
    for lam, n in ((0.03, 10), (2.0, 3), (9.0, 10)):
        p = validate_problem([lam] * n)
        assert highprecision_series_cdf(p) == pytest.approx(erlang_cdf(n, lam, 1.0), rel=1e-12)


# --------------------------------------------------------------- Stirling


def test_stirling_small():
    assert stirling_upper_bound(1) == pytest.approx(1.0, rel=1e-15)
    assert stirling_upper_bound(2) == pytest.approx(2.081040380091556, rel=1e-14)
    assert stirling_upper_bound(10) == pytest.approx(3902560.665090631, rel=1e-13)
    assert stirling_upper_bound(10) >= math.factorial(10)


def test_stirling_overflow_is_inf():
    assert stirling_upper_bound(200) == math.inf


def test_problem_default_threshold():
    assert HypoexpProblem(RateVector((1.0,))).threshold == 1.0
