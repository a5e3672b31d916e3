"""Domain types, input validation and integer-order special functions.

Everything here is a pure function of its arguments. The special functions
are written for integer order only; they back the Erlang oracle used by the
estimators' tests and the variance-bound property suite.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import Iterable, Sequence

import mpmath
import numpy as np

__all__ = [
    "HypoexpError",
    "EmptyRates",
    "NonPositiveRate",
    "NonFiniteInput",
    "NonPositiveThreshold",
    "InvalidOrder",
    "DuplicateRates",
    "RateVector",
    "HypoexpProblem",
    "SpecialFunctionDomain",
    "validate_problem",
    "lower_incomplete_gamma",
    "poisson_tail",
    "exp_moment_integral",
    "erlang_cdf",
    "highprecision_hypoexp_cdf",
    "highprecision_series_cdf",
    "stirling_upper_bound",
    "DEFAULT_DIGITS",
]

DEFAULT_DIGITS = 60

# relative size below which a series term no longer changes the partial sum
_SERIES_CUTOFF = 1e-18


class HypoexpError(ValueError):
    """Base class for every input or domain error raised by this package."""


class EmptyRates(HypoexpError):
    pass


class NonPositiveRate(HypoexpError):
    pass


class NonFiniteInput(HypoexpError):
    pass


class NonPositiveThreshold(HypoexpError):
    pass


class InvalidOrder(HypoexpError):
    pass


class DuplicateRates(HypoexpError):
    pass


def _as_real(value, what: str) -> float:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Real):
        raise NonFiniteInput(f"{what} must be a real number, got {value!r}")
    try:
        x = float(value)
    except (TypeError, ValueError, OverflowError) as exc:
        raise NonFiniteInput(f"{what} is not representable as a float: {value!r}") from exc
    if not math.isfinite(x):
        raise NonFiniteInput(f"{what} must be finite, got {x!r}")
    return x


@dataclass(frozen=True)
class RateVector:
    """Ordered exponential rates ``lambda_1 .. lambda_n`` (units 1/time)."""

    rates: tuple[float, ...]

    def __post_init__(self):
        rates = self.rates
        if isinstance(rates, (str, bytes)) or not isinstance(rates, Iterable):
            raise NonFiniteInput(f"rates must be a sequence of reals, got {rates!r}")
        values = tuple(_as_real(r, f"rate[{i}]") for i, r in enumerate(rates))
        if not values:
            raise EmptyRates("at least one rate is required")
        for i, r in enumerate(values):
            if r <= 0.0:
                raise NonPositiveRate(f"rate[{i}] = {r!r} is not strictly positive")
        object.__setattr__(self, "rates", values)

    def __len__(self) -> int:
        return len(self.rates)

    def __iter__(self):
        return iter(self.rates)

    def __getitem__(self, i):
        return self.rates[i]

    @property
    def n(self) -> int:
        return len(self.rates)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.rates, dtype=float)

    @property
    def max_rate(self) -> float:
        return max(self.rates)

    @property
    def min_rate(self) -> float:
        return min(self.rates)

    def has_duplicates(self) -> bool:
        # exact equality on purpose; near-equal rates are legal
        return len(set(self.rates)) != len(self.rates)


@dataclass(frozen=True)
class HypoexpProblem:
    """Rates plus a threshold ``t``; the target is ``P(X_1 + ... + X_n <= t)``."""

    rates: RateVector
    threshold: float = 1.0

    def __post_init__(self):
        if not isinstance(self.rates, RateVector):
            object.__setattr__(self, "rates", RateVector(self.rates))
        t = _as_real(self.threshold, "threshold")
        if t <= 0.0:
            raise NonPositiveThreshold(f"threshold must be > 0, got {t!r}")
        object.__setattr__(self, "threshold", t)

    @property
    def n(self) -> int:
        return self.rates.n

    def unit_rates(self) -> np.ndarray:
        """Rates of the equivalent unit-threshold problem, ``t * lambda_i``."""
        return self.rates.array * self.threshold

    def rescaled(self) -> "HypoexpProblem":
        return HypoexpProblem(RateVector(tuple(self.unit_rates())), 1.0)


@dataclass(frozen=True)
class SpecialFunctionDomain:
    order: int
    argument: float

    def __post_init__(self):
        _check_order(self.order)
        x = _as_real(self.argument, "argument")
        if x < 0.0:
            raise NonFiniteInput(f"argument must be >= 0, got {x!r}")
        object.__setattr__(self, "argument", x)


def validate_problem(rates: Sequence[float], t: float = 1.0) -> HypoexpProblem:
    """Build a validated :class:`HypoexpProblem`, preserving rate order.

    Raises a subclass of :class:`HypoexpError` for every bad input.
    """
    return HypoexpProblem(RateVector(rates), t)


def _check_order(n) -> int:
    if isinstance(n, (bool, np.bool_)) or not isinstance(n, numbers.Integral):
        raise InvalidOrder(f"order must be a positive integer, got {n!r}")
    n = int(n)
    if n < 1:
        raise InvalidOrder(f"order must be >= 1, got {n}")
    return n


def _check_argument(x) -> float:
    x = _as_real(x, "x")
    if x < 0.0:
        raise NonFiniteInput(f"x must be >= 0, got {x!r}")
    return x


def poisson_tail(n: int, x: float) -> float:
    """Return ``P(Poisson(x) >= n)``, which equals ``gamma(n, x) / (n-1)!``.

    For ``x < n`` the tail is summed upward from ``k = n`` so that values far
    below double-precision epsilon keep full relative accuracy. Otherwise the
    result is at least about one half and the complement is safe.
    """
    n = _check_order(n)
    x = _check_argument(x)
    if x == 0.0:
        return 0.0
    if x < n:
        term = math.exp(n * math.log(x) - x - math.lgamma(n + 1))
        if term == 0.0:
            return 0.0
        terms = [term]
        k = n
        while True:
            k += 1
            term *= x / k
            terms.append(term)
            if term < _SERIES_CUTOFF * terms[0]:
                break
        return math.fsum(terms)
    # head = P(Poisson(x) <= n-1), summed downward from its largest term
    k = n - 1
    term = math.exp(k * math.log(x) - x - math.lgamma(k + 1)) if k > 0 else math.exp(-x)
    terms = [term]
    while k > 0:
        term *= k / x
        k -= 1
        terms.append(term)
        if term < _SERIES_CUTOFF * terms[0]:
            break
    return max(0.0, 1.0 - math.fsum(terms))


def lower_incomplete_gamma(n: int, x: float) -> float:
    """Lower incomplete gamma ``int_0^x t^(n-1) e^(-t) dt`` for integer ``n >= 1``."""
    n = _check_order(n)
    p = poisson_tail(n, x)
    if n <= 171:
        return float(math.factorial(n - 1)) * p
    if p == 0.0:
        return 0.0
    try:
        return math.exp(math.lgamma(n) + math.log(p))
    except OverflowError:
        return math.inf


def exp_moment_integral(n: int, x: float) -> float:
    """Compute ``I(n, x) = int_0^x t^(n-1) e^t dt``.

    Uses the all-positive expansion ``x^n * sum_k x^k / (k! (n+k))``. The
    integration-by-parts recurrence cancels badly whenever ``x`` is small
    relative to ``n``, so it is only used as a cross-check in the tests.
    """
    n = _check_order(n)
    x = _check_argument(x)
    if x == 0.0:
        return 0.0
    if n == 1:
        return math.expm1(x)
    if x > 500.0:
        return _exp_moment_logspace(n, x)
    terms = []
    running = 0.0
    ratio = 1.0  # x^k / k!
    k = 0
    while True:
        terms.append(ratio / (n + k))
        running += terms[-1]
        k += 1
        ratio *= x / k
        if k > x and ratio / (n + k) < _SERIES_CUTOFF * running:
            break
    try:
        return math.exp(n * math.log(x) + math.log(math.fsum(terms)))
    except OverflowError:
        return math.inf


def _exp_moment_logspace(n: int, x: float) -> float:
    # same expansion with log-magnitude terms; x^k / k! overflows for x > ~700
    logs = [-math.log(n)]
    lx = math.log(x)
    k = 0
    while True:
        k += 1
        logs.append(logs[-1] + lx - math.log(k) + math.log(n + k - 1) - math.log(n + k))
        if k > x and logs[-1] < max(logs) + math.log(_SERIES_CUTOFF):
            break
    m = max(logs)
    s = math.fsum(math.exp(v - m) for v in logs)
    try:
        return math.exp(n * lx + m + math.log(s))
    except OverflowError:
        return math.inf


def erlang_cdf(n: int, rate: float, t: float) -> float:
    """CDF of the Erlang(n, rate) distribution at ``t``.

    Computed as the Poisson tail ``P(Poisson(rate * t) >= n)``, which keeps
    full relative accuracy deep in the lower tail (e.g. 1e-27).
    """
    n = _check_order(n)
    rate = _as_real(rate, "rate")
    if rate <= 0.0:
        raise NonPositiveRate(f"rate must be > 0, got {rate!r}")
    t = _check_argument(t)
    return poisson_tail(n, rate * t)


def _mp_rates(problem: HypoexpProblem) -> list:
    # exact binary values of the unit-threshold rates
    return [mpmath.mpf(float(r)) for r in problem.unit_rates()]


def highprecision_hypoexp_cdf(problem: HypoexpProblem, digits: int = DEFAULT_DIGITS) -> float:
    """Evaluate the closed-form alternating sum in extended precision.

    ``1 - sum_i exp(-lambda_i) prod_{j != i} lambda_j / (lambda_j - lambda_i)``
    on the unit-threshold rates. The working precision is ``digits`` plus the
    number of digits the largest term can cancel, so the result keeps roughly
    ``digits`` significant figures whatever the rate spacing.

    Raises
    ------
    DuplicateRates
        if two rates are exactly equal.
    """
    if digits < 30:
        raise ValueError("digits must be >= 30")
    if problem.rates.has_duplicates():
        raise DuplicateRates("closed form needs pairwise distinct rates")
    lam = _mp_rates(problem)
    n = len(lam)
    with mpmath.workdps(30):
        peak = mpmath.mpf(1)
        for i in range(n):
            mag = mpmath.exp(-lam[i])
            for j in range(n):
                if j != i:
                    mag *= abs(lam[j] / (lam[j] - lam[i]))
            peak = max(peak, mag)
        extra = int(mpmath.ceil(mpmath.log10(peak))) + 10
    with mpmath.workdps(digits + extra):
        total = mpmath.mpf(0)
        for i in range(n):
            term = mpmath.exp(-lam[i])
            for j in range(n):
                if j != i:
                    term *= lam[j] / (lam[j] - lam[i])
            total += term
        return float(1 - total)


def highprecision_series_cdf(problem: HypoexpProblem, digits: int = DEFAULT_DIGITS) -> float:
    """CDF from the Taylor series of the subgenerator exponential, in extended precision.

    ``P(S <= 1) = -sum_{k>=n} e_1 D^k 1 / k!`` on the unit-threshold rates; the
    terms for ``k < n`` vanish because ``D^k 1`` is supported on its last ``k``
    entries. Works for repeated rates, where the closed form is undefined.
    """
    if digits < 30:
        raise ValueError("digits must be >= 30")
    lam = _mp_rates(problem)
    n = len(lam)
    norm = 2 * max(lam)
    # alternating terms can reach exp(norm) before decaying
    extra = int(norm / math.log(10)) + 10
    with mpmath.workdps(digits + extra):
        v = [mpmath.mpf(1)] * n
        total = mpmath.mpf(0)
        k = 0
        while True:
            k += 1
            v = [(-lam[i] * v[i] + (lam[i] * v[i + 1] if i + 1 < n else 0)) / k for i in range(n)]
            if k < n:
                continue
            total -= v[0]
            size = max(abs(c) for c in v)
            if k > norm and size <= abs(total) * mpmath.mpf(10) ** (-(digits + 5)):
                break
            if total == 0 and size == 0:
                break
        return float(total)


def stirling_upper_bound(n: int) -> float:
    """Return ``n^(n + 1/2) * e^(1 - n)``, an upper bound on ``n!``.

    Returns ``inf`` once the value leaves the double range.
    """
    n = _check_order(n)
    try:
        return math.exp((n + 0.5) * math.log(n) - n + 1.0)
    except OverflowError:
        return math.inf
