"""Exact double-precision routes to the hypoexponential CDF.

Two routes are provided, plus diagnostics that expose when each one breaks:

* ``ross_cdf``: the O(n^2) alternating closed form. Fast, but it cancels
  catastrophically when rates are close together.
* ``expm_survival``: the first row sum of ``expm(D t)`` for the bidiagonal
  subgenerator ``D``. Stable, but it returns the survival function, so a CDF
  far below machine epsilon is lost to rounding in ``1 - survival``.

Both routes work on the unit-threshold rates ``t * lambda_i``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import DuplicateRates, HypoexpError, HypoexpProblem, RateVector

__all__ = [
    "NonSquare",
    "NonFinite",
    "Verdict",
    "StabilityReport",
    "SurvivalResult",
    "ExactResult",
    "ross_cdf",
    "build_subgenerator",
    "matrix_exponential",
    "expm_survival",
    "exact_cdf",
    "CATASTROPHIC_EPS",
    "SUSPECT_DIGITS",
    "FLOOR_THRESHOLD",
]

# a value outside [-eps, 1 + eps] cannot be a probability
CATASTROPHIC_EPS = 1e-9
# more than this many cancelled digits leaves < ~8 trustworthy ones
SUSPECT_DIGITS = 8.0
# 1000 * double epsilon, below which an exact double route returns rounding noise
FLOOR_THRESHOLD = 1e-12


class NonSquare(HypoexpError):
    pass


class NonFinite(HypoexpError):
    pass


class Verdict(str, enum.Enum):
    STABLE = "stable"
    SUSPECT = "suspect"
    CATASTROPHIC = "catastrophic"


@dataclass(frozen=True)
class StabilityReport:
    """How much cancellation the closed-form sum went through.

    ``max_term_magnitude`` includes the leading 1 of ``1 - sum``, so
    ``cancellation_digits`` is never negative. Term magnitudes are tracked in
    log space; ``log10_max_term`` stays finite even when the magnitude itself
    overflows a double.
    """

    min_rate_gap: float
    max_term_magnitude: float
    log10_max_term: float
    cancellation_digits: float
    verdict: Verdict


class SurvivalResult(NamedTuple):
    raw: float
    clamped: float


@dataclass(frozen=True)
class ExactResult:
    value: float
    route: str
    floor_regime: bool
    report: StabilityReport | None = None
    warnings: tuple[str, ...] = field(default=())


def _min_gap(lam: np.ndarray) -> float:
    if lam.size < 2:
        return math.inf
    s = np.sort(lam)
    return float(np.min(np.diff(s)))


def _classify(value: float, digits: float) -> Verdict:
    if not math.isfinite(value) or value < -CATASTROPHIC_EPS or value > 1.0 + CATASTROPHIC_EPS:
        return Verdict.CATASTROPHIC
    if digits > SUSPECT_DIGITS:
        return Verdict.SUSPECT
    return Verdict.STABLE


def ross_cdf(problem: HypoexpProblem) -> tuple[float, StabilityReport]:
    """Closed-form CDF evaluated in plain double arithmetic.

    The value is returned as computed, even when it is not a probability;
    reproducing the instability is the point. The accompanying report measures
    term magnitudes in log form so it never overflows.

    Raises
    ------
    DuplicateRates
        if two rates are exactly equal (the products divide by zero).
    """
    if problem.rates.has_duplicates():
        raise DuplicateRates("closed form needs pairwise distinct rates")
    lam = problem.unit_rates().tolist()
    n = len(lam)

    total = 0.0
    log_terms = np.empty(n)
    for i in range(n):
        term = math.exp(-lam[i])
        log_mag = -lam[i]
        for j in range(n):
            if j != i:
                ratio = lam[j] / (lam[j] - lam[i])
                term *= ratio
                log_mag += math.log(abs(ratio))
        total += term
        log_terms[i] = log_mag
    value = 1.0 - total

    log_peak = max(0.0, float(np.max(log_terms)))
    log10_peak = log_peak / math.log(10.0)
    if value != 0.0 and math.isfinite(value):
        digits = max(0.0, log10_peak - math.log10(abs(value)))
    else:
        digits = math.inf
    try:
        peak = math.exp(log_peak)
    except OverflowError:
        peak = math.inf
    report = StabilityReport(
        min_rate_gap=_min_gap(problem.rates.array),
        max_term_magnitude=peak,
        log10_max_term=log10_peak,
        cancellation_digits=digits,
        verdict=_classify(value, digits),
    )
    return value, report


def build_subgenerator(rates: RateVector | HypoexpProblem) -> np.ndarray:
    """Upper-bidiagonal subgenerator: ``-lambda_i`` on the diagonal, ``lambda_i`` above it.

    The last row is ``(0, ..., 0, -lambda_n)``: absorption leaves the chain at
    rate ``lambda_n``, so every row sum except the last is zero.
    """
    lam = rates.rates.array if isinstance(rates, HypoexpProblem) else RateVector(tuple(rates)).array
    D = np.diag(-lam)
    if lam.size > 1:
        D += np.diag(lam[:-1], k=1)
    return D


# Higham (2005) scaling-and-squaring: one-norm bounds for each Pade degree
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}


def _pade_low(A: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[m]
    ident = np.eye(A.shape[0])
    A2 = A @ A
    powers = [ident, A2]
    for _ in range((m - 1) // 2 - 1):
        powers.append(powers[-1] @ A2)
    odd = sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    even = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return A @ odd, even


def _pade13(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[13]
    ident = np.eye(A.shape[0])
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return U, V


def matrix_exponential(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant.

    Degrees 3, 5, 7 and 9 are tried against their one-norm thresholds; above
    those, ``A`` is scaled by ``2**-s`` into the degree-13 range and the result
    squared ``s`` times. No balancing is done.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise NonSquare(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFinite("matrix has non-finite entries")

    norm = float(np.max(np.sum(np.abs(A), axis=0)))
    s = 0
    for m in (3, 5, 7, 9):
        if norm <= _THETA[m]:
            U, V = _pade_low(A, m)
            break
    else:
        if norm > _THETA[13]:
            s = max(0, int(math.ceil(math.log2(norm / _THETA[13]))))
        U, V = _pade13(A / 2.0**s)

    X = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        X = X @ X
    return X


def expm_survival(problem: HypoexpProblem) -> SurvivalResult:
    """Survival ``P(S > t)`` as the first row sum of ``expm(D t)``.

    ``raw`` is the row sum exactly as computed; ``clamped`` is pinned to
    ``[0, 1]``. Rounding can push ``raw`` a few ulps above 1.
    """
    D = build_subgenerator(RateVector(tuple(problem.unit_rates())))
    E = matrix_exponential(D)
    raw = float(np.sum(E[0, :]))
    return SurvivalResult(raw, min(1.0, max(0.0, raw)))


def exact_cdf(problem: HypoexpProblem) -> ExactResult:
    """Best double-precision exact CDF with its route and diagnostics.

    The closed form is used when the rates are distinct and its verdict is
    stable; otherwise ``1 - expm_survival``. Results under ``FLOOR_THRESHOLD``
    are flagged: at that size the value is dominated by rounding and the
    importance-sampling estimator should be used instead.
    """
    notes = []
    report = None
    if not problem.rates.has_duplicates():
        value, report = ross_cdf(problem)
        if report.verdict is Verdict.STABLE:
            route = "ross"
        else:
            notes.append(f"closed form {report.verdict.value}; switched to matrix exponential")
            value = 1.0 - expm_survival(problem).raw
            route = "expm"
    else:
        value = 1.0 - expm_survival(problem).raw
        route = "expm"
        notes.append("repeated rates; closed form undefined")

    floor = abs(value) < FLOOR_THRESHOLD
    if floor:
        notes.append(
            f"result {value:.6e} is below {FLOOR_THRESHOLD:g}: double-precision floor regime, "
            "use the importance-sampling estimator"
        )
    return ExactResult(value=value, route=route, floor_regime=floor, report=report,
                       warnings=tuple(notes))
