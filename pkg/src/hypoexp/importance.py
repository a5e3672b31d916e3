"""Importance-sampling estimator for ``P(X_1 + ... + X_n <= 1)``.

Each replication draws ``y_1 .. y_n`` i.i.d. exp(n), so the proposal sum is
Erlang(n, n) with mean 1 and the target event is not rare under it. Accepted
draws are weighted by the likelihood ratio

    Z = prod_i lambda_i exp(-lambda_i y_i) / prod_i n exp(-n y_i),

which is computed as ``sum_i log(lambda_i / n) + sum_i (n - lambda_i) y_i``
and accumulated with a streaming log-sum-exp. The estimator is unbiased and
its relative error is bounded by ``sqrt(sqrt(n) exp(2 (max - min) + 1) / N)``
independently of how small the probability is.

A problem with threshold ``t`` is handled through its unit-threshold form with
rates ``t * lambda_i``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import HypoexpError, HypoexpProblem, RateVector

__all__ = [
    "AllSamplesRejected",
    "ISConfig",
    "EstimateResult",
    "make_rng",
    "open_uniform",
    "sample_weight",
    "is_estimate",
    "second_moment_ratio_bound",
    "re_bound",
    "empirical_second_moment_ratio",
]

_TINY_UNIFORM = 2.0**-54


class AllSamplesRejected(HypoexpError):
    pass


@dataclass(frozen=True)
class ISConfig:
    """Sample size and RNG stream for one estimator run.

    ``stream`` selects an independent substream of ``seed``; ``None`` uses the
    root stream. ``chunk_size`` bounds memory and does not change the draws.
    """

    sample_size: int
    seed: int = 1
    stream: int | tuple[int, ...] | None = None
    chunk_size: int = 1 << 15
    rescale_to_unit: bool = True

    def __post_init__(self):
        if int(self.sample_size) != self.sample_size or self.sample_size < 1:
            raise HypoexpError(f"sample_size must be a positive integer, got {self.sample_size!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise HypoexpError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        if any(k < 0 for k in _stream_key(self.stream)):
            raise HypoexpError(f"stream must be >= 0, got {self.stream!r}")
        if self.chunk_size < 1:
            raise HypoexpError("chunk_size must be >= 1")
        if not self.rescale_to_unit:
            raise HypoexpError("only unit-threshold rescaling is supported")


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    log_estimate: float
    samples: int
    accepted: int
    elapsed_seconds: float
    seed: int
    stream: int | tuple[int, ...] | None = None


def _stream_key(stream) -> tuple[int, ...]:
    if stream is None:
        return ()
    if isinstance(stream, tuple):
        return tuple(int(s) for s in stream)
    return (int(stream),)


def make_rng(seed: int, stream: int | tuple[int, ...] | None = None) -> np.random.Generator:
    """PCG64 generator for ``(seed, stream)``.

    Streams come from ``SeedSequence`` spawn keys, so ``(seed, k)`` for
    different ``k`` are statistically independent and reproducible across
    platforms and numpy releases that keep the PCG64 stream stable.
    """
    key = _stream_key(stream)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    u = rng.random(size)
    u[u == 0.0] = _TINY_UNIFORM
    return u


class _LogSum:
    """Running ``log(sum(exp(v)))`` kept as ``(shift, scaled_sum)``."""

    def __init__(self):
        self.shift = -math.inf
        self.total = 0.0

    def add(self, logs: np.ndarray) -> None:
        if logs.size == 0:
            return
        peak = float(np.max(logs))
        if peak > self.shift:
            if self.total:
                self.total *= math.exp(self.shift - peak)
            self.shift = peak
        self.total += math.fsum(np.exp(logs - self.shift))

    def log(self) -> float:
        return self.shift + math.log(self.total) if self.total > 0.0 else -math.inf

    def mean(self, count: int) -> float:
        if self.total == 0.0:
            return 0.0
        scale = math.exp(self.shift)
        if scale == 0.0 or math.isinf(scale):
            return math.exp(self.log() - math.log(count))
        return self.total * scale / count


def _log_weights(lam: np.ndarray, draws: np.ndarray) -> np.ndarray:
    n = lam.size
    return np.sum(np.log(lam / n)) + draws @ (n - lam)


def sample_weight(rates, proposal_draws) -> float:
    """Likelihood-ratio weight of one proposal vector; zero when its sum exceeds 1.

    ``rates`` are the unit-threshold rates.
    """
    lam = RateVector(tuple(rates)).array
    y = np.asarray(proposal_draws, dtype=float)
    if y.shape != lam.shape:
        raise HypoexpError(f"expected {lam.size} draws, got shape {y.shape}")
    if np.any(y <= 0.0) or not np.all(np.isfinite(y)):
        raise HypoexpError("proposal draws must be finite and strictly positive")
    if math.fsum(y) > 1.0:
        return 0.0
    return math.exp(float(_log_weights(lam, y[None, :])[0]))


def _sample(problem: HypoexpProblem, config: ISConfig, squares: bool):
    lam = problem.unit_rates()
    n = lam.size
    rng = make_rng(config.seed, config.stream)
    first, second = _LogSum(), _LogSum()
    accepted = 0
    remaining = config.sample_size
    start = time.perf_counter()
    while remaining:
        rows = min(remaining, config.chunk_size)
        remaining -= rows
        y = -np.log(open_uniform(rng, (rows, n))) / n
        keep = y.sum(axis=1) <= 1.0
        hits = int(np.count_nonzero(keep))
        if not hits:
            continue
        accepted += hits
        lw = _log_weights(lam, y[keep])
        first.add(lw)
        if squares:
            second.add(2.0 * lw)
    elapsed = time.perf_counter() - start
    return accepted, first, second, elapsed


def is_estimate(problem: HypoexpProblem, config: ISConfig) -> EstimateResult:
    """Run the importance-sampling estimator once.

    Deterministic for fixed ``(problem, sample_size, seed, stream)``. The
    timing covers the sampling loop only.
    """
    N = config.sample_size
    accepted, first, _, elapsed = _sample(problem, config, squares=False)
    log_est = first.log() - math.log(N) if accepted else -math.inf
    return EstimateResult(
        estimate=first.mean(N),
        log_estimate=log_est,
        samples=N,
        accepted=accepted,
        elapsed_seconds=elapsed,
        seed=config.seed,
        stream=config.stream,
    )


def _unit_rates(rates) -> np.ndarray:
    if isinstance(rates, HypoexpProblem):
        return rates.unit_rates()
    if isinstance(rates, RateVector):
        return rates.array
    return RateVector(tuple(rates)).array


def second_moment_ratio_bound(rates) -> float:
    """Upper bound ``sqrt(n) * exp(2 (max_rate - min_rate) + 1)`` on ``E[Z^2] / E[Z]^2``.

    Accepts unit-threshold rates or a problem (which is rescaled first).
    """
    lam = _unit_rates(rates)
    return math.sqrt(lam.size) * math.exp(2.0 * (float(lam.max()) - float(lam.min())) + 1.0)


def re_bound(rates, N: int) -> float:
    """Bound on the relative error of one estimate built from ``N`` samples."""
    if N < 1:
        raise HypoexpError("N must be >= 1")
    return math.sqrt(second_moment_ratio_bound(rates) / N)


def empirical_second_moment_ratio(problem: HypoexpProblem, config: ISConfig) -> float:
    """Sample estimate of ``E[Z^2] / E[Z]^2``, i.e. ``N * sum Z^2 / (sum Z)^2``.

    Raises
    ------
    AllSamplesRejected
        if no draw landed in the target region.
    """
    N = config.sample_size
    accepted, first, second, _ = _sample(problem, config, squares=True)
    if not accepted:
        raise AllSamplesRejected(f"none of {N} proposal draws was accepted")
    if first.shift == 0.0 and second.shift == 0.0:
        # indicator weights: keep the ratio exact
        return N * second.total / (first.total * first.total)
    return math.exp(math.log(N) + second.log() - 2.0 * first.log())
