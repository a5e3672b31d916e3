"""Experiment harness: K independent runs, RE-hat / RTV statistics and the model tables.

The relative error of an estimator is estimated from ``K`` independent runs
as ``S / mean``, with ``S`` the unbiased sample standard deviation. RTV
("relative time variance") is total sampling time multiplied by RE-hat
squared, so a method that is twice as fast with the same RE scores half.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .core import (
    DuplicateRates,
    HypoexpError,
    HypoexpProblem,
    RateVector,
    erlang_cdf,
    highprecision_series_cdf,
)
from .exact import CATASTROPHIC_EPS, FLOOR_THRESHOLD, Verdict, expm_survival, ross_cdf
from .importance import EstimateResult, ISConfig, is_estimate, make_rng, open_uniform

__all__ = [
    "UndefinedRE",
    "IOFailure",
    "TrialSummary",
    "ModelSpec",
    "ESTIMATORS",
    "crude_mc_estimate",
    "run_trials",
    "builtin_models",
    "table_rows",
    "resolve_sample_size",
    "reproduce_tables",
    "format_csv",
    "format_json",
    "format_plain",
    "CSV_HEADER",
]

CSV_HEADER = ("model", "algorithm", "n", "t", "N", "K", "estimate", "re_hat", "rtv", "cpu_seconds", "flags")


class UndefinedRE(UserWarning):
    """All runs returned zero, so RE-hat = S / mean is undefined."""


class IOFailure(HypoexpError, OSError):
    pass


def crude_mc_estimate(problem: HypoexpProblem, N: int, seed: int, stream=None,
                      chunk_size: int = 1 << 15) -> EstimateResult:
    """Plain Monte Carlo: the fraction of ``N`` direct samples with ``sum X_i <= t``.

    Useless for rare events (it returns 0), which is what it is here to show.
    """
    if N < 1:
        raise HypoexpError("N must be >= 1")
    lam = problem.unit_rates()
    rng = make_rng(seed, stream)
    hits = 0
    remaining = N
    start = time.perf_counter()
    while remaining:
        rows = min(remaining, chunk_size)
        remaining -= rows
        x = -np.log(open_uniform(rng, (rows, lam.size))) / lam
        hits += int(np.count_nonzero(x.sum(axis=1) <= 1.0))
    elapsed = time.perf_counter() - start
    return EstimateResult(
        estimate=hits / N,
        log_estimate=math.log(hits / N) if hits else -math.inf,
        samples=N,
        accepted=hits,
        elapsed_seconds=elapsed,
        seed=seed,
        stream=stream,
    )


def _run_is(problem, N, seed, stream):
    return is_estimate(problem, ISConfig(N, seed, stream))


ESTIMATORS: dict[str, Callable[..., EstimateResult]] = {
    "IS": _run_is,
    "crude-MC": crude_mc_estimate,
}

# keeps the estimators' streams apart under one master seed
_STREAM_TAG = {"IS": 0, "crude-MC": 1}


@dataclass(frozen=True)
class TrialSummary:
    algorithm: str
    per_run_estimates: tuple[float, ...]
    mean: float
    sample_std: float
    re_hat: float
    rtv: float
    total_cpu_seconds: float
    N: int
    K: int
    master_seed: int

    @property
    def re_defined(self) -> bool:
        return self.mean > 0.0


def summarize(algorithm: str, estimates, seconds: float, N: int, master_seed: int) -> TrialSummary:
    est = tuple(float(e) for e in estimates)
    K = len(est)
    if K < 2:
        raise HypoexpError("K must be >= 2 to estimate a standard deviation")
    if min(est) == max(est):
        mean, std = est[0], 0.0
    else:
        mean = math.fsum(est) / K
        std = math.sqrt(math.fsum((e - mean) ** 2 for e in est) / (K - 1))
    if mean > 0.0:
        re = std / mean
        rtv = seconds * re * re
    else:
        warnings.warn(f"{algorithm}: every run returned 0, RE-hat undefined", UndefinedRE, stacklevel=3)
        re = rtv = math.nan
    return TrialSummary(algorithm, est, mean, std, re, rtv, seconds, N, K, master_seed)


def run_trials(problem: HypoexpProblem, estimator: str, N: int, K: int, master_seed: int,
               workers: int = 1) -> TrialSummary:
    """Run ``K`` independent estimates and aggregate them.

    Run ``k`` uses RNG stream ``(tag, k)`` of ``master_seed``, so the
    estimates do not depend on ``workers`` or on scheduling order. The CPU
    figure is the sum of the per-run sampling times.
    """
    if estimator not in ESTIMATORS:
        raise HypoexpError(f"unknown estimator {estimator!r}; choose from {sorted(ESTIMATORS)}")
    if K < 2:
        raise HypoexpError("K must be >= 2")
    if N < 1:
        raise HypoexpError("N must be >= 1")
    fn = ESTIMATORS[estimator]
    tag = _STREAM_TAG[estimator]

    def one(k):
        return fn(problem, N, master_seed, (tag, k))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, range(K)))
    else:
        runs = [one(k) for k in range(K)]
    seconds = math.fsum(r.elapsed_seconds for r in runs)
    return summarize(estimator, [r.estimate for r in runs], seconds, N, master_seed)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    rates: RateVector
    threshold: float
    oracle_value: float
    oracle_provenance: str

    @property
    def problem(self) -> HypoexpProblem:
        return HypoexpProblem(self.rates, self.threshold)


@functools.lru_cache(maxsize=1)
def _models() -> tuple[ModelSpec, ...]:
    m1 = RateVector((0.03,) * 10)
    m2 = RateVector((0.01,) * 10)
    m3 = RateVector((0.01, 0.011, 0.009) * 3 + (0.01,))
    return (
        ModelSpec("model1", m1, 1.0, erlang_cdf(10, 0.03, 1.0), "poisson-tail"),
        ModelSpec("model2", m2, 1.0, erlang_cdf(10, 0.01, 1.0), "poisson-tail"),
        ModelSpec("model3", m3, 1.0, highprecision_series_cdf(HypoexpProblem(m3, 1.0)),
                  "extended-precision-series"),
    )


def builtin_models() -> list[ModelSpec]:
    """The three benchmark models (n = 10, t = 1) with their oracle values.

    Oracles are computed once per process and cached.
    """
    return list(_models())


def resolve_sample_size(policy, n: int) -> int:
    """Sample size from a policy: an integer, or ``"<k>n"`` meaning ``k * n``."""
    try:
        if isinstance(policy, str) and policy.endswith("n"):
            N = int(policy[:-1] or 1) * n
        else:
            N = int(policy)
    except ValueError as exc:
        raise HypoexpError(f"bad sample-size policy {policy!r}") from exc
    if N < 1:
        raise HypoexpError(f"sample size must be >= 1, got {N}")
    return N


def _fmt(value, spec: str) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if math.isnan(value):
        return "nan"
    return format(value, spec)


def _exact_flags(value: float, verdict: Verdict | None = None) -> list[str]:
    flags = []
    if verdict is Verdict.CATASTROPHIC or not math.isfinite(value) or not (
        -CATASTROPHIC_EPS <= value <= 1.0 + CATASTROPHIC_EPS
    ):
        flags.append("catastrophic")
    if math.isfinite(value) and abs(value) < FLOOR_THRESHOLD:
        flags.append("floor-regime")
    return flags


def _row(model: ModelSpec, algorithm: str, estimate, *, N=None, K=None, re_hat=None, rtv=None,
         cpu=None, flags=()) -> dict:
    return {
        "model": model.name,
        "algorithm": algorithm,
        "n": str(model.rates.n),
        "t": format(model.threshold, "g"),
        "N": "" if N is None else str(N),
        "K": "" if K is None else str(K),
        "estimate": _fmt(estimate, ".5e"),
        "re_hat": _fmt(re_hat, ".2e"),
        "rtv": _fmt(rtv, ".2e"),
        "cpu_seconds": _fmt(cpu, ".3e"),
        "flags": ";".join(flags),
    }


def _mc_row(model, summary: TrialSummary, N, K) -> dict:
    if summary.re_defined:
        return _row(model, summary.algorithm, summary.mean, N=N, K=K, re_hat=summary.re_hat,
                    rtv=summary.rtv, cpu=summary.total_cpu_seconds)
    return _row(model, summary.algorithm, summary.mean, N=N, K=K, re_hat="undefined",
                rtv="undefined", cpu=summary.total_cpu_seconds, flags=("undefined-re",))


def table_rows(N_policy="100n", K: int = 10, master_seed: int = 1,
               models: list[ModelSpec] | None = None, workers: int = 1) -> list[dict]:
    """Rows for every model: IS, exact-ross, exact-expm, crude-MC and the oracle.

    Values are already formatted as the strings that go into the CSV.
    """
    rows = []
    for model in models or builtin_models():
        problem = model.problem
        N = resolve_sample_size(N_policy, model.rates.n)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UndefinedRE)
            is_sum = run_trials(problem, "IS", N, K, master_seed, workers)
            mc_sum = run_trials(problem, "crude-MC", N, K, master_seed, workers)
        rows.append(_mc_row(model, is_sum, N, K))

        start = time.perf_counter()
        try:
            value, report = ross_cdf(problem)
            verdict = report.verdict
        except DuplicateRates:
            # the products divide by zero; no meaningful value exists
            value, verdict = math.nan, Verdict.CATASTROPHIC
        cpu = time.perf_counter() - start
        rows.append(_row(model, "exact-ross", value, cpu=cpu, flags=_exact_flags(value, verdict)))

        start = time.perf_counter()
        value = 1.0 - expm_survival(problem).raw
        cpu = time.perf_counter() - start
        rows.append(_row(model, "exact-expm", value, cpu=cpu, flags=_exact_flags(value)))

        rows.append(_mc_row(model, mc_sum, N, K))
        rows.append(_row(model, f"oracle:{model.oracle_provenance}", model.oracle_value,
                         flags=("oracle",)))
    return rows


def format_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _json_value(key: str, text: str):
    if key == "flags":
        return text
    if text in ("", "nan"):
        return None
    if key in ("n", "N", "K"):
        return int(text)
    if key in ("t", "estimate", "re_hat", "rtv", "cpu_seconds") and text != "undefined":
        return float(text)
    return text


def format_json(rows: list[dict]) -> str:
    objs = [{k: _json_value(k, row[k]) for k in CSV_HEADER} for row in rows]
    return json.dumps(objs, indent=2, allow_nan=False) + "\n"


def format_plain(rows: list[dict]) -> str:
    widths = {k: max(len(k), *(len(r[k]) for r in rows)) for k in CSV_HEADER}
    lines = ["  ".join(k.ljust(widths[k]) for k in CSV_HEADER)]
    lines += ["  ".join(r[k].ljust(widths[k]) for k in CSV_HEADER).rstrip() for r in rows]
    return "\n".join(lines) + "\n"


_FORMATTERS = {"csv": format_csv, "json": format_json, "plain": format_plain}


def reproduce_tables(output_path=None, N_policy="100n", K: int = 10, master_seed: int = 1,
                     fmt: str = "csv", workers: int = 1) -> str:
    """Build the model tables and write them to ``output_path`` (if given).

    Returns the rendered text. Raises :class:`IOFailure` if the file cannot
    be written.
    """
    text = _FORMATTERS[fmt](table_rows(N_policy, K, master_seed, workers=workers))
    if output_path is not None:
        try:
            Path(output_path).write_text(text)
        except OSError as exc:
            raise IOFailure(f"cannot write {output_path}: {exc}") from exc
    return text
