"""Command-line interface: ``hypoexp {exact,estimate,bound,bench,oracle}``.

Exit status: 0 on success (including a catastrophic exact result, which is
reported rather than refused), 2 on malformed input or bad parameters, 3 on
I/O failure.

Rates are given inline (``--rates 1,2,3``; ``0.03x10`` repeats a value) or
as a file with one value per line and ``#`` comments (``--rates-file``).
``HYPOEXP_SEED`` overrides the default seed and ``HYPOEXP_OUTPUT_DIR`` makes
``bench`` write its table there when ``--output`` is not given.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import bench
from .core import (
    HypoexpError,
    HypoexpProblem,
    erlang_cdf,
    highprecision_hypoexp_cdf,
    highprecision_series_cdf,
    validate_problem,
)
from .exact import exact_cdf, expm_survival, ross_cdf
from .importance import ISConfig, is_estimate, re_bound, second_moment_ratio_bound

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def parse_rates(text: str) -> list[float]:
    """Parse ``"1,2,3"``; ``"0.03x10"`` expands to ten copies of 0.03."""
    rates = []
    for item in text.replace(" ", "").split(","):
        if not item:
            continue
        value, sep, count = item.partition("x")
        if not sep:
            value, sep, count = item.partition("*")
        try:
            rates.extend([float(value)] * (int(count) if sep else 1))
        except ValueError as exc:
            raise _UsageError(f"cannot parse rate {item!r}") from exc
    return rates


def read_rates_file(path) -> list[float]:
    rates = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rates.append(float(line))
        except ValueError as exc:
            raise _UsageError(f"{path}:{lineno}: not a number: {line!r}") from exc
    return rates


def write_rates_file(path, rates) -> None:
    # repr round-trips a double exactly
    Path(path).write_text("".join(f"{float(r)!r}\n" for r in rates))


def _sci(x: float) -> str:
    return f"{x:.5e}"


def _default_seed() -> int:
    env = os.environ.get("HYPOEXP_SEED")
    if env is None:
        return 1
    try:
        return int(env)
    except ValueError as exc:
        raise _UsageError(f"HYPOEXP_SEED must be an integer, got {env!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hypoexp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def problem_args(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--rates", help="comma-separated rates; 0.03x10 repeats a value")
        src.add_argument("--rates-file", help="file with one rate per line, # comments")
        p.add_argument("--t", type=float, default=1.0, help="threshold (default 1)")
        p.add_argument("--dump-rates", metavar="PATH", help="also write the parsed rates to PATH")

    def output_args(p):
        p.add_argument("--format", choices=("plain", "csv", "json"), default="plain")
        p.add_argument("--output", help="write to this path instead of stdout")

    p = sub.add_parser("exact", help="closed-form and matrix-exponential CDF with diagnostics")
    problem_args(p)
    output_args(p)

    p = sub.add_parser("estimate", help="importance-sampling estimate")
    problem_args(p)
    output_args(p)
    p.add_argument("--N", type=int, default=None, help="samples per run (default 100n)")
    p.add_argument("--K", type=int, default=10, help="independent runs (default 10)")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("bound", help="second-moment and relative-error bounds")
    problem_args(p)
    output_args(p)
    p.add_argument("--N", type=int, default=None, help="sample size (default 100n)")

    p = sub.add_parser("oracle", help="extended-precision reference value")
    problem_args(p)
    output_args(p)
    p.add_argument("--digits", type=int, default=60)

    p = sub.add_parser("bench", help="reproduce the model tables")
    p.add_argument("--format", choices=("plain", "csv", "json"), default="csv")
    p.add_argument("--output", help="destination file (default stdout)")
    p.add_argument("--N", default="100n", help="sample size or policy such as 100n (default)")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    return parser


def _problem(args) -> HypoexpProblem:
    if args.rates is not None:
        rates = parse_rates(args.rates)
    else:
        try:
            rates = read_rates_file(args.rates_file)
        except OSError as exc:
            raise _UsageError(f"cannot read rates file: {exc}") from exc
    problem = validate_problem(rates, args.t)
    if args.dump_rates:
        write_rates_file(args.dump_rates, problem.rates)
    return problem


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, list):
        return ";".join(repr(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def _render(record: dict, fmt: str, plain_lines: list[str]) -> str:
    if fmt == "json":
        return json.dumps(record, indent=2) + "\n"
    if fmt == "csv":
        keys = list(record)
        return ",".join(keys) + "\n" + ",".join(_csv_cell(record[k]) for k in keys) + "\n"
    return "\n".join(plain_lines) + "\n"


def _head(problem: HypoexpProblem) -> str:
    return f"problem: n={problem.n} t={problem.threshold:g}"


def cmd_exact(args) -> tuple[str, list[str]]:
    problem = _problem(args)
    lines = [_head(problem)]
    record = {"n": problem.n, "t": problem.threshold}
    try:
        value, report = ross_cdf(problem)
        lines.append(
            f"closed form:  {_sci(value)}  verdict={report.verdict.value}"
            f"  cancellation_digits={report.cancellation_digits:.2f}"
            f"  max_term={report.max_term_magnitude:.3e}  min_rate_gap={report.min_rate_gap:.3g}"
        )
        if report.verdict.value == "catastrophic":
            lines.append("warning: closed form is not a probability; catastrophic cancellation")
        record.update(ross=value, verdict=report.verdict.value,
                      cancellation_digits=report.cancellation_digits)
    except HypoexpError:
        lines.append("closed form:  undefined (repeated rates)")
        record.update(ross=None, verdict=None, cancellation_digits=None)
    surv = expm_survival(problem)
    lines.append(f"matrix expm:  {_sci(1.0 - surv.raw)}  survival_raw={surv.raw!r}")
    best = exact_cdf(problem)
    lines.append(f"exact_cdf:    {_sci(best.value)}  route={best.route}")
    for note in best.warnings:
        lines.append(f"warning: {note}")
    if best.floor_regime:
        lines.append("recommendation: run `hypoexp estimate` with the same rates")
    record.update(expm=1.0 - surv.raw, survival_raw=surv.raw, value=best.value, route=best.route,
                  floor_regime=best.floor_regime)
    return _render(record, args.format, lines), []


def cmd_estimate(args) -> tuple[str, list[str]]:
    problem = _problem(args)
    N = args.N if args.N is not None else 100 * problem.n
    seed = args.seed if args.seed is not None else _default_seed()
    if N < 1 or args.K < 1:
        raise _UsageError("--N and --K must be >= 1")
    bound = re_bound(problem, N)
    lines = [f"{_head(problem)} N={N} K={args.K} seed={seed}"]
    record = {"n": problem.n, "t": problem.threshold, "N": N, "K": args.K, "seed": seed}
    timing = []
    if args.K == 1:
        res = is_estimate(problem, ISConfig(N, seed))
        lines.append(f"estimate:        {_sci(res.estimate)}")
        lines.append(f"log10 estimate:  {res.log_estimate / math.log(10):.6f}")
        lines.append(f"accepted:        {res.accepted}/{N}")
        record.update(estimate=res.estimate, accepted=res.accepted)
        timing.append(f"cpu_seconds: {res.elapsed_seconds:.3e}")
        record_log = res.log_estimate
    else:
        s = bench.run_trials(problem, "IS", N, args.K, seed)
        lines.append(f"mean estimate:   {_sci(s.mean)}")
        record_log = math.log(s.mean) if s.mean > 0 else -math.inf
        lines.append(f"log10 estimate:  {record_log / math.log(10):.6f}")
        lines.append(f"re_hat:          {s.re_hat:.2e}")
        record.update(estimate=s.mean, per_run=list(s.per_run_estimates), re_hat=s.re_hat)
        timing.append(f"rtv: {s.rtv:.2e}  cpu_seconds: {s.total_cpu_seconds:.3e}")
    lines.append(f"re_bound:        {bound:.2e}")
    record.update(log10_estimate=record_log / math.log(10), re_bound=bound)
    return _render(record, args.format, lines), timing


def cmd_bound(args) -> tuple[str, list[str]]:
    problem = _problem(args)
    N = args.N if args.N is not None else 100 * problem.n
    if N < 1:
        raise _UsageError("--N must be >= 1")
    ratio = second_moment_ratio_bound(problem)
    re = re_bound(problem, N)
    lines = [
        f"{_head(problem)} N={N}",
        f"second_moment_ratio_bound: {ratio:.6g}",
        f"re_bound:                  {re:.6g}",
    ]
    record = {"n": problem.n, "t": problem.threshold, "N": N,
              "second_moment_ratio_bound": ratio, "re_bound": re}
    return _render(record, args.format, lines), []


def cmd_oracle(args) -> tuple[str, list[str]]:
    problem = _problem(args)
    if args.digits < 30:
        raise _UsageError("--digits must be >= 30")
    lam = problem.unit_rates()
    if len(set(lam.tolist())) == 1:
        value, tag = erlang_cdf(problem.n, float(lam[0]), 1.0), "poisson-tail"
    elif problem.rates.has_duplicates():
        value, tag = highprecision_series_cdf(problem, args.digits), "extended-precision-series"
    else:
        value, tag = highprecision_hypoexp_cdf(problem, args.digits), "extended-precision-ross"
    lines = [_head(problem), f"oracle: {value:.15e}  provenance={tag}"]
    record = {"n": problem.n, "t": problem.threshold, "oracle": value, "provenance": tag}
    return _render(record, args.format, lines), []


def cmd_bench(args) -> tuple[str, list[str]]:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.K < 2:
        raise _UsageError("--K must be >= 2 for bench")
    bench.resolve_sample_size(args.N, 1)
    output = args.output
    if output is None and os.environ.get("HYPOEXP_OUTPUT_DIR"):
        output = str(Path(os.environ["HYPOEXP_OUTPUT_DIR"]) / f"tables.{args.format}")
    text = bench.reproduce_tables(output, args.N, args.K, seed, args.format, args.workers)
    return ("" if output else text), ([f"wrote {output}"] if output else [])


_COMMANDS = {
    "exact": cmd_exact,
    "estimate": cmd_estimate,
    "bound": cmd_bound,
    "oracle": cmd_oracle,
    "bench": cmd_bench,
}


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        text, notes = _COMMANDS[args.command](args)
        out_path = getattr(args, "output", None)
        if text and out_path and args.command != "bench":
            Path(out_path).write_text(text)
        elif text:
            stdout.write(text)
        for note in notes:
            print(note, file=stderr)
    except (_UsageError, HypoexpError) as exc:
        if isinstance(exc, bench.IOFailure):
            print(f"hypoexp: {exc}", file=stderr)
            return EXIT_IO
        print(f"hypoexp: error: {exc}", file=stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"hypoexp: I/O error: {exc}", file=stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
