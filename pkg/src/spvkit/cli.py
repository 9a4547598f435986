"""Command-line interface: ``spvkit {plan, spv, demo, strict-bound}``.

Every subcommand accepts ``--config FILE``, a JSON object whose keys are
flag names (``"eta"``, ``"ntheta"``, ``"initial-pool"`` or ``"initial_pool"``).
Values given on the command line win over the file, the file wins over
``$SPVKIT_SEED`` (seed only), which wins over built-in defaults.

Exit codes: 0 success, 2 usage error, 3 computational failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

from . import complexity as cx
from .binomial import binom_tail
from .complexity import Bound, RiskSpec
from .envelope import DemoReport, EnvelopeFitError, run_finite_family, run_scenario, run_spv_demo
from .spv import (
    BernoulliProblem,
    ConstantProblem,
    SpvConfig,
    SpvSchedule,
    cardinalities,
    run_spv,
    schedule_diagnostics,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAILURE = 3
SEED_ENV = "SPVKIT_SEED"

PLAN_KINDS = ("tail", "exact", "lemma2", "euler", "suboptimal", "optimal", "sqrt", "worstcase", "finite", "scenario")
_KIND_BOUND = {
    "exact": Bound.EXACT_ORACLE,
    "lemma2": Bound.LEMMA2_FIXED_A,
    "euler": Bound.EULER,
    "suboptimal": Bound.SUBOPTIMAL_A,
    "optimal": Bound.OPTIMAL_A,
    "sqrt": Bound.SQRT,
}
_BOUND_ALIASES = {**{k: v.value for k, v in _KIND_BOUND.items()}, **{b.value: b.value for b in Bound}}

# built-in defaults, applied after command line and config file
DEFAULTS = {
    "delta": 1e-6,
    "m": 0,
    "a": None,
    "alpha": 2.0,
    "k": 10,
    "seed": 0,
    "format": "human",
    "degree": 15,
    "initial_pool": 500,
    "max_iterations": 50,
    "stop_after_accepted": 1,
    "workers": 1,
    "problem": "envelope",
}


class UsageError(Exception):
    pass


def _probability(text: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _seed(text: str) -> int:
    value = _nonneg_int(text)
    if value >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _real(text: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text}")
    return value


# flag name -> converter, used for config-file values too
CONVERTERS = {
    "eta": _probability,
    "delta": _probability,
    "m": _nonneg_int,
    "nc": _positive_int,
    "ntheta": _positive_int,
    "a": _real,
    "N": _positive_int,
    "alpha": _real,
    "k": _positive_int,
    "mu": _real,
    "L": _positive_int,
    "seed": _seed,
    "degree": _nonneg_int,
    "initial_pool": _nonneg_int,
    "max_iterations": _positive_int,
    "stop_after_accepted": _positive_int,
    "workers": _positive_int,
    "p": _real,
}


def _common(p: argparse.ArgumentParser, *, fmt: bool = True) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON object of flag values")
    if fmt:
        p.add_argument("--format", choices=("human", "json", "csv"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spvkit", description="Sample-complexity planning and sequential validation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="sample-size planners and the binomial tail")
    p.add_argument("kind", choices=PLAN_KINDS)
    p.add_argument("--eta", type=_probability)
    p.add_argument("--delta", type=_probability)
    p.add_argument("--m", type=_nonneg_int)
    p.add_argument("--N", type=_positive_int, help="trials (plan tail)")
    p.add_argument("--nc", type=_positive_int, help="candidate family size (plan finite)")
    p.add_argument("--ntheta", type=_positive_int, help="decision variables (plan scenario)")
    p.add_argument("--a", type=_real, help="fixed a > 1 (plan lemma2, or --bound lemma2)")
    p.add_argument("--bound", choices=sorted(_BOUND_ALIASES), help="bound for finite/scenario")
    _common(p)

    p = sub.add_parser("spv", help="sequential validation schedule and runs")
    spv_sub = p.add_subparsers(dest="spv_command", required=True)
    q = spv_sub.add_parser("cardinality", help="print (k, m_k, M_k) for k = 1..K")
    q.add_argument("--eta", type=_probability)
    q.add_argument("--delta", type=_probability)
    q.add_argument("--a", type=_real)
    q.add_argument("--alpha", type=_real)
    q.add_argument("--k", type=_positive_int, help="last iteration to list")
    q.add_argument("--ratio", action="store_true", default=None, help="add the M_k / m_k column")
    _common(q)
    q = spv_sub.add_parser("run", help="run the validation loop on a bundled problem")
    q.add_argument("--problem", choices=("envelope", "always_feasible", "never_feasible", "bernoulli"))
    q.add_argument("--p", type=_real, help="violation probability for the bernoulli problem")
    q.add_argument("--eta", type=_probability)
    q.add_argument("--delta", type=_probability)
    q.add_argument("--a", type=_real)
    q.add_argument("--alpha", type=_real)
    q.add_argument("--seed", type=_seed)
    q.add_argument("--degree", type=_nonneg_int)
    q.add_argument("--initial-pool", dest="initial_pool", type=_nonneg_int)
    q.add_argument("--max-iterations", dest="max_iterations", type=_positive_int)
    q.add_argument("--stop-after-accepted", dest="stop_after_accepted", type=_positive_int)
    q.add_argument("--trace", metavar="FILE", help="write the JSONL trace here instead of stdout")
    _common(q, fmt=False)

    p = sub.add_parser("demo", help="envelope case study")
    p.add_argument("--approach", choices=("finite", "scenario", "spv", "all"))
    p.add_argument("--eta", type=_probability)
    p.add_argument("--delta", type=_probability)
    p.add_argument("--seed", type=_seed)
    p.add_argument("--degree", type=_nonneg_int, help="polynomial degree for scenario/spv")
    p.add_argument("--initial-pool", dest="initial_pool", type=_nonneg_int)
    p.add_argument("--max-iterations", dest="max_iterations", type=_positive_int)
    p.add_argument("--workers", type=_positive_int, help="threads for the Monte Carlo check")
    p.add_argument("--trace", metavar="FILE", help="write the SPV trace (JSONL) here")
    _common(p)

    p = sub.add_parser("strict-bound", help="lower bound on non-termination of the strict scheme")
    p.add_argument("--eta", type=_probability)
    p.add_argument("--delta", type=_probability)
    p.add_argument("--mu", type=_real)
    p.add_argument("--alpha", type=_real)
    p.add_argument("--L", type=_positive_int)
    _common(p)
    return parser


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return {key.replace("-", "_"): value for key, value in data.items()}


def _resolve(args: argparse.Namespace) -> dict:
    """Merge command line, config file, environment and defaults."""
    config = _load_config(args.config)
    known = set(vars(args))
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    merged = {}
    for key, value in vars(args).items():
        if value is None and key in config:
            value = config[key]
            conv = CONVERTERS.get(key)
            if conv is not None and value is not None:
                try:
                    value = conv(str(value))
                except argparse.ArgumentTypeError as exc:
                    raise UsageError(f"config key {key!r}: {exc}") from None
        if value is None and key == "seed" and os.environ.get(SEED_ENV):
            try:
                value = _seed(os.environ[SEED_ENV])
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"${SEED_ENV}: {exc}") from None
        if value is None:
            value = DEFAULTS.get(key)
        merged[key] = value
    return merged


def _need(opts: dict, *names: str) -> None:
    missing = [n for n in names if opts.get(n) is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + n for n in missing))


def _emit_rows(header, rows, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def cmd_plan(opts: dict, out) -> int:
    kind = opts["kind"]
    if kind == "tail":
        _need(opts, "N", "eta")
        n, eta, m = opts["N"], opts["eta"], opts["m"]
        if m > n:
            raise UsageError(f"--m {m} exceeds --N {n}")
        tail = binom_tail(n, eta, m)
        record = {"N": n, "eta": eta, "m": m, "value": tail.value, "log_value": tail.log_value}
        if opts["format"] == "json":
            out.write(json.dumps(record, sort_keys=True) + "\n")
        elif opts["format"] == "csv":
            _emit_rows(list(record), [list(record.values())], out)
        else:
            out.write(f"B(N={n}, eta={eta!r}, m={m}) = {tail.value!r}\n")
        return EXIT_OK

    _need(opts, "eta", "delta")
    try:
        risk = RiskSpec(opts["eta"], opts["delta"])
        m = opts["m"]
        if kind == "worstcase":
            plan = cx.plan_worstcase(risk)
        elif kind == "finite":
            _need(opts, "nc")
            plan = cx.plan_finite(risk, m, opts["nc"], _BOUND_ALIASES[opts["bound"] or "sqrt"], opts["a"])
        elif kind == "scenario":
            _need(opts, "ntheta")
            plan = cx.plan_scenario(risk, opts["ntheta"], _BOUND_ALIASES[opts["bound"] or "euler"], opts["a"])
        else:
            if kind == "lemma2":
                _need(opts, "a")
            plan = cx.plan_bound(risk, m, _KIND_BOUND[kind], opts["a"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    record = {"kind": kind, **plan.as_dict()}
    if opts["format"] == "json":
        out.write(json.dumps(record, sort_keys=True) + "\n")
    elif opts["format"] == "csv":
        _emit_rows(list(record), [list(record.values())], out)
    else:
        a_text = "-" if plan.a_used is None else f"{plan.a_used:.6f}"
        out.write(f"N = {plan.samples}\n")
        out.write(f"bound = {plan.bound_name.value}\n")
        out.write(f"a = {a_text}\n")
        out.write(f"certificate B(N, eta, m={plan.m}) = {plan.certificate:.6e} <= {plan.target:.6e}\n")
    return EXIT_OK


def cmd_spv_cardinality(opts: dict, out) -> int:
    _need(opts, "eta", "delta", "a")
    try:
        risk = RiskSpec(opts["eta"], opts["delta"])
        schedule = SpvSchedule(opts["a"], opts["alpha"])
        ks = list(range(1, opts["k"] + 1))
        if opts["ratio"]:
            table = schedule_diagnostics(schedule, risk, opts["k"])
            rows = [list(r) for r in table.rows()]
            header = ["k", "m_k", "M_k", "ratio"]
        else:
            m, M = cardinalities(schedule, risk, ks)
            rows = [[k, int(a), int(b)] for k, a, b in zip(ks, m, M)]
            header = ["k", "m_k", "M_k"]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if opts["format"] == "json":
        out.write(json.dumps([dict(zip(header, r)) for r in rows]) + "\n")
    elif opts["format"] == "csv":
        _emit_rows(header, rows, out)
    else:
        out.write("  ".join(f"{h:>10}" for h in header) + "\n")
        for r in rows:
            out.write("  ".join(f"{v:>10.4f}" if isinstance(v, float) else f"{v:>10}" for v in r) + "\n")
    return EXIT_OK


def _toy_problem(opts: dict):
    name = opts["problem"]
    if name == "always_feasible":
        return ConstantProblem(False)
    if name == "never_feasible":
        return ConstantProblem(True)
    if name == "bernoulli":
        _need(opts, "p")
        return BernoulliProblem(opts["p"])
    return None


def cmd_spv_run(opts: dict, out) -> int:
    _need(opts, "eta", "delta", "a")
    try:
        risk = RiskSpec(opts["eta"], opts["delta"])
        schedule = SpvSchedule(opts["a"], opts["alpha"])
        problem = _toy_problem(opts)
        if problem is None:
            report, trace = run_spv_demo(
                risk,
                opts["seed"],
                d=opts["degree"],
                schedule=schedule,
                initial_pool=opts["initial_pool"],
                max_iterations=opts["max_iterations"],
                stop_after_accepted=opts["stop_after_accepted"],
            )
        else:
            config = SpvConfig(
                risk,
                schedule,
                max_iterations=opts["max_iterations"],
                stop_after_accepted=opts["stop_after_accepted"],
                seed=opts["seed"],
                initial_pool=opts["initial_pool"] if opts["problem"] == "envelope" else 0,
            )
            trace = run_spv(problem, config)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = trace.to_jsonl()
    if opts["trace"]:
        with open(opts["trace"], "w", encoding="utf-8") as fh:
            fh.write(text)
        out.write(json.dumps({"trace": opts["trace"], **trace.summary()}, sort_keys=True) + "\n")
    else:
        out.write(text)
    if trace.error is not None:
        print(f"spvkit: candidate generator failed at k={trace.aborted_at}: {trace.error}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _run_demo(opts: dict, approach: str, risk: RiskSpec):
    seed, workers = opts["seed"], opts["workers"]
    if approach == "finite":
        return run_finite_family(risk, seed, workers=workers), None
    if approach == "scenario":
        return run_scenario(risk, seed, d=opts["degree"], workers=workers), None
    return run_spv_demo(
        risk,
        seed,
        d=opts["degree"],
        initial_pool=opts["initial_pool"],
        max_iterations=opts["max_iterations"],
        workers=workers,
    )


def _fmt(value, spec: str) -> str:
    return "-" if value is None else format(value, spec)


def cmd_demo(opts: dict, out) -> int:
    _need(opts, "eta", "approach")
    risk = RiskSpec(opts["eta"], opts["delta"])
    approaches = ("finite", "scenario", "spv") if opts["approach"] == "all" else (opts["approach"],)
    reports, traces = [], []
    for approach in approaches:
        try:
            report, trace = _run_demo(opts, approach, risk)
        except EnvelopeFitError as exc:
            print(f"spvkit: {approach} demo failed: {exc}", file=sys.stderr)
            return EXIT_FAILURE
        reports.append(report)
        if trace is not None:
            traces.append(trace)
    if opts["trace"] and traces:
        with open(opts["trace"], "w", encoding="utf-8") as fh:
            fh.write(traces[0].to_jsonl())
    if opts["format"] == "json":
        payload = [r.to_dict() for r in reports]
        out.write(json.dumps(payload if len(payload) > 1 else payload[0], sort_keys=True) + "\n")
    elif opts["format"] == "csv":
        _emit_rows(DemoReport.CSV_COLUMNS, [r.csv_row() for r in reports], out)
    else:
        for r in reports:
            pick = f" d={r.degree}" if r.degree is not None else ""
            pick += f" j={r.j}" if r.j is not None else ""
            out.write(
                f"{r.approach:<9} eta={r.eta:g} planned_N={r.planned_samples} total={r.total_samples}"
                f" index={_fmt(r.performance_index, '.4f')} empirical_violation={_fmt(r.empirical_violation, '.3e')}"
                f" [{r.status}{pick}]\n"
            )
            if r.approach == "spv":
                out.write(f"          cardinalities {', '.join(map(str, r.details['cardinalities']))}\n")
    failed = [r for r in reports if r.status == "aborted"]
    for r in failed:
        print(f"spvkit: {r.approach} demo aborted: {r.details.get('error')}", file=sys.stderr)
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_strict_bound(opts: dict, out) -> int:
    _need(opts, "eta", "delta", "mu", "alpha", "L")
    try:
        value = cx.strict_failure_bound(RiskSpec(opts["eta"], opts["delta"]), opts["mu"], opts["alpha"], opts["L"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    record = {k: opts[k] for k in ("eta", "delta", "mu", "alpha", "L")}
    record["bound"] = value
    if opts["format"] == "json":
        out.write(json.dumps(record, sort_keys=True) + "\n")
    elif opts["format"] == "csv":
        _emit_rows(list(record), [list(record.values())], out)
    else:
        out.write(f"P(no acceptance within L={opts['L']} iterations) >= {value:.6f}\n")
    return EXIT_OK


def main(argv: list[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        opts = _resolve(args)
        if args.command == "plan":
            return cmd_plan(opts, out)
        if args.command == "spv":
            if args.spv_command == "cardinality":
                return cmd_spv_cardinality(opts, out)
            return cmd_spv_run(opts, out)
        if args.command == "demo":
            return cmd_demo(opts, out)
        return cmd_strict_bound(opts, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"spvkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError) as exc:
        print(f"spvkit: computation failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def run(argv: list[str]) -> tuple[int, str]:
    """Call :func:`main` and capture what it writes to stdout."""
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
