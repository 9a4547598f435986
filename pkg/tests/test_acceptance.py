"""Acceptance criteria, one check per criterion.

Each check raises ``AssertionError`` on failure and otherwise returns a short
detail string. Under pytest the conftest hook prints one ``PASS``/``FAIL`` line
per criterion at the end of the run; ``python tests/test_acceptance.py`` prints
the same lines directly.
"""

from __future__ import annotations

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import exact_tail_parts, random_int_lp, vertex_lp
from spvkit.binomial import TailQuery, binom_tail, lemma1_bound, min_samples_exact
from spvkit.complexity import Bound, RiskSpec, ceil_log2, phi, plan_bound, plan_finite, plan_scenario, strict_failure_bound
from spvkit.envelope import run_finite_family, run_scenario, run_spv_demo
from spvkit.lp import LinearProgram, solve_lp
from spvkit.spv import SpvSchedule, cardinality

CHECKS: dict[int, tuple[str, callable]] = {}


def criterion(number: int, title: str):
    def register(fn):
        CHECKS[number] = (title, fn)
        return fn

    return register


def _best_time(fn, repeats: int = 50) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


@criterion(1, "finite-family plan N = 1981 in < 1 ms")
def check_finite_plan() -> str:
    risk = RiskSpec(0.01, 1e-6)
    n = plan_finite(risk, 0, 400, Bound.SQRT).samples
    assert n == 1981, f"N = {n}"
    t = _best_time(lambda: plan_finite(risk, 0, 400, Bound.SQRT))
    assert t < 1e-3, f"{t * 1e3:.3f} ms"
    return f"N = {n}, {t * 1e6:.0f} us"


@criterion(2, "scenario plan N = 7090 in < 1 ms")
def check_scenario_plan() -> str:
    risk = RiskSpec(0.01, 1e-6)
    n = plan_scenario(risk, 32, Bound.EULER).samples
    assert n == 7090, f"N = {n}"
    t = _best_time(lambda: plan_scenario(risk, 32, Bound.EULER))
    assert t < 1e-3, f"{t * 1e3:.3f} ms"
    return f"N = {n}, {t * 1e6:.0f} us"


@criterion(3, "SPV cardinalities 1432, 2231 and total 4163")
def check_cardinalities() -> str:
    sched, risk = SpvSchedule(0.75, 2.0), RiskSpec(0.01, 1e-6)
    got = (cardinality(sched, risk, 1), cardinality(sched, risk, 2))
    assert got == (1432, 2231), got
    assert 500 + sum(got) == 4163
    return f"M_1, M_2 = {got}, 500 + M_1 + M_2 = {500 + sum(got)}"


@criterion(4, "finite-family totals 398, 794, 3962, 7924, 39614")
def check_finite_totals() -> str:
    expected = {0.1: 398, 0.05: 794, 0.01: 3962, 0.005: 7924, 0.001: 39614}
    got = {eta: 2 * plan_finite(RiskSpec(eta, 1e-6), 0, 400, Bound.SQRT).samples for eta in expected}
    closed = {eta: 2 * math.ceil(math.log(4e8) / eta) for eta in expected}
    assert got == expected == closed, got
    return ", ".join(str(v) for v in got.values())


@criterion(5, "strict scheme non-termination bounds")
def check_strict_bounds() -> str:
    risk = RiskSpec(0.1, 1e-4)
    v11 = strict_failure_bound(risk, 0.074, 1.1, 10**6)
    v2 = strict_failure_bound(risk, 0.074, 2.0, 10**6)
    assert v11 >= 0.98 and abs(v11 - 0.9806) <= 1e-3, v11
    assert v2 >= 0.99 and abs(v2 - 0.9973) <= 1e-3, v2
    return f"alpha=1.1: {v11:.6f}, alpha=2: {v2:.6f}"


CLOSED_FORM = (Bound.EULER, Bound.SUBOPTIMAL_A, Bound.OPTIMAL_A, Bound.SQRT)


@criterion(6, "closed-form certificates hold under the exact tail (>= 500 triples, < 30 s)")
def check_certificates() -> str:
    t0 = time.perf_counter()
    etas = (0.3, 0.1, 0.05, 0.01, 0.005, 0.001)
    deltas = (0.1, 1e-2, 1e-4, 1e-6, 1e-9, 1e-12)
    ms = (0, 1, 2, 3, 4, 5, 6, 8, 10, 13, 16, 20, 25, 31, 50)
    triples = [(e, d, m) for e in etas for d in deltas for m in ms]
    exact_checked = 0
    for eta, delta, m in triples:
        floor = min_samples_exact(eta, delta, m)
        for bound in CLOSED_FORM:
            n = plan_bound(RiskSpec(eta, delta), m, bound).samples
            assert binom_tail(n, eta, m).value <= delta, (eta, delta, m, bound, n)
            assert floor <= n, (eta, delta, m, bound, n, floor)
            if n <= 2500 and bound is Bound.OPTIMAL_A:
                # integer arithmetic, no rounding anywhere
                num, den = exact_tail_parts(n, eta, m)
                dn, dd = float(delta).as_integer_ratio()
                assert num * dd <= dn * den, (eta, delta, m, bound, n)
                exact_checked += 1
    elapsed = time.perf_counter() - t0
    assert len(triples) >= 500, len(triples)
    assert elapsed < 30, f"{elapsed:.1f} s"
    return f"{len(triples)} triples x {len(CLOSED_FORM)} planners, {exact_checked} in exact integer arithmetic, {elapsed:.1f} s"


@criterion(7, "monotonicity and dominance properties (< 10 s)")
def check_properties() -> str:
    t0 = time.perf_counter()
    # tail strictly decreasing in eta
    etas = np.linspace(0.01, 0.99, 50)
    pairs = 0
    for n in (1, 2, 7, 30, 150, 1000, 5000):
        for m in sorted({0, 1, n // 4, n // 2, n - 1} - {n}):
            if m < 0:
                continue
            tails = [binom_tail(n, float(e), m) for e in etas]
            for hi, lo in zip(tails, tails[1:]):
                if lo.value < 1.0 - 1e-9:
                    assert hi.log_value > lo.log_value, (n, m)
                else:
                    assert hi.value >= lo.value - 1e-14, (n, m)
                pairs += 1
    # tail bound dominates the exact tail
    dominance = 0
    for a in (1.0, 1.5, 2.0, math.e, 5.0, 50.0):
        for n in (1, 5, 20, 100, 1000, 7090):
            for eta in (0.001, 0.01, 0.1, 0.3, 0.7, 0.99):
                for m in sorted({0, 1, n // 10, n // 2, n - 1, n}):
                    exact = binom_tail(n, eta, m)
                    assert lemma1_bound(TailQuery(n, eta, m), a).log_value >= exact.log_value - 1e-12
                    dominance += 1
    # the geometric majorant covers partial zeta sums
    k = np.arange(1, 1025, dtype=float)
    for s in (0.5, 0.814, 1.0, 1.48, 2.0, 3.0):
        partial = np.cumsum(k**-s)
        for L in range(1, 1025):
            assert partial[L - 1] <= phi(s, ceil_log2(L)) * (1 + 1e-12), (s, L)
    # h(r) = sqrt(2(r-1)) - ln(r + sqrt(2(r-1))) >= 0
    r = np.concatenate([np.linspace(1, 2, 20001), np.geomspace(2, 1e6, 20001)])
    root = np.sqrt(2 * (r - 1))
    assert np.all(root - np.log(r + root) >= -1e-12)
    # failure budget sums to at most one
    for alpha in (1.1, 1.5, 2.0, 3.0):
        zeta = SpvSchedule(0.5, alpha).zeta_alpha
        K = 10**5
        kk = np.arange(1, K + 1, dtype=float)
        total = math.fsum(1.0 / (zeta * kk**alpha)) + (K + 0.5) ** (1 - alpha) / (alpha - 1) / zeta
        assert total <= 1.0 + 1e-9, (alpha, total)
    elapsed = time.perf_counter() - t0
    assert elapsed < 10, f"{elapsed:.1f} s"
    return f"{pairs} eta pairs, {dominance} dominance cases, 6x1024 majorant cases, {elapsed:.1f} s"


@criterion(8, "LP solver matches vertex enumeration on 1000 random LPs")
def check_lp() -> str:
    rng = np.random.default_rng(20240101)
    mismatches, counts = [], {}
    for i in range(1000):
        c, A, senses, b, lower, upper = random_int_lp(rng)
        status, value = vertex_lp(c, A, senses, b, lower, upper)
        counts[status] = counts.get(status, 0) + 1
        sol = solve_lp(LinearProgram(c, A, senses, b, lower, upper))
        same = sol.status.value == status
        if same and status == "optimal":
            same = abs(sol.objective - value) <= 1e-7 * (1 + abs(value))
        if not same:
            mismatches.append(i)
    assert not mismatches, f"{len(mismatches)} mismatches, first at {mismatches[:5]}"
    return "0 mismatches (" + ", ".join(f"{k} {v}" for k, v in sorted(counts.items())) + ")"


@criterion(9, "statistical acceptance of the envelope demo (< 10 min)")
def check_statistics() -> str:
    t0 = time.perf_counter()
    risk = RiskSpec(0.1, 0.05)
    runs, bad, infeasible = 200, 0, 0
    for seed in range(runs):
        n = plan_finite(risk, 0, 400, Bound.SQRT).samples
        rep = run_finite_family(risk, seed, eval_factor=math.ceil(10**5 / n))
        if rep.status != "ok":
            infeasible += 1  # counted against the criterion
            bad += 1
        elif rep.empirical_violation > risk.eta:
            bad += 1
    limit = 0.05 + 3 * math.sqrt(0.05 * 0.95 / runs)
    assert bad / runs <= limit, f"exceedance rate {bad / runs:.3f} > {limit:.3f}"

    low = RiskSpec(0.01, 1e-6)
    lo, hi = math.inf, -math.inf
    for seed in range(20):
        reports = [
            run_finite_family(low, seed),
            run_scenario(low, seed, d=15),
            run_spv_demo(low, seed, d=15)[0],
        ]
        for rep in reports:
            assert rep.status == "ok", (rep.approach, seed, rep.status)
            assert 0.8 <= rep.performance_index <= 1.2, (rep.approach, seed, rep.performance_index)
            lo, hi = min(lo, rep.performance_index), max(hi, rep.performance_index)
    elapsed = time.perf_counter() - t0
    assert elapsed < 600, f"{elapsed:.0f} s"
    return (
        f"exceedance {bad}/{runs} (limit {limit:.3f}, {infeasible} without a feasible candidate); "
        f"indices in [{lo:.3f}, {hi:.3f}]; {elapsed:.0f} s"
    )


@criterion(10, "demo CSV is byte-identical across runs")
def check_determinism() -> str:
    argv = [sys.executable, "-m", "spvkit", "demo", "--approach", "all", "--eta", "0.01", "--seed", "42", "--format", "csv"]
    first = subprocess.run(argv, capture_output=True, check=True).stdout
    second = subprocess.run(argv, capture_output=True, check=True).stdout
    assert first == second, "outputs differ"
    assert first.count(b"\n") == 4
    return f"{len(first)} bytes identical"


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, record_property):
    title, check = CHECKS[number]
    record_property("criterion", number)
    record_property("title", title)
    try:
        detail = check()
    except AssertionError as exc:
        record_property("detail", str(exc))
        raise
    record_property("detail", detail)


def main() -> int:
    failed = 0
    for number in sorted(CHECKS):
        title, check = CHECKS[number]
        try:
            detail, verdict = check(), "PASS"
        except AssertionError as exc:
            detail, verdict = str(exc), "FAIL"
            failed += 1
        print(f"{verdict} {number:>2}. {title}: {detail}", flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
