"""Binomial lower-tail evaluation in log space.

``binom_tail`` computes

    B(N, eta, m) = sum_{i=0}^{m} C(N, i) eta^i (1 - eta)^(N - i)

by explicit summation. The largest term is evaluated with Loader's
saddle-point formula (Stirling remainders plus deviance terms), which keeps
full relative accuracy for N in the tens of millions; the remaining terms
are obtained from it by term ratios and accumulated with a log-sum-exp
anchored at the largest term. Terms more than ``_DROP_NATS`` below the
anchor are dropped.

No incomplete-beta shortcut is used: the summation is the reference that
every closed-form planner in :mod:`spvkit.complexity` is checked against.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

# Terms this many nats below the anchor contribute < 1e-26 relative each.
_DROP_NATS = 60.0
_BLOCK = 4096
_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class TailQuery(NamedTuple):
    trials: int
    success_prob: float
    cutoff: int


class TailValue(NamedTuple):
    value: float
    log_value: float


def _check(trials: int, success_prob: float, cutoff: int) -> None:
    if int(trials) != trials or trials < 1:
        raise ValueError(f"trials must be a positive integer, got {trials!r}")
    if int(cutoff) != cutoff or cutoff < 0:
        raise ValueError(f"cutoff must be a non-negative integer, got {cutoff!r}")
    if cutoff > trials:
        raise ValueError(f"cutoff {cutoff} exceeds trials {trials}")
    if not 0.0 < success_prob < 1.0:
        raise ValueError(f"success_prob must lie in (0, 1), got {success_prob!r}")


def _stirlerr(n: float) -> float:
    """ln(n!) - ((n + 1/2) ln n - n + ln sqrt(2 pi))."""
    if n <= 15.0:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _LN_SQRT_2PI
    nn = n * n
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    if n > 500:
        return (s0 - s1 / nn) / n
    if n > 80:
        return (s0 - (s1 - s2 / nn) / nn) / n
    if n > 35:
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / n
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / n


def _bd0(x: float, np_: float) -> float:
    """Deviance x ln(x / np) + np - x without cancellation."""
    if abs(x - np_) < 0.1 * (x + np_):
        v = (x - np_) / (x + np_)
        s = (x - np_) * v
        ej = 2.0 * x * v
        v2 = v * v
        j = 1
        while True:
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
            j += 1
    return x * math.log(x / np_) + np_ - x


def log_pmf(trials: int, success_prob: float, k: int) -> float:
    """Natural log of C(N, k) eta^k (1 - eta)^(N - k)."""
    n, p = float(trials), success_prob
    q = 1.0 - p
    if k == 0:
        return n * math.log1p(-p)
    if k == trials:
        return n * math.log(p)
    x = float(k)
    return (
        _stirlerr(n)
        - _stirlerr(x)
        - _stirlerr(n - x)
        - _bd0(x, n * p)
        - _bd0(n - x, n * q)
        + 0.5 * math.log(n / (2.0 * math.pi * x * (n - x)))
    )


def _walk_down(trials: int, log_odds: float, start: int, stop: int, anchor: float) -> list[np.ndarray]:
    # log(t_{i-1} / t_i) = ln i - ln(N - i + 1) - log_odds
    pieces = []
    level = anchor
    i = start
    while i > stop:
        lo = max(stop, i - _BLOCK)
        idx = np.arange(i, lo, -1, dtype=np.float64)
        steps = np.log(idx) - np.log(trials - idx + 1.0) - log_odds
        logs = level + np.cumsum(steps)
        pieces.append(logs)
        level = float(logs[-1])
        i = lo
        if level < anchor - _DROP_NATS:
            break
    return pieces


def _walk_up(trials: int, log_odds: float, start: int, stop: int, anchor: float) -> list[np.ndarray]:
    # log(t_{i+1} / t_i) = ln(N - i) - ln(i + 1) + log_odds
    pieces = []
    level = anchor
    i = start
    while i < stop:
        hi = min(stop, i + _BLOCK)
        idx = np.arange(i, hi, dtype=np.float64)
        steps = np.log(trials - idx) - np.log(idx + 1.0) + log_odds
        logs = level + np.cumsum(steps)
        pieces.append(logs)
        level = float(logs[-1])
        i = hi
        if level < anchor - _DROP_NATS:
            break
    return pieces


def log_binom_tail(trials: int, success_prob: float, cutoff: int) -> float:
    """Natural log of B(N, eta, m)."""
    _check(trials, success_prob, cutoff)
    n, m, p = int(trials), int(cutoff), float(success_prob)
    if m == n:
        return 0.0
    mode = min(m, int(math.floor((n + 1) * p)))
    anchor = log_pmf(n, p, mode)
    log_odds = math.log(p) - math.log1p(-p)
    pieces = [np.array([anchor])]
    pieces += _walk_down(n, log_odds, mode, 0, anchor)
    pieces += _walk_up(n, log_odds, mode, m, anchor)
    logs = np.concatenate(pieces)
    total = float(np.sum(np.exp(logs - anchor)))
    return min(0.0, anchor + math.log(total))


def binom_tail(query: TailQuery | int, success_prob: float | None = None, cutoff: int | None = None) -> TailValue:
    """Binomial distribution function B(N, eta, m).

    Accepts either a :class:`TailQuery` or the three scalars positionally.

    >>> round(binom_tail(2, 0.5, 1).value, 12)
    0.75
    """
    if isinstance(query, TailQuery):
        trials, success_prob, cutoff = query
    else:
        trials = query
    log_value = log_binom_tail(trials, success_prob, cutoff)
    return TailValue(math.exp(log_value), log_value)


def lemma1_bound(query: TailQuery, a: float) -> TailValue:
    """Analytic majorant a^m (eta/a + 1 - eta)^N of B(N, eta, m), valid for a >= 1.

    The value is not clipped to 1; for large ``a`` it is a loose bound and
    overflows to ``inf`` (``log_value`` stays finite).
    """
    trials, p, m = query
    _check(trials, p, m)
    if not a >= 1.0:
        raise ValueError(f"a must be >= 1, got {a!r}")
    log_value = m * math.log(a) + trials * math.log1p(-p * (1.0 - 1.0 / a))
    value = math.exp(log_value) if log_value < 709.0 else math.inf
    return TailValue(value, log_value)


def min_samples_exact(eta: float, delta: float, m: int) -> int:
    """Smallest N > m with B(N, eta, m) <= delta.

    Exponential bracketing from N = m + 1 followed by bisection; valid because
    the tail is strictly decreasing in N once N > m. The comparison uses the
    computed tail with no slack, so inputs sitting exactly on the boundary can
    differ by one sample across platforms.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta!r}")
    if int(m) != m or m < 0:
        raise ValueError(f"m must be a non-negative integer, got {m!r}")

    def ok(n: int) -> bool:
        return binom_tail(n, eta, m).value <= delta

    lo, hi = m, m + 1  # lo is always infeasible (or equal to m)
    while not ok(hi):
        lo, hi = hi, m + 2 * (hi - m)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    assert hi - 1 <= m or not ok(hi - 1)
    return hi
