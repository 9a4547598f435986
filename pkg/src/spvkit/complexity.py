"""Closed-form sample-complexity planners.

Every planner returns the ceiling of a real-valued bound together with an
exact-tail certificate computed by :func:`spvkit.binomial.binom_tail`, so a
caller can see by how much the closed form overshoots the true requirement.

The bounds all have the shape ``N = core(delta, m) / eta`` where ``core`` does
not involve ``eta``; ``PlanResult.raw`` keeps the pre-ceiling value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .binomial import binom_tail, min_samples_exact

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class Bound(str, enum.Enum):
    LEMMA2_FIXED_A = "lemma2_fixed_a"
    EULER = "euler"
    SUBOPTIMAL_A = "suboptimal_a"
    OPTIMAL_A = "optimal_a"
    SQRT = "sqrt"
    EXACT_ORACLE = "exact_oracle"


@dataclass(frozen=True)
class RiskSpec:
    """Accuracy ``eta`` and confidence ``delta``, both strictly inside (0, 1)."""

    eta: float
    delta: float

    def __post_init__(self):
        for name in ("eta", "delta"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and 0.0 < value < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {value!r}")


@dataclass(frozen=True)
class PlanResult:
    samples: int
    bound_name: Bound
    a_used: float | None
    certificate: float
    m: int
    target: float
    raw: float

    def as_dict(self) -> dict:
        return {
            "samples": self.samples,
            "bound_name": self.bound_name.value,
            "a_used": self.a_used,
            "certificate": self.certificate,
            "m": self.m,
            "target": self.target,
            "raw": self.raw,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PlanResult":
        return cls(**{**data, "bound_name": Bound(data["bound_name"])})


def _check_m(m: int) -> None:
    if int(m) != m or m < 0:
        raise ValueError(f"m must be a non-negative integer, got {m!r}")


def lemma2_core(log_inv_delta: float, m: int, a: float) -> float:
    """(a / (a - 1)) (ln(1/delta) + m ln a); divide by eta for the sample count."""
    return a / (a - 1.0) * (log_inv_delta + m * math.log(a))


def sqrt_core(log_inv_delta: float, m: int) -> float:
    return m + log_inv_delta + math.sqrt(2.0 * m * log_inv_delta)


def suboptimal_a(log_inv_delta: float, m: int) -> float:
    if m == 0:
        return math.e
    r = log_inv_delta / m
    return 1.0 + r + math.sqrt(2.0 * r)


def optimal_a(log_inv_delta: float, m: int, tol: float = 1e-6) -> float:
    """Golden-section minimiser of :func:`lemma2_core` over a > 1 (requires m > 0)."""
    if m == 0:
        raise ValueError("the infimum for m = 0 is the a -> infinity limit")
    lo = 1.0 + 1e-9
    hi = max(10.0, 10.0 * suboptimal_a(log_inv_delta, m))
    f = lambda a: lemma2_core(log_inv_delta, m, a)  # noqa: E731
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def _finish(raw: float, bound: Bound, a: float | None, eta: float, m: int, target: float) -> PlanResult:
    n = math.ceil(raw)
    return PlanResult(n, bound, a, binom_tail(n, eta, m).value, m, target, raw)


def _plan(eta: float, delta: float, m: int, bound: Bound, a: float | None = None) -> PlanResult:
    _check_m(m)
    bound = Bound(bound)
    log_inv_delta = -math.log(delta)
    if bound is Bound.LEMMA2_FIXED_A:
        if a is None or not a > 1.0:
            raise ValueError(f"a must be > 1, got {a!r}")
    elif bound is Bound.EULER:
        a = math.e
    elif bound is Bound.SUBOPTIMAL_A:
        a = suboptimal_a(log_inv_delta, m)
    elif bound is Bound.OPTIMAL_A:
        if m == 0:
            return _finish(log_inv_delta / eta, bound, None, eta, m, delta)
        a = optimal_a(log_inv_delta, m)
    elif bound is Bound.SQRT:
        return _finish(sqrt_core(log_inv_delta, m) / eta, bound, None, eta, m, delta)
    else:
        n = min_samples_exact(eta, delta, m)
        return _finish(float(n), bound, None, eta, m, delta)
    return _finish(lemma2_core(log_inv_delta, m, a) / eta, bound, a, eta, m, delta)


def plan_lemma2(spec: RiskSpec, m: int, a: float) -> PlanResult:
    """Sample size from the fixed-``a`` bound, valid for any a > 1."""
    return _plan(spec.eta, spec.delta, m, Bound.LEMMA2_FIXED_A, a)


def plan_euler(spec: RiskSpec, m: int) -> PlanResult:
    return _plan(spec.eta, spec.delta, m, Bound.EULER)


def plan_suboptimal_a(spec: RiskSpec, m: int) -> PlanResult:
    """Fixed-``a`` bound at a = 1 + L/m + sqrt(2L/m), L = ln(1/delta).

    Falls back to a = e when m = 0, where the formula is undefined.
    """
    return _plan(spec.eta, spec.delta, m, Bound.SUBOPTIMAL_A)


def plan_optimal_a(spec: RiskSpec, m: int) -> PlanResult:
    """Fixed-``a`` bound minimised numerically over a > 1.

    The minimiser does not depend on ``eta``. For m = 0 the bound decreases
    monotonically in ``a`` and the limit ceil(ln(1/delta) / eta) is returned.
    """
    return _plan(spec.eta, spec.delta, m, Bound.OPTIMAL_A)


def plan_sqrt(spec: RiskSpec, m: int) -> PlanResult:
    return _plan(spec.eta, spec.delta, m, Bound.SQRT)


def plan_exact(spec: RiskSpec, m: int) -> PlanResult:
    return _plan(spec.eta, spec.delta, m, Bound.EXACT_ORACLE)


def plan_worstcase(spec: RiskSpec) -> PlanResult:
    """Samples needed so that the sampled maximum is an (eta, delta) worst-case estimate."""
    raw = -math.log(spec.delta) / -math.log1p(-spec.eta)
    return _finish(raw, Bound.EXACT_ORACLE, None, spec.eta, 0, spec.delta)


def plan_bound(spec: RiskSpec, m: int, bound: Bound | str, a: float | None = None) -> PlanResult:
    return _plan(spec.eta, spec.delta, m, Bound(bound), a)


def plan_finite(spec: RiskSpec, m: int, n_c: int, bound: Bound | str = Bound.SQRT, a: float | None = None) -> PlanResult:
    """Sample size for a design family of at most ``n_c`` candidates.

    Same bounds as for a single design with ``delta`` replaced by ``delta / n_c``.
    The certificate is B(N, eta, m) and must not exceed ``delta / n_c``.
    """
    if int(n_c) != n_c or n_c < 1:
        raise ValueError(f"n_c must be a positive integer, got {n_c!r}")
    return _plan(spec.eta, spec.delta / n_c, m, Bound(bound), a)


def plan_scenario(spec: RiskSpec, n_theta: int, bound: Bound | str = Bound.EULER, a: float | None = None) -> PlanResult:
    """Sample size for a convex sampled program with ``n_theta`` decision variables.

    Uses m = n_theta - 1 violations in the binomial condition.
    """
    if int(n_theta) != n_theta or n_theta < 1:
        raise ValueError(f"n_theta must be a positive integer, got {n_theta!r}")
    return _plan(spec.eta, spec.delta, n_theta - 1, Bound(bound), a)


def phi(s: float, t: int) -> float:
    """Closed-form majorant of sum_{k=1}^{L} k^-s with t = ceil(log2 L).

    Equals sum_{k=0}^{t} 2^((1-s)k).
    """
    if not s > 0:
        raise ValueError(f"s must be > 0, got {s!r}")
    if int(t) != t or t < 0:
        raise ValueError(f"t must be a non-negative integer, got {t!r}")
    if s == 1:
        return float(t + 1)
    r = 1.0 - s
    # (1 - 2^(r(t+1))) / (1 - 2^r), written with expm1 for s close to 1
    return math.expm1(r * (t + 1) * math.log(2.0)) / math.expm1(r * math.log(2.0))


def ceil_log2(n: int) -> int:
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return (int(n) - 1).bit_length()


def _tail_bracket(alpha: float, k: int) -> tuple[float, float]:
    # Bounds on sum_{j > k} j^-alpha for the convex decreasing x^-alpha:
    # trapezoid rule overestimates each integral, midpoint rule underestimates.
    def upper_int(x):  # integral_x^inf t^-alpha dt
        return math.exp((1.0 - alpha) * math.log(x)) / (alpha - 1.0)

    lo = upper_int(k + 1.0) + 0.5 * (k + 1.0) ** -alpha
    hi = upper_int(k + 0.5)
    return lo, hi


@lru_cache(maxsize=256)
def _zeta_bracket(alpha: float, width: float) -> tuple[float, float]:
    k = 16
    while True:
        lo, hi = _tail_bracket(alpha, k)
        if hi - lo <= width:
            break
        k *= 2
    head = float(np.sum(np.arange(1, k + 1, dtype=np.float64)[::-1] ** -alpha))
    return head + lo, head + hi


def riemann_zeta(alpha: float, width: float = 1e-9) -> float:
    """zeta(alpha) for alpha > 1: partial sum plus a bracketed integral tail.

    Returns the midpoint of a bracket no wider than ``width``.
    """
    if not alpha > 1.0:
        raise ValueError(f"alpha must be > 1, got {alpha!r}")
    lo, hi = _zeta_bracket(float(alpha), float(width))
    return 0.5 * (lo + hi)


def strict_failure_bound(spec: RiskSpec, mu: float, alpha: float, n_iter: int) -> float:
    """Lower bound on P(no acceptance in ``n_iter`` iterations) for the strict scheme.

    Applies when every design has violation probability at least ``mu`` and
    validation allows zero failures (level slope a = 0).
    """
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu!r}")
    if not alpha > 1.0:
        raise ValueError(f"alpha must be > 1, got {alpha!r}")
    ratio = mu / spec.eta
    head = (spec.delta / riemann_zeta(alpha)) ** ratio
    return 1.0 - head * phi(alpha * ratio, ceil_log2(n_iter))
