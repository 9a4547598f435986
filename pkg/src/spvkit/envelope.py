"""Probabilistic envelope identification of an uncertain time response.

The response

    y(t, A, B) = (A (1 + t^2/2) sin(7t + 0.5) + B) exp(-3t/2),
    t ~ U[0, 1], A ~ U[1, 3], B ~ U[1, 3]

is bracketed by a polynomial center ``gamma^T phi(t)`` and half-width
``lambda^T |phi(t)|`` with ``phi(t) = (1, t, ..., t^d)``. A sample ``w``
violates the envelope when ``|y(w) - gamma^T phi| > lambda^T |phi|``.

Three ways of choosing the envelope are provided: a finite candidate family,
the convex scenario program, and the sequential validation engine.

Numerics
--------
Monomial features are hopeless for the LP at d >= 15 (condition numbers near
1e12), so fits are posed in shifted Chebyshev bases: the center in ``t`` over
the box's t-range and the half-width in ``|t|`` (exact, since
``|t^i| = |t|^i``). The model keeps those Chebyshev coefficients and evaluates
through them; ``gamma``/``lambda_`` are the equivalent monomial coefficients,
exported for reporting. They reach 1e8 or more at d = 15 and are only
evaluated directly for models built with :meth:`EnvelopeModel.from_monomial`.

After each fit the half-width is padded by the largest training residual the
solver tolerance left over, so every training sample satisfies the envelope
in the model's own arithmetic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial, chebyshev as C
from numpy.polynomial import polynomial as P

from .complexity import Bound, RiskSpec, plan_finite, plan_scenario
from .lp import LinearProgram, solve_lp
from .spv import SpvConfig, SpvSchedule, SpvTrace, derive_rng, run_spv

T_RANGE = (0.0, 1.0)
A_RANGE = (1.0, 3.0)
B_RANGE = (1.0, 3.0)
WIDTH_RANGE = (0.0, max(abs(T_RANGE[0]), abs(T_RANGE[1])))

# spawn keys under the root seed of a demo run
TRAIN_KEY = 11
VALIDATE_KEY = 12
EVALUATE_KEY = 13
SPV_KEY = 14

EVAL_CHUNK = 65_536


class EnvelopeFitError(RuntimeError):
    pass


def truth_y(w: np.ndarray) -> np.ndarray | float:
    w = np.asarray(w, dtype=float)
    t, a, b = w[..., 0], w[..., 1], w[..., 2]
    out = (a * (1.0 + 0.5 * t * t) * np.sin(7.0 * t + 0.5) + b) * np.exp(-1.5 * t)
    return float(out) if out.ndim == 0 else out


def regressor(d: int, w: np.ndarray) -> np.ndarray:
    """(1, t, t^2, ..., t^d) for one sample, or one row per sample."""
    if d < 0:
        raise ValueError(f"degree must be >= 0, got {d}")
    w = np.asarray(w, dtype=float)
    return w[..., 0, None] ** np.arange(d + 1)


def sample_uncertainty(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` i.i.d. uniform draws on the box, as an (n, 3) array of (t, A, B)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    lo = np.array([T_RANGE[0], A_RANGE[0], B_RANGE[0]])
    hi = np.array([T_RANGE[1], A_RANGE[1], B_RANGE[1]])
    return rng.uniform(lo, hi, size=(n, 3))


def _cheb_to_mono(coef: np.ndarray, domain) -> np.ndarray:
    mono = Chebyshev(coef, domain=list(domain)).convert(kind=Polynomial).coef
    return np.pad(mono, (0, len(coef) - len(mono)))


def _center_basis(t: np.ndarray, d: int) -> np.ndarray:
    lo, hi = T_RANGE
    return C.chebvander((2.0 * t - (lo + hi)) / (hi - lo), d)


def _width_basis(t: np.ndarray, d: int) -> np.ndarray:
    lo, hi = WIDTH_RANGE
    return C.chebvander((2.0 * np.abs(t) - (lo + hi)) / (hi - lo), d)


@dataclass
class EnvelopeModel:
    degree: int
    gamma: np.ndarray
    lambda_: np.ndarray
    center_cheb: np.ndarray | None = field(default=None, repr=False)
    width_cheb: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.lambda_ = np.asarray(self.lambda_, dtype=float)
        if self.gamma.shape != (self.degree + 1,) or self.lambda_.shape != (self.degree + 1,):
            raise ValueError(f"gamma and lambda must have length {self.degree + 1}")

    @classmethod
    def from_monomial(cls, gamma, lambda_) -> "EnvelopeModel":
        gamma = np.asarray(gamma, dtype=float)
        return cls(len(gamma) - 1, gamma, lambda_)

    @classmethod
    def from_chebyshev(cls, center_cheb, width_cheb) -> "EnvelopeModel":
        center_cheb = np.asarray(center_cheb, dtype=float)
        width_cheb = np.asarray(width_cheb, dtype=float)
        return cls(
            len(center_cheb) - 1,
            _cheb_to_mono(center_cheb, T_RANGE),
            _cheb_to_mono(width_cheb, WIDTH_RANGE),
            center_cheb,
            width_cheb,
        )

    def center(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.center_cheb is None:
            return P.polyval(t, self.gamma)
        lo, hi = T_RANGE
        return C.chebval((2.0 * t - (lo + hi)) / (hi - lo), self.center_cheb)

    def width(self, t) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        if self.width_cheb is None:
            return P.polyval(t, self.lambda_)
        lo, hi = WIDTH_RANGE
        return C.chebval((2.0 * t - (lo + hi)) / (hi - lo), self.width_cheb)

    def scaled(self, factor: float) -> "EnvelopeModel":
        """Same center, half-width multiplied by ``factor``."""
        return EnvelopeModel(
            self.degree,
            self.gamma.copy(),
            factor * self.lambda_,
            None if self.center_cheb is None else self.center_cheb.copy(),
            None if self.width_cheb is None else factor * self.width_cheb,
        )

    def padded(self, margin: float) -> "EnvelopeModel":
        """Half-width raised by the constant ``margin``."""
        lam = self.lambda_.copy()
        lam[0] += margin
        wc = None
        if self.width_cheb is not None:
            wc = self.width_cheb.copy()
            wc[0] += margin
        return EnvelopeModel(self.degree, self.gamma.copy(), lam, self.center_cheb, wc)

    def exact_mean_width(self) -> float:
        """E{lambda^T |phi(t)|} for t uniform on the box's t-range."""
        nodes, weights = np.polynomial.legendre.leggauss(self.degree + 2)
        lo, hi = T_RANGE
        total = 0.0
        for a, b in ((lo, min(hi, 0.0)), (max(lo, 0.0), hi)):
            if b > a:
                t = 0.5 * (b - a) * nodes + 0.5 * (a + b)
                total += 0.5 * (b - a) * float(weights @ self.width(t))
        return total / (hi - lo)

    def to_dict(self) -> dict:
        out = {"degree": self.degree, "gamma": self.gamma.tolist(), "lambda": self.lambda_.tolist()}
        if self.center_cheb is not None:
            out["center_cheb"] = self.center_cheb.tolist()
            out["width_cheb"] = self.width_cheb.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "EnvelopeModel":
        cc, wc = data.get("center_cheb"), data.get("width_cheb")
        return cls(
            data["degree"],
            np.array(data["gamma"]),
            np.array(data["lambda"]),
            None if cc is None else np.array(cc),
            None if wc is None else np.array(wc),
        )


def residuals(model: EnvelopeModel, samples: np.ndarray) -> np.ndarray:
    """|y - center| - width per sample; positive means violated."""
    samples = np.atleast_2d(samples)
    t = samples[:, 0]
    return np.abs(truth_y(samples) - model.center(t)) - model.width(t)


def violations(model: EnvelopeModel, samples: np.ndarray) -> np.ndarray:
    return residuals(model, samples) > 0.0


def violation_indicator(model: EnvelopeModel, w: np.ndarray) -> int:
    """1 if the sample lies strictly outside the envelope, else 0."""
    return int(violations(model, w)[0])


@dataclass
class EnvelopeFit:
    model: EnvelopeModel
    objective: float
    iterations: int
    margin: float


def fit_envelope(samples: np.ndarray, d: int, mean: str = "empirical") -> EnvelopeFit:
    """Narrowest envelope of degree ``d`` containing every sample.

    ``mean`` picks the objective: ``"empirical"`` minimises the average
    half-width over ``samples``, ``"exact"`` its mean under the uniform
    t-distribution. ``objective`` is the LP optimum before padding.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(samples) == 0:
        raise ValueError("at least one sample is needed")
    if d < 0:
        raise ValueError(f"degree must be >= 0, got {d}")
    t = samples[:, 0]
    y = truth_y(samples)
    cb = _center_basis(t, d)
    wb = _width_basis(t, d)
    if mean == "empirical":
        weights = wb.mean(axis=0)
    elif mean == "exact":
        probe = EnvelopeModel.from_chebyshev(np.zeros(d + 1), np.zeros(d + 1))
        weights = np.empty(d + 1)
        for i in range(d + 1):
            probe.width_cheb = np.eye(d + 1)[i]
            weights[i] = probe.exact_mean_width()
    else:
        raise ValueError(f"mean must be 'empirical' or 'exact', got {mean!r}")
    n = d + 1
    # center + width >= y  and  -center + width >= -y
    lp = LinearProgram(
        c=np.concatenate([np.zeros(n), weights]),
        A=np.vstack([np.hstack([cb, wb]), np.hstack([-cb, wb])]),
        senses=[">="] * (2 * len(samples)),
        b=np.concatenate([y, -y]),
        lower=np.full(2 * n, -np.inf),
        upper=np.full(2 * n, np.inf),
        name=f"ENVELOPE_D{d}",
    )
    sol = solve_lp(lp)
    if not sol.ok:
        raise EnvelopeFitError(f"degree {d}: LP {sol.status.value} ({sol.message})")
    model = EnvelopeModel.from_chebyshev(sol.x[:n], sol.x[n:])
    margin = 0.0
    excess = float(np.max(residuals(model, samples)))
    # rounding in the addition can leave a residual of an ulp or two; widen until clean
    while excess > 0.0:
        bump = max(excess, 4.0 * np.finfo(float).eps * (1.0 + margin)) * 2.0
        model = model.padded(bump)
        margin += bump
        excess = float(np.max(residuals(model, samples)))
    return EnvelopeFit(model, sol.objective, sol.iterations, margin)


def empirical_violation(model: EnvelopeModel, n_v: int, seed: int, *path: int, workers: int = 1) -> float:
    """Violation frequency on ``n_v`` fresh samples.

    Samples are drawn in fixed chunks of ``EVAL_CHUNK``, chunk ``c`` from the
    stream ``(seed, *path, c)``, so the count does not depend on ``workers``.
    """
    if n_v < 1:
        raise ValueError(f"n_v must be >= 1, got {n_v}")
    sizes = [min(EVAL_CHUNK, n_v - s) for s in range(0, n_v, EVAL_CHUNK)]

    def count(c: int) -> int:
        rng = derive_rng(seed, *path, c)
        return int(np.count_nonzero(violations(model, sample_uncertainty(rng, sizes[c]))))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            total = sum(pool.map(count, range(len(sizes))))
    else:
        total = sum(count(c) for c in range(len(sizes)))
    return total / n_v


@dataclass
class DemoReport:
    approach: str
    eta: float
    delta: float
    seed: int
    planned_samples: int
    total_samples: int
    performance_index: float | None
    empirical_violation: float | None
    n_eval: int
    status: str = "ok"
    degree: int | None = None
    j: int | None = None
    model: dict | None = None
    details: dict = field(default_factory=dict)

    CSV_COLUMNS = ("eta", "approach", "planned_N", "total_samples", "performance_index", "empirical_violation", "seed")

    def to_dict(self) -> dict:
        return {
            "approach": self.approach,
            "eta": self.eta,
            "delta": self.delta,
            "seed": self.seed,
            "planned_samples": self.planned_samples,
            "total_samples": self.total_samples,
            "performance_index": self.performance_index,
            "empirical_violation": self.empirical_violation,
            "n_eval": self.n_eval,
            "status": self.status,
            "degree": self.degree,
            "j": self.j,
            "model": self.model,
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DemoReport":
        return cls(**data)

    def csv_row(self) -> list:
        def fmt(v):
            return "" if v is None else repr(float(v))

        return [
            repr(float(self.eta)),
            self.approach,
            str(self.planned_samples),
            str(self.total_samples),
            fmt(self.performance_index),
            fmt(self.empirical_violation),
            str(self.seed),
        ]


def finite_scale(j: int) -> float:
    """Half-width inflation factor of candidate column ``j``."""
    return math.exp(-0.5 + j / 20.0)


def run_finite_family(
    risk: RiskSpec,
    seed: int,
    d_max: int = 20,
    j_max: int = 20,
    m: int = 0,
    bound: Bound | str = Bound.SQRT,
    eval_factor: int = 10,
    workers: int = 1,
) -> DemoReport:
    """Fit one envelope per degree, inflate each by ``j_max`` factors, validate the family.

    Stage 1 fits degree 1..d_max on N samples. Stage 2 draws N fresh samples
    and keeps candidates with at most ``m`` violations; the winner minimises
    the mean inflated half-width on that set (ties: smaller d, then smaller
    j). N comes from the finite-family planner with n_C = d_max * j_max.
    """
    plan = plan_finite(risk, m, d_max * j_max, bound)
    n = plan.samples
    train = sample_uncertainty(derive_rng(seed, TRAIN_KEY), n)
    fits, failed = {}, []
    for d in range(1, d_max + 1):
        try:
            fits[d] = fit_envelope(train, d).model
        except EnvelopeFitError:
            failed.append(d)
    valid = sample_uncertainty(derive_rng(seed, VALIDATE_KEY), n)
    y = truth_y(valid)
    t = valid[:, 0]
    best = None
    for d, model in fits.items():
        err = np.abs(y - model.center(t))
        w = model.width(t)
        mean_w = float(np.mean(w))
        for j in range(1, j_max + 1):
            s = finite_scale(j)
            if np.count_nonzero(err > s * w) <= m:
                index = s * mean_w
                if best is None or index < best[0]:
                    best = (index, d, j)
    details = {"failed_degrees": failed, "m": m, "n_candidates": d_max * j_max}
    if best is None:
        return DemoReport("finite", risk.eta, risk.delta, seed, n, 2 * n, None, None, 0, "no_feasible_candidate", details=details)
    index, d, j = best
    chosen = fits[d].scaled(finite_scale(j))
    n_eval = eval_factor * n
    emp = empirical_violation(chosen, n_eval, seed, EVALUATE_KEY, workers=workers)
    return DemoReport(
        "finite", risk.eta, risk.delta, seed, n, 2 * n, index, emp, n_eval, "ok", d, j, chosen.to_dict(), details
    )


def run_scenario(
    risk: RiskSpec,
    seed: int,
    d: int = 15,
    bound: Bound | str = Bound.EULER,
    eval_factor: int = 10,
    workers: int = 1,
) -> DemoReport:
    """Convex scenario program: exact-mean objective, one constraint pair per sample."""
    plan = plan_scenario(risk, 2 * (d + 1), bound)
    n = plan.samples
    train = sample_uncertainty(derive_rng(seed, TRAIN_KEY), n)
    fit = fit_envelope(train, d, mean="exact")
    n_eval = eval_factor * n
    emp = empirical_violation(fit.model, n_eval, seed, EVALUATE_KEY, workers=workers)
    details = {"lp_objective": fit.objective, "margin": fit.margin, "bound": Bound(bound).value}
    return DemoReport(
        "scenario", risk.eta, risk.delta, seed, n, n, fit.model.exact_mean_width(), emp, n_eval, "ok", d, None,
        fit.model.to_dict(), details,
    )


class EnvelopeSpvProblem:
    """Sampled-LP candidate generator for the validation engine."""

    def __init__(self, d: int):
        self.d = d
        self.objectives: dict[int, float] = {}

    def sample(self, rng, n):
        return sample_uncertainty(rng, n)

    def generate(self, k, pool, rng):
        if pool is None:
            raise EnvelopeFitError("the envelope generator needs a non-empty initial pool")
        fit = fit_envelope(pool, self.d, mean="empirical")
        self.objectives[k] = fit.objective
        return fit.model

    def violations(self, candidate, samples):
        return violations(candidate, samples)


def run_spv_demo(
    risk: RiskSpec,
    seed: int,
    d: int = 15,
    schedule: SpvSchedule | None = None,
    initial_pool: int = 500,
    max_iterations: int = 50,
    stop_after_accepted: int = 1,
    eval_factor: int = 10,
    workers: int = 1,
) -> tuple[DemoReport, SpvTrace]:
    """Sequential validation with the sampled-LP generator.

    Among accepted candidates the one with the smallest performance index
    (empirical mean half-width over its own fitting pool) is reported.
    """
    schedule = schedule or SpvSchedule(0.75, 2.0)
    problem = EnvelopeSpvProblem(d)
    config = SpvConfig(
        risk=risk,
        schedule=schedule,
        max_iterations=max_iterations,
        stop_after_accepted=stop_after_accepted,
        seed=seed,
        initial_pool=initial_pool,
    )
    # the engine gets its own seed so its streams never collide with evaluation
    config.seed = int(np.random.SeedSequence(seed, spawn_key=(SPV_KEY,)).generate_state(1, np.uint64)[0])
    trace = run_spv(problem, config)
    trace.seed = seed
    total = trace.samples_consumed
    details = {
        "cardinalities": [r.M_k for r in trace.records],
        "levels": [r.m_k for r in trace.records],
        "violations": [r.violation_count for r in trace.records],
        "accepted_ids": sorted(trace.accepted),
        "aborted_at": trace.aborted_at,
        "error": trace.error,
        "a": schedule.level_slope,
        "alpha": schedule.failure_exponent,
        "initial_pool": initial_pool,
    }
    if not trace.accepted:
        status = "aborted" if trace.aborted_at is not None else "no_acceptance"
        return DemoReport("spv", risk.eta, risk.delta, seed, total, total, None, None, 0, status, d, details=details), trace
    best_k = min(trace.accepted, key=lambda k: (problem.objectives[k], k))
    model = trace.accepted[best_k]
    details["selected_iteration"] = best_k
    n_eval = eval_factor * total
    emp = empirical_violation(model, n_eval, seed, EVALUATE_KEY, workers=workers)
    report = DemoReport(
        "spv", risk.eta, risk.delta, seed, total, total, problem.objectives[best_k], emp, n_eval, "ok", d, None,
        model.to_dict(), details,
    )
    return report, trace
