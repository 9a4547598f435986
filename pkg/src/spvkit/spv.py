"""Sequential probabilistic validation.

At iteration ``k`` a candidate design is produced by a user generator, then
checked against ``M_k`` fresh i.i.d. samples; it is accepted when at most
``m_k = floor(a k)`` of them violate the specification. With

    M_k = ceil((m_k + L_k + sqrt(2 m_k L_k)) / eta),   L_k = ln(zeta(alpha) k^alpha / delta)

the probability that *any* accepted candidate has violation probability above
``eta`` is at most ``delta``: each iteration spends a share
``1 / (zeta(alpha) k^alpha)`` of the confidence budget, and these shares sum
to one.

Randomness
----------
A run is driven by one root seed. Two independent PCG64 streams are derived
from it with :class:`numpy.random.SeedSequence` spawn keys:

* ``GENERATOR_KEY`` (initial pool and whatever the generator draws),
* ``VALIDATION_KEY`` (all validation samples).

so a trace replays bit-for-bit on any platform numpy supports.

Trace log format
----------------
:meth:`SpvTrace.to_jsonl` writes one JSON object per iteration with keys
``k, m_k, M_k, violation_count, accepted, candidate_id, pool_size,
truncated``, followed by a final line ``{"summary": {...}}`` holding
``samples_consumed, accepted_count, iterations_run, initial_pool, seed,
aborted_at, error, accepted_ids``. ``truncated`` marks iterations whose
violation count stopped early at ``m_k + 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Protocol

import numpy as np

from .complexity import RiskSpec, riemann_zeta

GENERATOR_KEY = 1
VALIDATION_KEY = 2


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the sub-stream ``path`` of root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(path)))


@dataclass(frozen=True)
class SpvSchedule:
    level_slope: float
    failure_exponent: float

    def __post_init__(self):
        if not self.level_slope >= 0:
            raise ValueError(f"level slope must be >= 0, got {self.level_slope!r}")
        if not self.failure_exponent > 1:
            raise ValueError(f"failure exponent must be > 1, got {self.failure_exponent!r}")

    @property
    def zeta_alpha(self) -> float:
        return riemann_zeta(self.failure_exponent)


def level_linear(a: float, k: int) -> int:
    """Allowed violations at iteration ``k``: floor(a k)."""
    if a < 0:
        raise ValueError(f"a must be >= 0, got {a!r}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k!r}")
    return math.floor(a * k)


def failure_zeta(schedule: SpvSchedule, k: int) -> float:
    """Confidence share of iteration ``k``: 1 / (zeta(alpha) k^alpha)."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k!r}")
    return 1.0 / (schedule.zeta_alpha * float(k) ** schedule.failure_exponent)


def cardinalities(schedule: SpvSchedule, risk: RiskSpec, ks) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(m_k, M_k)`` for an array of iteration indices."""
    k = np.asarray(ks, dtype=np.int64)
    if np.any(k < 1):
        raise ValueError("iteration indices must be >= 1")
    kf = k.astype(np.float64)
    m = np.floor(schedule.level_slope * kf)
    log_term = math.log(schedule.zeta_alpha) + schedule.failure_exponent * np.log(kf) - math.log(risk.delta)
    M = np.ceil((m + log_term + np.sqrt(2.0 * m * log_term)) / risk.eta)
    return m.astype(np.int64), M.astype(np.int64)


def cardinality(schedule: SpvSchedule, risk: RiskSpec, k: int) -> int:
    """Validation-set size M_k for iteration ``k``."""
    _, M = cardinalities(schedule, risk, [k])
    return int(M[0])


@dataclass
class ScheduleTable:
    k: np.ndarray
    m: np.ndarray
    M: np.ndarray

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.m > 0, self.M / np.maximum(self.m, 1), np.inf)

    def rows(self):
        for k, m, M, r in zip(self.k, self.m, self.M, self.ratio):
            yield int(k), int(m), int(M), float(r)


def schedule_diagnostics(schedule: SpvSchedule, risk: RiskSpec, k_max: int, ks=None) -> ScheduleTable:
    """Table of (k, m_k, M_k, M_k / m_k) for k = 1..k_max (or the given ``ks``).

    The ratio tends to 1/eta as k grows; it is infinite while m_k = 0.
    """
    if schedule.level_slope == 0:
        raise ValueError("ratio diagnostics need a positive level slope (a = 0 has m_k = 0 for every k)")
    k = np.arange(1, int(k_max) + 1) if ks is None else np.asarray(ks, dtype=np.int64)
    m, M = cardinalities(schedule, risk, k)
    return ScheduleTable(k, m, M)


class ValidationProblem(Protocol):
    """What the engine needs from a design problem.

    ``violations`` is the vectorised indicator g(theta, w): a boolean array,
    True where the candidate fails the specification at that sample. It must
    be deterministic.
    """

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray: ...

    def generate(self, k: int, pool: np.ndarray | None, rng: np.random.Generator) -> Any: ...

    def violations(self, candidate: Any, samples: np.ndarray) -> np.ndarray: ...


@dataclass
class SpvConfig:
    risk: RiskSpec
    schedule: SpvSchedule
    max_iterations: int = 100
    stop_after_accepted: int = 1
    seed: int = 0
    initial_pool: int = 0
    pool_validation: bool = True
    short_circuit: bool = True
    chunk: int = 1024

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.stop_after_accepted < 1:
            raise ValueError("stop_after_accepted must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.initial_pool < 0:
            raise ValueError("initial_pool must be >= 0")


@dataclass
class SpvRecord:
    k: int
    m_k: int
    M_k: int
    violation_count: int
    accepted: bool
    candidate_id: int
    pool_size: int
    truncated: bool = False


@dataclass
class SpvTrace:
    records: list[SpvRecord] = field(default_factory=list)
    accepted: dict[int, Any] = field(default_factory=dict)
    samples_consumed: int = 0
    initial_pool: int = 0
    seed: int = 0
    aborted_at: int | None = None
    error: str | None = None

    @property
    def accepted_count(self) -> int:
        return sum(r.accepted for r in self.records)

    @property
    def iterations_run(self) -> int:
        return len(self.records)

    def summary(self) -> dict:
        return {
            "samples_consumed": self.samples_consumed,
            "accepted_count": self.accepted_count,
            "iterations_run": self.iterations_run,
            "initial_pool": self.initial_pool,
            "seed": self.seed,
            "aborted_at": self.aborted_at,
            "error": self.error,
            "accepted_ids": [r.candidate_id for r in self.records if r.accepted],
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(asdict(r), sort_keys=True) for r in self.records]
        lines.append(json.dumps({"summary": self.summary()}, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "SpvTrace":
        """Rebuild a trace (without candidate objects) from :meth:`to_jsonl` output."""
        trace = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            if "summary" in obj:
                s = obj["summary"]
                trace.samples_consumed = s["samples_consumed"]
                trace.initial_pool = s["initial_pool"]
                trace.seed = s["seed"]
                trace.aborted_at = s["aborted_at"]
                trace.error = s["error"]
            else:
                trace.records.append(SpvRecord(**obj))
        return trace


def _count_violations(problem, candidate, samples, limit, chunk, short_circuit) -> tuple[int, bool]:
    count = 0
    n = len(samples)
    step = chunk if short_circuit else max(n, 1)
    for start in range(0, n, step):
        count += int(np.count_nonzero(problem.violations(candidate, samples[start : start + step])))
        if short_circuit and count > limit:
            return count, start + step < n
    return count, False


def run_spv(problem: ValidationProblem, config: SpvConfig) -> SpvTrace:
    """Run the validation loop until enough candidates are accepted or the budget ends.

    Validation samples of iteration k join the generator's pool for iteration
    k + 1 when ``config.pool_validation`` is set; they are never validated
    against again.
    """
    gen_rng = derive_rng(config.seed, GENERATOR_KEY)
    val_rng = derive_rng(config.seed, VALIDATION_KEY)
    trace = SpvTrace(seed=config.seed, initial_pool=config.initial_pool)
    pool_parts = []
    if config.initial_pool:
        pool_parts.append(problem.sample(gen_rng, config.initial_pool))
    trace.samples_consumed = config.initial_pool
    pool = np.concatenate(pool_parts) if pool_parts else None
    ms, Ms = cardinalities(config.schedule, config.risk, np.arange(1, config.max_iterations + 1))

    for k in range(1, config.max_iterations + 1):
        try:
            candidate = problem.generate(k, pool, gen_rng)
        except Exception as exc:  # generator failures end the run, recorded in the trace
            trace.aborted_at = k
            trace.error = f"{type(exc).__name__}: {exc}"
            break
        m_k, M_k = int(ms[k - 1]), int(Ms[k - 1])
        validation = problem.sample(val_rng, M_k)
        trace.samples_consumed += M_k
        count, truncated = _count_violations(problem, candidate, validation, m_k, config.chunk, config.short_circuit)
        accepted = count <= m_k
        trace.records.append(
            SpvRecord(k, m_k, M_k, count, accepted, k, 0 if pool is None else len(pool), truncated)
        )
        if accepted:
            trace.accepted[k] = candidate
            if trace.accepted_count >= config.stop_after_accepted:
                break
        if config.pool_validation:
            pool_parts.append(validation)
            pool = np.concatenate(pool_parts)
    return trace


class ConstantProblem:
    """Toy problem whose every candidate always (or never) violates."""

    def __init__(self, violates: bool):
        self.violates = bool(violates)

    def sample(self, rng, n):
        return rng.random(n)

    def generate(self, k, pool, rng):
        return k

    def violations(self, candidate, samples):
        return np.full(len(samples), self.violates)


class BernoulliProblem:
    """Toy problem whose every candidate has violation probability exactly ``p``.

    Samples are U(0, 1) draws and a sample is a violation when it falls below ``p``.
    """

    def __init__(self, p: float):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p!r}")
        self.p = p

    def sample(self, rng, n):
        return rng.random(n)

    def generate(self, k, pool, rng):
        return k

    def violations(self, candidate, samples):
        return np.asarray(samples) < self.p
