"""Dense two-phase simplex for small-to-medium linear programs.

The problem

    minimize    c^T x
    subject to  A_i x  (<=, >=, =)  b_i      for each row i
                lower <= x <= upper

is first rewritten as ``G x >= h, E x = f`` with ``x`` free (finite variable
bounds become extra rows). That canonical program is then solved either

* directly ("primal" route): ``x = x+ - x-``, a surplus per inequality, then a
  standard-form simplex; or
* through its dual ("dual" route): ``max h^T y + f^T u`` s.t.
  ``G^T y + E^T u = c, y >= 0``. The basis has one row per variable, so this is
  the cheap route when there are many more constraints than variables, which is
  the case for every sampled envelope fit. The primal vertex is recovered by
  solving the active rows of ``G``/``E``.

Both routes use a revised simplex with an explicit basis inverse (refactored
every ``REFACTOR_EVERY`` pivots). The entering column has the most negative
reduced cost; after ``STALL_LIMIT`` degenerate pivots in a row the choice
switches to Bland's rule (lowest index) for both the entering column and the
leaving row, which rules out cycling. The leaving row is the exact minimum
ratio, and among rows tied with it the largest pivot wins, so degenerate fits
do not pivot on tiny entries. Every choice is deterministic.

A pivot smaller than ``PIVOT_TOL``, a singular or infeasible refactorisation,
a final primal residual above the feasibility tolerance or a dual certificate
that does not close the gap yields ``Status.FAILED`` rather than a wrong
answer. ``solve_lp(method="auto")`` then retries on the other route when that
route's basis is small enough to be worth it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11
RATIO_TOL = 1e-9
TIE_TOL = 1e-12
STALL_LIMIT = 50
GAP_TOL = 1e-7
REFACTOR_EVERY = 20
MAX_ITER = 50_000
# largest basis the fallback route may build; explicit inverses beyond this are too slow
FALLBACK_MAX_BASIS = 1500

_SENSES = ("<=", ">=", "=")


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    FAILED = "failed"


@dataclass
class LinearProgram:
    """Dense LP. ``lower`` defaults to 0 and ``upper`` to +inf for every variable."""

    c: np.ndarray
    A: np.ndarray
    senses: list
    b: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    name: str = "LP"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float)
        if self.A.size == 0:
            self.A = self.A.reshape(0, n)
        if self.A.ndim != 2 or self.A.shape[1] != n:
            raise ValueError(f"A must have shape (rows, {n}), got {self.A.shape}")
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.senses = list(self.senses)
        rows = self.A.shape[0]
        if self.b.size != rows or len(self.senses) != rows:
            raise ValueError("A, b and senses disagree on the number of rows")
        bad = [s for s in self.senses if s not in _SENSES]
        if bad:
            raise ValueError(f"unknown constraint sense(s): {bad}")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must have one entry per variable")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective entries must be finite")
        for name in ("A", "b"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} must be finite")
        if np.isnan(self.lower).any() or np.isnan(self.upper).any():
            raise ValueError("bounds must not be NaN")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("lower bounds must be < inf and upper bounds > -inf")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def residual(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation at ``x``."""
        ax = self.A @ x
        worst = 0.0
        for sense, lhs, rhs in zip(self.senses, ax, self.b):
            if sense == "<=":
                worst = max(worst, lhs - rhs)
            elif sense == ">=":
                worst = max(worst, rhs - lhs)
            else:
                worst = max(worst, abs(lhs - rhs))
        if x.size:
            worst = max(worst, float(np.max(self.lower - x)), float(np.max(x - self.upper)))
        return worst


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray | None = None
    objective: float = math.nan
    row_dual: np.ndarray | None = None
    bound_dual: np.ndarray | None = None
    dual_objective: float = math.nan
    iterations: int = 0
    route: str = ""
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class _Canonical:
    G: np.ndarray
    h: np.ndarray
    E: np.ndarray
    f: np.ndarray
    # provenance of each G row: ("row", i, sign) or ("lower"/"upper", j, sign)
    g_src: list = field(default_factory=list)
    e_src: list = field(default_factory=list)


def _canonical(lp: LinearProgram) -> _Canonical:
    n = lp.n_vars
    g_rows, h, g_src = [], [], []
    e_rows, f, e_src = [], [], []
    for i, (sense, row, rhs) in enumerate(zip(lp.senses, lp.A, lp.b)):
        if sense == ">=":
            g_rows.append(row), h.append(rhs), g_src.append(("row", i, 1.0))
        elif sense == "<=":
            g_rows.append(-row), h.append(-rhs), g_src.append(("row", i, -1.0))
        else:
            e_rows.append(row), f.append(rhs), e_src.append(("row", i, 1.0))
    eye = np.eye(n)
    for j in range(n):
        if np.isfinite(lp.lower[j]):
            g_rows.append(eye[j]), h.append(lp.lower[j]), g_src.append(("lower", j, 1.0))
        if np.isfinite(lp.upper[j]):
            g_rows.append(-eye[j]), h.append(-lp.upper[j]), g_src.append(("upper", j, -1.0))
    G = np.array(g_rows, dtype=float).reshape(-1, n)
    E = np.array(e_rows, dtype=float).reshape(-1, n)
    return _Canonical(G, np.array(h, dtype=float), E, np.array(f, dtype=float), g_src, e_src)


class _Breakdown(Exception):
    pass


@dataclass
class _StdResult:
    status: Status
    z: np.ndarray | None = None
    basis: np.ndarray | None = None
    pi: np.ndarray | None = None
    rows: np.ndarray | None = None  # constraint rows kept after dropping redundant ones
    iterations: int = 0
    message: str = ""


class _Revised:
    """Revised simplex state for min c^T z, A z = b, z >= 0 with b >= 0."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = A
        self.b = b
        self.m, self.n = A.shape
        self.iterations = 0
        self.since_refactor = 0

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise _Breakdown("singular basis on refactorisation") from exc
        if not np.all(np.isfinite(self.Binv)):
            raise _Breakdown("non-finite basis inverse")
        self.xB = self.Binv @ self.b
        self.since_refactor = 0
        if float(np.min(self.xB, initial=0.0)) < -FEAS_TOL * (1.0 + float(np.max(np.abs(self.b), initial=0.0))):
            raise _Breakdown("basic solution lost feasibility on refactorisation")

    def pivot(self, r: int, q: int, col: np.ndarray):
        piv = col[r]
        if abs(piv) < PIVOT_TOL:
            raise _Breakdown(f"pivot {piv:.3e} below threshold")
        self.Binv[r] /= piv
        self.xB[r] /= piv
        others = np.arange(self.m) != r
        self.Binv[others] -= np.outer(col[others], self.Binv[r])
        self.xB[others] -= col[others] * self.xB[r]
        self.basis[r] = q
        self.iterations += 1
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()

    def run(self, cost: np.ndarray, allowed: np.ndarray, max_iter: int) -> Status:
        scale = max(1.0, float(np.max(np.abs(cost))))
        stalled = 0
        while True:
            if self.iterations >= max_iter:
                raise _Breakdown("iteration limit reached")
            pi = self.Binv.T @ cost[self.basis]
            d = cost - self.A.T @ pi
            d[self.basis] = 0.0
            entering = np.flatnonzero(allowed & (d < -OPT_TOL * scale))
            if entering.size == 0:
                return Status.OPTIMAL
            if stalled < STALL_LIMIT:
                q = int(entering[np.argmin(d[entering])])
            else:
                q = int(entering[0])
            col = self.Binv @ self.A[:, q]
            r = self._leaving(col, bland=stalled >= STALL_LIMIT)
            if r is None:
                return Status.UNBOUNDED
            step = self.xB[r] / col[r]
            stalled = stalled + 1 if step <= FEAS_TOL else 0
            self.pivot(r, q, col)

    def _leaving(self, col: np.ndarray, bland: bool) -> int | None:
        # exact minimum ratio; among rows tied with it take the largest pivot
        # (lowest basic index on ties, or always under Bland)
        cand = np.flatnonzero(col > PIVOT_TOL * max(1.0, float(np.max(np.abs(col)))))
        if cand.size == 0:
            return None
        ratio = np.maximum(self.xB[cand], 0.0) / col[cand]
        theta = float(np.min(ratio))
        block = cand[ratio <= theta + TIE_TOL * max(1.0, theta)]
        if bland:
            return int(block[np.argmin(self.basis[block])])
        piv = col[block]
        best = block[piv >= piv.max() * (1.0 - 1e-12)]
        return int(best[np.argmin(self.basis[best])])


def _standard_simplex(A: np.ndarray, b: np.ndarray, c: np.ndarray, max_iter: int = MAX_ITER) -> _StdResult:
    """Two-phase simplex for min c^T z s.t. A z = b, z >= 0."""
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    rows = np.arange(m)
    if m == 0:
        if np.any(c < -OPT_TOL):
            return _StdResult(Status.UNBOUNDED)
        return _StdResult(Status.OPTIMAL, np.zeros(n), np.array([], dtype=int), np.zeros(0), rows)
    full = np.hstack([A, np.eye(m)])
    state = _Revised(full, b.copy())
    state.basis = np.arange(n, n + m)
    state.Binv = np.eye(m)
    state.xB = b.copy()
    try:
        phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
        state.run(phase1_cost, np.ones(n + m, dtype=bool), max_iter)
        state.refactor()
        infeas = float(np.sum(state.xB[state.basis >= n]))
        if infeas > FEAS_TOL * (1.0 + float(np.max(np.abs(b)))):
            return _StdResult(Status.INFEASIBLE, iterations=state.iterations)
        # drive zero-level artificials out of the basis, dropping redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if state.basis[r] < n:
                continue
            row = state.Binv[r] @ A
            row[state.basis[state.basis < n]] = 0.0
            cols = np.flatnonzero(np.abs(row) > RATIO_TOL)
            if cols.size:
                q = int(cols[0])
                state.pivot(r, q, state.Binv @ full[:, q])
            else:
                keep[r] = False
        if not keep.all():
            rows = rows[keep]
            A, b = A[keep], b[keep]
            state = _reduced_state(A, b, state.basis[keep], state.iterations)
            full = state.A
        state.refactor()
        allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(full.shape[1] - n, dtype=bool)])
        cost = np.concatenate([c, np.zeros(full.shape[1] - n)])
        status = state.run(cost, allowed, max_iter)
        if status is Status.UNBOUNDED:
            return _StdResult(Status.UNBOUNDED, iterations=state.iterations)
        state.refactor()
    except _Breakdown as exc:
        return _StdResult(Status.FAILED, iterations=state.iterations, message=str(exc))
    z = np.zeros(full.shape[1])
    z[state.basis] = state.xB
    pi = state.Binv.T @ cost[state.basis]
    # undo the row sign flips; dropped redundant rows get a zero multiplier
    full_pi = np.zeros(m)
    full_pi[rows] = pi * sign[rows]
    return _StdResult(Status.OPTIMAL, z[:n], state.basis.copy(), full_pi, rows, state.iterations)


def _reduced_state(A: np.ndarray, b: np.ndarray, basis: np.ndarray, iterations: int) -> _Revised:
    m, n = A.shape
    full = np.hstack([A, np.eye(m)])
    state = _Revised(full, b.copy())
    # basic artificials keep their (re-indexed) positions
    basis = basis.copy()
    art = basis >= n
    basis[art] = n + np.flatnonzero(art)
    state.basis = basis
    state.iterations = iterations
    return state


def _solve_primal(lp: LinearProgram, can: _Canonical) -> LpSolution:
    n = lp.n_vars
    rg, re = can.G.shape[0], can.E.shape[0]
    A = np.vstack(
        [
            np.hstack([can.G, -can.G, -np.eye(rg)]),
            np.hstack([can.E, -can.E, np.zeros((re, rg))]),
        ]
    )
    b = np.concatenate([can.h, can.f])
    c = np.concatenate([lp.c, -lp.c, np.zeros(rg)])
    res = _standard_simplex(A, b, c)
    if res.status is not Status.OPTIMAL:
        return LpSolution(res.status, iterations=res.iterations, route="primal", message=res.message)
    x = res.z[:n] - res.z[n : 2 * n]
    return _finish(lp, can, x, res.pi[:rg], res.pi[rg:], res.iterations, "primal")


def _solve_dual(lp: LinearProgram, can: _Canonical) -> LpSolution:
    rg, re = can.G.shape[0], can.E.shape[0]
    A = np.hstack([can.G.T, can.E.T, -can.E.T])
    cost = -np.concatenate([can.h, can.f, -can.f])
    res = _standard_simplex(A, lp.c.copy(), cost)
    if res.status is Status.UNBOUNDED:
        return LpSolution(Status.INFEASIBLE, iterations=res.iterations, route="dual")
    if res.status is Status.INFEASIBLE:
        # primal is unbounded or infeasible; only the primal route can tell
        sol = _solve_primal(lp, can)
        sol.iterations += res.iterations
        return sol
    if res.status is not Status.OPTIMAL:
        return LpSolution(res.status, iterations=res.iterations, route="dual", message=res.message)
    w = res.z
    y = w[:rg]
    u = w[rg : rg + re] - w[rg + re :]
    # primal vertex: the rows of G / E attached to basic dual columns are active
    basic = res.basis[res.basis < A.shape[1]]
    stacked = np.vstack([can.G, can.E, can.E])
    rhs = np.concatenate([can.h, can.f, can.f])
    M = stacked[basic]
    try:
        if M.shape[0] == lp.n_vars:
            x = np.linalg.solve(M, rhs[basic])
        else:
            x = -res.pi
            if M.shape[0]:
                x = x + np.linalg.lstsq(M, rhs[basic] - M @ x, rcond=None)[0]
    except np.linalg.LinAlgError:
        x = -res.pi
    return _finish(lp, can, x, y, u, res.iterations, "dual")


def _finish(lp, can, x, y, u, iterations, route) -> LpSolution:
    scale = 1.0 + (float(np.max(np.abs(lp.b))) if lp.b.size else 0.0)
    resid = lp.residual(x)
    if resid > FEAS_TOL * scale:
        return LpSolution(Status.FAILED, iterations=iterations, route=route, message=f"primal residual {resid:.3e}")
    row_dual = np.zeros(lp.n_rows)
    bound_dual = np.zeros(lp.n_vars)
    for (kind, idx, sign), val in zip(can.g_src, y):
        if kind == "row":
            row_dual[idx] += sign * val
        else:
            bound_dual[idx] += sign * val
    for (_, idx, _), val in zip(can.e_src, u):
        row_dual[idx] += val
    dual_obj = float(can.h @ y + can.f @ u)
    objective = float(lp.c @ x)
    dual_bad = float(np.max(-y, initial=0.0))
    gap = abs(objective - dual_obj)
    tol = GAP_TOL * (1.0 + abs(objective))
    if dual_bad > tol or gap > tol:
        message = f"certificate check failed: dual sign {dual_bad:.2e}, gap {gap:.2e}"
        return LpSolution(Status.FAILED, iterations=iterations, route=route, message=message)
    return LpSolution(
        Status.OPTIMAL,
        x=x,
        objective=objective,
        row_dual=row_dual,
        bound_dual=bound_dual,
        dual_objective=dual_obj,
        iterations=iterations,
        route=route,
    )


def solve_lp(lp: LinearProgram, method: str = "auto") -> LpSolution:
    """Solve ``lp``; ``method`` is ``"auto"``, ``"primal"`` or ``"dual"``.

    ``auto`` takes the dual route when the canonical form has more than twice
    as many inequality and equality rows as variables, and retries on the
    other route if the first one breaks down numerically.
    """
    can = _canonical(lp)
    routes = {"primal": _solve_primal, "dual": _solve_dual}
    if method == "auto":
        first = "dual" if can.G.shape[0] + can.E.shape[0] > 2 * lp.n_vars else "primal"
        sol = routes[first](lp, can)
        if sol.status is not Status.FAILED:
            return sol
        second = "primal" if first == "dual" else "dual"
        basis_size = can.G.shape[0] + can.E.shape[0] if second == "primal" else lp.n_vars
        if basis_size > FALLBACK_MAX_BASIS:
            sol.message = f"{first}: {sol.message}; {second} route skipped ({basis_size} basis rows)"
            return sol
        other = routes[second](lp, can)
        if other.status is Status.FAILED:
            other.message = f"{first}: {sol.message}; {other.route}: {other.message}"
        other.iterations += sol.iterations
        return other
    if method in routes:
        return routes[method](lp, can)
    raise ValueError(f"unknown method {method!r}")


def to_mps(lp: LinearProgram) -> str:
    """Fixed-section MPS listing (NAME/ROWS/COLUMNS/RHS/BOUNDS/ENDATA)."""
    kinds = {"<=": "L", ">=": "G", "=": "E"}
    out = [f"NAME          {lp.name}", "ROWS", " N  COST"]
    out += [f" {kinds[s]}  R{i}" for i, s in enumerate(lp.senses)]
    out.append("COLUMNS")
    for j in range(lp.n_vars):
        out.append(f"    X{j}  COST  {float(lp.c[j])!r}")
        for i in np.flatnonzero(lp.A[:, j]):
            out.append(f"    X{j}  R{i}  {float(lp.A[i, j])!r}")
    out.append("RHS")
    for i in np.flatnonzero(lp.b):
        out.append(f"    RHS  R{i}  {float(lp.b[i])!r}")
    out.append("BOUNDS")
    for j in range(lp.n_vars):
        lo, up = lp.lower[j], lp.upper[j]
        if lo == -np.inf and up == np.inf:
            out.append(f" FR BND  X{j}")
            continue
        if lo == up:
            out.append(f" FX BND  X{j}  {float(lo)!r}")
            continue
        if lo == -np.inf:
            out.append(f" MI BND  X{j}")
        elif lo != 0.0:
            out.append(f" LO BND  X{j}  {float(lo)!r}")
        if up != np.inf:
            out.append(f" UP BND  X{j}  {float(up)!r}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def from_mps(text: str) -> LinearProgram:
    """Parse the listing written by :func:`to_mps`."""
    senses_of = {"L": "<=", "G": ">=", "E": "="}
    section = None
    name = "LP"
    rows, cols = [], []
    row_sense = {}
    entries = {}
    cost = {}
    rhs = {}
    bounds = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if not line.startswith(" "):
            head = line.split()
            section = head[0]
            if section == "NAME" and len(head) > 1:
                name = head[1]
            continue
        tok = line.split()
        if section == "ROWS":
            if tok[0] != "N":
                row_sense[tok[1]] = senses_of[tok[0]]
                rows.append(tok[1])
        elif section == "COLUMNS":
            col = tok[0]
            if col not in cols:
                cols.append(col)
            for key, val in zip(tok[1::2], tok[2::2]):
                if key == "COST":
                    cost[col] = float(val)
                else:
                    entries[(key, col)] = float(val)
        elif section == "RHS":
            for key, val in zip(tok[1::2], tok[2::2]):
                rhs[key] = float(val)
        elif section == "BOUNDS":
            bounds.append(tok)
    ri = {r: i for i, r in enumerate(rows)}
    ci = {c: j for j, c in enumerate(cols)}
    A = np.zeros((len(rows), len(cols)))
    for (r, c), v in entries.items():
        A[ri[r], ci[c]] = v
    lower = np.zeros(len(cols))
    upper = np.full(len(cols), np.inf)
    for tok in bounds:
        kind, col = tok[0], ci[tok[2]]
        val = float(tok[3]) if len(tok) > 3 else None
        if kind == "FR":
            lower[col], upper[col] = -np.inf, np.inf
        elif kind == "MI":
            lower[col] = -np.inf
        elif kind == "LO":
            lower[col] = val
        elif kind == "UP":
            upper[col] = val
        elif kind == "FX":
            lower[col] = upper[col] = val
    return LinearProgram(
        c=np.array([cost.get(c, 0.0) for c in cols]),
        A=A,
        senses=[row_sense[r] for r in rows],
        b=np.array([rhs.get(r, 0.0) for r in rows]),
        lower=lower,
        upper=upper,
        name=name,
    )
