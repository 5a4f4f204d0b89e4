"""Sparse linear programs, the solver backend contract, and a bundled simplex.

The backend interface is a function ``backend(problem) -> LpSolution`` looked
up by name in ``BACKENDS``; backends are interchangeable because solution
quality, tunnel usage, and runtime all depend on which one is picked.  The
bundled backend is a bounded-variable two-phase revised simplex (dense basis
inverse, sparse constraint columns) that always returns a vertex solution and
falls back to Bland's rule when it stalls on degenerate bases.  A scipy
backend (HiGHS dual simplex) is registered when scipy is importable; both
report ``solution_kind="vertex"``.  Interior-point methods are deliberately
not offered.

Every optimal solution is re-verified by direct substitution into the
original rows before it leaves this module; a failed check is reported as a
numerical failure, never as a silent wrong answer.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"

FEASIBILITY_TOL = 1e-6  # absolute, on rows normalized by max(1, ||row||_inf)
BOUND_TOL = 1e-9
FLOW_EPS = 1e-9  # positivity threshold for "carries flow" classification

_SENSES = ("<=", ">=", "=")


@dataclass(frozen=True)
class LinConstraint:
    coeffs: tuple[tuple[int, float], ...]
    sense: str
    rhs: float
    name: str = ""


@dataclass
class LpProblem:
    """A sparse LP built incrementally: variables, constraints, objective."""

    name: str = ""
    var_names: list[str] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    constraints: list[LinConstraint] = field(default_factory=list)
    objective: list[tuple[int, float]] = field(default_factory=list)
    maximize: bool = True

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf) -> int:
        if math.isnan(lb) or math.isnan(ub) or lb > ub or lb == math.inf or ub == -math.inf:
            raise ValidationError(f"variable {name!r}: bounds must satisfy lb <= ub")
        self.var_names.append(name)
        self.lower.append(float(lb))
        self.upper.append(float(ub))
        return len(self.var_names) - 1

    def add_constraint(
        self,
        coeffs: list[tuple[int, float]],
        sense: str,
        rhs: float,
        name: str = "",
    ) -> int:
        if sense not in _SENSES:
            raise ValidationError(f"unknown constraint sense {sense!r}")
        if not math.isfinite(rhs):
            raise ValidationError(f"constraint {name!r}: right-hand side must be finite")
        for j, c in coeffs:
            if not 0 <= j < self.n_vars:
                raise ValidationError(f"constraint {name!r}: unknown variable index {j}")
            if not math.isfinite(c):
                raise ValidationError(f"constraint {name!r}: non-finite coefficient")
        self.constraints.append(LinConstraint(tuple(coeffs), sense, float(rhs), name))
        return len(self.constraints) - 1

    def set_objective(self, coeffs: list[tuple[int, float]], maximize: bool = True) -> None:
        for j, c in coeffs:
            if not 0 <= j < self.n_vars:
                raise ValidationError(f"objective: unknown variable index {j}")
            if not math.isfinite(c):
                raise ValidationError("objective: non-finite coefficient")
        self.objective = list(coeffs)
        self.maximize = maximize

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, v in self.objective:
            c[j] += v
        return c


@dataclass
class LpSolution:
    status: str
    objective: float
    values: np.ndarray | None
    solve_time: float
    solution_kind: str
    iterations: int = 0
    message: str = ""


def check_feasibility(
    prob: LpProblem,
    x: np.ndarray,
    row_tol: float = FEASIBILITY_TOL,
    bound_tol: float = BOUND_TOL,
) -> list[str]:
    """Substitute x into the original rows and bounds; return violations."""
    issues: list[str] = []
    lower = np.asarray(prob.lower)
    upper = np.asarray(prob.upper)
    low_bad = np.nonzero(x < lower - bound_tol)[0]
    up_bad = np.nonzero(x > upper + bound_tol)[0]
    for j in low_bad:
        issues.append(f"var {prob.var_names[j]}: {x[j]!r} below lower bound {lower[j]!r}")
    for j in up_bad:
        issues.append(f"var {prob.var_names[j]}: {x[j]!r} above upper bound {upper[j]!r}")
    for i, con in enumerate(prob.constraints):
        lhs = sum(c * x[j] for j, c in con.coeffs)
        scale = max(1.0, max((abs(c) for _, c in con.coeffs), default=1.0))
        resid = lhs - con.rhs
        bad = (
            (con.sense == "<=" and resid > row_tol * scale)
            or (con.sense == ">=" and resid < -row_tol * scale)
            or (con.sense == "=" and abs(resid) > row_tol * scale)
        )
        if bad:
            issues.append(f"row {con.name or i}: lhs {lhs!r} {con.sense} rhs {con.rhs!r} violated")
    return issues


# ---------------------------------------------------------------------------
# Bundled revised simplex
# ---------------------------------------------------------------------------

_AT_LB, _AT_UB, _BASIC, _FREE = 0, 1, 2, 3


def _prune_implied_rows(rows, lower, upper):
    """Drop <= rows implied by another <= row, given the variable bounds.

    Row V is implied by row U (same sense, rhs_U <= rhs_V) when (U - V) x >= 0
    holds over the bound box: per variable, the coefficient difference is
    zero, or positive with a nonnegative lower bound, or negative with a
    nonpositive upper bound.  Resilient models emit one delivery row per
    failure scenario and one capacity row per (arc, scenario); most are
    implied by the row of the harshest scenario, so this cuts the working
    row count severalfold without changing the feasible set.  Candidate
    pairs are limited to rows sharing, in turn, their positive or their
    negative coefficient part, which is where scenario families overlap.
    """

    def implies(u_items, u_rhs, v_items, v_rhs) -> bool:
        if u_rhs > v_rhs:
            return False
        dv = dict(v_items)
        for j, cu in u_items:
            diff = cu - dv.pop(j, 0.0)
            if diff > 0 and lower[j] < 0:
                return False
            if diff < 0 and upper[j] > 0:
                return False
        for j, cv in dv.items():
            if cv < 0 and lower[j] < 0:
                return False
            if cv > 0 and upper[j] > 0:
                return False
        return True

    dropped = [False] * len(rows)
    for sign_part in (1, -1):
        groups: dict[tuple, list[int]] = {}
        for i, (items, sense, rhs) in enumerate(rows):
            if sense != "<=":
                continue
            shared = tuple((j, c) for j, c in items if (c > 0) == (sign_part > 0))
            groups.setdefault((rhs, shared), []).append(i)
        for members in groups.values():
            if not 1 < len(members) <= 2000:
                continue
            members.sort(key=lambda i: len(rows[i][0]))
            for a in range(len(members)):
                ia = members[a]
                if dropped[ia]:
                    continue
                ua, _, ra = rows[ia]
                for b in range(len(members)):
                    ib = members[b]
                    if ib == ia or dropped[ib]:
                        continue
                    ub, _, rb = rows[ib]
                    if implies(ua, ra, ub, rb):
                        dropped[ib] = True
    return [row for i, row in enumerate(rows) if not dropped[i]]


def _standardize(prob: LpProblem):
    """Convert to equality standard form with slacks, reducing the row set.

    All >= rows are negated to <=.  Exactly identical rows (after merging
    duplicate coefficients) are collapsed, then rows implied by another row
    over the bound box are dropped; neither step changes the feasible set,
    and the returned solution is still checked against the original rows.
    Returns (A, b, senses, slack_of_row) where A has one slack column per
    surviving inequality row, or None for a constant-false row.
    """
    n = prob.n_vars
    rows: list[tuple[tuple[tuple[int, float], ...], str, float]] = []
    seen: set[tuple] = set()
    for con in prob.constraints:
        merged: dict[int, float] = {}
        for j, c in con.coeffs:
            merged[j] = merged.get(j, 0.0) + c
        items = tuple(sorted((j, c) for j, c in merged.items() if c != 0.0))
        sense, rhs = con.sense, con.rhs
        if sense == ">=":
            items = tuple((j, -c) for j, c in items)
            sense, rhs = "<=", -rhs
        if not items:
            if (sense == "<=" and rhs < -FEASIBILITY_TOL) or (
                sense == "=" and abs(rhs) > FEASIBILITY_TOL
            ):
                return None  # constant row that can never hold
            continue
        key = (sense, rhs, items)
        if key in seen:
            continue
        seen.add(key)
        rows.append((items, sense, rhs))

    rows = _prune_implied_rows(rows, prob.lower, prob.upper)
    m = len(rows)
    n_slack = sum(1 for _, sense, _ in rows if sense == "<=")
    data, ri, ci = [], [], []
    b = np.empty(m)
    senses = []
    slack_col = n
    slack_of_row = np.full(m, -1, dtype=int)
    for i, (items, sense, rhs) in enumerate(rows):
        b[i] = rhs
        senses.append(sense)
        for j, c in items:
            ri.append(i)
            ci.append(j)
            data.append(c)
        if sense == "<=":
            ri.append(i)
            ci.append(slack_col)
            data.append(1.0)
            slack_of_row[i] = slack_col
            slack_col += 1
    A = sp.csc_matrix((data, (ri, ci)), shape=(m, n + n_slack))
    return A, b, senses, slack_of_row


class _Simplex:
    """Bounded-variable revised simplex over equality form with artificials."""

    def __init__(self, A: sp.csc_matrix, b: np.ndarray, lb: np.ndarray, ub: np.ndarray,
                 slack_of_row: np.ndarray, max_iter: int):
        self.m, n_cols = A.shape
        self.max_iter = max_iter
        m = self.m

        # Nonbasic start: finite lower bound, else finite upper, else free at 0.
        status = np.full(n_cols, _AT_LB, dtype=np.int8)
        start = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
        status[~np.isfinite(lb) & np.isfinite(ub)] = _AT_UB
        status[~np.isfinite(lb) & ~np.isfinite(ub)] = _FREE

        resid = b - A @ start

        basis = np.empty(m, dtype=int)
        x_B = np.empty(m)
        art_sign = np.zeros(m)
        art_rows: list[int] = []
        for i in range(m):
            s_col = slack_of_row[i]
            if s_col >= 0 and resid[i] >= 0.0:
                basis[i] = s_col
                x_B[i] = resid[i]
                status[s_col] = _BASIC
            else:
                art_rows.append(i)
                art_sign[i] = 1.0 if resid[i] >= 0.0 else -1.0
                x_B[i] = abs(resid[i])

        n_art = len(art_rows)
        if n_art:
            art_data = art_sign[art_rows]
            art_mat = sp.csc_matrix((art_data, (art_rows, np.arange(n_art))), shape=(m, n_art))
            A = sp.hstack([A, art_mat], format="csc")
            lb = np.concatenate([lb, np.zeros(n_art)])
            ub = np.concatenate([ub, np.full(n_art, np.inf)])
            status = np.concatenate([status, np.full(n_art, _BASIC, dtype=np.int8)])
            for k, i in enumerate(art_rows):
                basis[i] = n_cols + k

        self.A = A
        self.AT = A.T.tocsr()
        self.b = b
        self.lb = lb
        self.ub = ub
        self.status = status
        self.basis = basis
        self.x_B = x_B
        self.n_total = A.shape[1]
        self.n_art = n_art
        self.art_cols = np.arange(n_cols, n_cols + n_art)
        self.Binv = np.eye(m)
        for i in art_rows:
            if art_sign[i] < 0:
                self.Binv[i, i] = -1.0
        self.total_iters = 0

    def _column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        a, z = self.A.indptr[j], self.A.indptr[j + 1]
        return self.A.indices[a:z], self.A.data[a:z]

    def _nonbasic_point(self) -> np.ndarray:
        x = np.where(self.status == _AT_UB, self.ub, np.where(np.isfinite(self.lb), self.lb, 0.0))
        x[self.status == _FREE] = 0.0
        x[self.status == _BASIC] = 0.0
        return x

    def _refresh_basics(self) -> None:
        resid = self.b - self.A @ self._nonbasic_point()
        self.x_B = self.Binv @ resid

    def solution(self) -> np.ndarray:
        x = self._nonbasic_point()
        x[self.basis] = self.x_B
        return x

    def _reduced_costs(self, c: np.ndarray) -> np.ndarray:
        y = self.Binv.T @ c[self.basis]
        return c - self.AT @ y

    def optimize(self, c: np.ndarray) -> str:
        """Maximize c @ x from the current basis; returns a status string.

        Reduced costs are carried between iterations with the pivot-row
        update and recomputed exactly on a fixed cadence and before any
        claim of optimality.
        """
        m = self.m
        dual_tol = 1e-9
        piv_tol = 1e-10
        stall = 0
        bland = False
        with np.errstate(invalid="ignore"):
            fixed = (self.ub - self.lb) <= 0  # fixed columns can never change value
        d = self._reduced_costs(c)
        d_exact = True
        iters_left = self.max_iter - self.total_iters

        for _ in range(max(iters_left, 0)):
            self.total_iters += 1
            if self.total_iters % 100 == 0:
                self._refresh_basics()
                d = self._reduced_costs(c)
                d_exact = True
            up = (d > dual_tol) & ((self.status == _AT_LB) | (self.status == _FREE)) & ~fixed
            down = (d < -dual_tol) & ((self.status == _AT_UB) | (self.status == _FREE)) & ~fixed
            eligible = up | down
            if not eligible.any():
                if not d_exact:
                    d = self._reduced_costs(c)
                    d_exact = True
                    continue
                self._refresh_basics()
                return OPTIMAL
            if bland:
                j = int(np.nonzero(eligible)[0][0])
            else:
                score = np.where(eligible, np.abs(d), 0.0)
                j = int(np.argmax(score))
            sigma = 1.0 if up[j] else -1.0

            rows, vals = self._column(j)
            w = self.Binv[:, rows] @ vals
            swi = sigma * w

            ratios = np.full(m, np.inf)
            dec = swi > piv_tol
            inc = swi < -piv_tol
            if dec.any():
                ratios[dec] = (self.x_B[dec] - self.lb[self.basis[dec]]) / swi[dec]
            if inc.any():
                ratios[inc] = (self.ub[self.basis[inc]] - self.x_B[inc]) / (-swi[inc])
            np.maximum(ratios, 0.0, out=ratios)
            r_min = ratios.min() if m else np.inf
            span = self.ub[j] - self.lb[j]
            t_flip = span if np.isfinite(span) else np.inf

            if not np.isfinite(min(r_min, t_flip)):
                return UNBOUNDED

            gain = abs(d[j]) * min(r_min, t_flip)
            if gain <= 1e-12:
                stall += 1
                if stall >= 300:
                    bland = True
            else:
                stall = 0
                bland = False

            if t_flip <= r_min:
                # Bound flip: variable jumps to its opposite bound, basis unchanged.
                self.x_B -= swi * t_flip
                self.status[j] = _AT_UB if self.status[j] == _AT_LB else _AT_LB
                continue

            cand = np.nonzero(ratios <= r_min + 1e-12 * (1.0 + r_min))[0]
            if bland:
                r = int(cand[np.argmin(self.basis[cand])])
            else:
                r = int(cand[np.argmax(np.abs(w[cand]))])
            t = float(ratios[r])

            self.x_B -= swi * t
            leave = self.basis[r]
            self.status[leave] = _AT_LB if swi[r] > 0 else _AT_UB
            if self.status[j] == _AT_UB:
                enter_val = self.ub[j] - t
            elif self.status[j] == _AT_LB:
                enter_val = self.lb[j] + t
            else:
                enter_val = sigma * t
            self.status[j] = _BASIC
            self.basis[r] = j
            self.x_B[r] = enter_val

            pivot = w[r]
            self.Binv[r, :] /= pivot
            col = w.copy()
            col[r] = 0.0
            self.Binv -= np.outer(col, self.Binv[r, :])
            d_j = d[j]
            d -= d_j * (self.AT @ self.Binv[r, :])
            d[j] = 0.0
            d_exact = False
        return NUMERICAL_FAILURE


def bundled_simplex(prob: LpProblem, max_iter: int = 200_000) -> LpSolution:
    """Reference backend: deterministic two-phase bounded revised simplex.

    Phase 1 drives artificials to zero when the all-slack start is infeasible;
    phase 2 optimizes the real objective.  Returns a vertex solution.
    """
    n = prob.n_vars
    std = _standardize(prob)
    if std is None:
        return LpSolution(INFEASIBLE, math.nan, None, 0.0, "vertex",
                          message="constant infeasible row")
    A, b, _senses, slack_of_row = std
    n_cols = A.shape[1]
    lb = np.concatenate([np.asarray(prob.lower, dtype=float), np.zeros(n_cols - n)])
    ub = np.concatenate([np.asarray(prob.upper, dtype=float), np.full(n_cols - n, np.inf)])

    sx = _Simplex(A, b, lb, ub, slack_of_row, max_iter)

    if sx.n_art:
        c1 = np.zeros(sx.n_total)
        c1[sx.art_cols] = -1.0
        status = sx.optimize(c1)
        if status != OPTIMAL:
            return LpSolution(NUMERICAL_FAILURE, math.nan, None, 0.0, "vertex",
                              iterations=sx.total_iters,
                              message=f"phase 1 ended with {status}")
        infeas = float(sx.solution()[sx.art_cols].sum())
        if infeas > 1e-7 * (1.0 + float(np.abs(b).max(initial=0.0))):
            return LpSolution(INFEASIBLE, math.nan, None, 0.0, "vertex",
                              iterations=sx.total_iters,
                              message=f"phase 1 residual {infeas:.3e}")
        sx.ub[sx.art_cols] = 0.0

    sign = 1.0 if prob.maximize else -1.0
    c2 = np.zeros(sx.n_total)
    c2[:n] = sign * prob.objective_vector()
    status = sx.optimize(c2)
    if status != OPTIMAL:
        return LpSolution(status, math.nan, None, 0.0, "vertex",
                          iterations=sx.total_iters,
                          message=f"simplex ended with {status}")

    x = sx.solution()[:n]
    # Snap round-off noise at the bounds.
    np.clip(x, np.asarray(prob.lower), np.asarray(prob.upper), out=x)
    obj = float(prob.objective_vector() @ x)
    return LpSolution(OPTIMAL, obj, x, 0.0, "vertex", iterations=sx.total_iters)


def scipy_backend(prob: LpProblem) -> LpSolution:
    """External backend: HiGHS dual simplex through scipy (vertex solutions).

    Constraints are handed over sparse so the backend stays usable on
    instances far beyond what the bundled dense-basis simplex can hold.
    """
    from scipy.optimize import linprog

    sign = -1.0 if prob.maximize else 1.0
    c = sign * prob.objective_vector()
    n = prob.n_vars

    def sparse_rows(rows):
        data, ri, ci = [], [], []
        rhs = []
        for i, (con, flip) in enumerate(rows):
            for j, v in con.coeffs:
                ri.append(i)
                ci.append(j)
                data.append(-v if flip else v)
            rhs.append(-con.rhs if flip else con.rhs)
        mat = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
        return mat, np.array(rhs)

    ub_rows = [(con, con.sense == ">=") for con in prob.constraints if con.sense != "="]
    eq_rows = [(con, False) for con in prob.constraints if con.sense == "="]
    a_ub, b_ub = sparse_rows(ub_rows) if ub_rows else (None, None)
    a_eq, b_eq = sparse_rows(eq_rows) if eq_rows else (None, None)
    bounds = [
        (lo if math.isfinite(lo) else None, hi if math.isfinite(hi) else None)
        for lo, hi in zip(prob.lower, prob.upper)
    ]
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs-ds",
    )
    if res.status == 0:
        x = np.asarray(res.x)
        obj = float(prob.objective_vector() @ x)
        return LpSolution(OPTIMAL, obj, x, 0.0, "vertex", iterations=int(res.nit))
    status = {2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, NUMERICAL_FAILURE)
    return LpSolution(status, math.nan, None, 0.0, "vertex",
                      iterations=int(getattr(res, "nit", 0)), message=str(res.message))


BACKENDS = {
    "bundled": bundled_simplex,
    "scipy": scipy_backend,
}


def solve(prob: LpProblem, backend: str = "bundled") -> LpSolution:
    """Solve with the named backend; solve_time covers the solve call only.

    An optimal result is accepted only after direct substitution into the
    original rows and bounds succeeds; otherwise the status is downgraded to
    a numerical failure with the violations listed.
    """
    try:
        fn = BACKENDS[backend]
    except KeyError:
        raise ValidationError(
            f"unknown backend {backend!r}; available: {sorted(BACKENDS)}") from None
    t0 = time.perf_counter()
    sol = fn(prob)
    sol.solve_time = time.perf_counter() - t0
    if sol.status == OPTIMAL:
        issues = check_feasibility(prob, sol.values)
        if issues:
            return LpSolution(
                NUMERICAL_FAILURE, math.nan, None, sol.solve_time, sol.solution_kind,
                iterations=sol.iterations,
                message="solution failed feasibility re-check: " + "; ".join(issues[:5]),
            )
    return sol


def write_lp_text(prob: LpProblem) -> str:
    """Render in the fixed LP text format for cross-checks with other tools."""

    def num(v: float) -> str:
        return repr(float(v))

    def term(j: int, c: float, first: bool) -> str:
        name = prob.var_names[j]
        if first:
            return f"{num(c)} {name}"
        return f"{'+' if c >= 0 else '-'} {num(abs(c))} {name}"

    lines = [f"\\ {prob.name or 'lp'}", "Maximize" if prob.maximize else "Minimize"]
    obj_terms = " ".join(term(j, c, i == 0) for i, (j, c) in enumerate(prob.objective))
    lines.append(f" obj: {obj_terms or '0'}")
    lines.append("Subject To")
    for i, con in enumerate(prob.constraints):
        body = " ".join(term(j, c, k == 0) for k, (j, c) in enumerate(con.coeffs))
        op = {"<=": "<=", ">=": ">=", "=": "="}[con.sense]
        lines.append(f" {con.name or f'c{i}'}: {body or '0'} {op} {num(con.rhs)}")
    lines.append("Bounds")
    for j, (lo, hi) in enumerate(zip(prob.lower, prob.upper)):
        name = prob.var_names[j]
        if lo == hi:
            lines.append(f" {name} = {num(lo)}")
        elif not math.isfinite(lo) and not math.isfinite(hi):
            lines.append(f" {name} free")
        elif not math.isfinite(hi):
            lines.append(f" {num(lo)} <= {name}")
        elif not math.isfinite(lo):
            lines.append(f" -inf <= {name} <= {num(hi)}")
        else:
            lines.append(f" {num(lo)} <= {name} <= {num(hi)}")
    lines.append("End")
    return "\n".join(lines) + "\n"
