"""Dense two-phase primal simplex with dual extraction.

Minimizes c'x subject to sparse rows with senses <=, =, >= and per-variable
bounds (defaults: lower 0, upper +inf; both may be infinite). Deterministic:
Dantzig pricing with lowest-index tie breaks for the first 10*(rows+cols)
pivots, then Bland's rule, which cannot cycle.

Dual sign convention for a minimization: the dual of a >= row is nonnegative,
the dual of a <= row is nonpositive, equality rows are free. Duals are the
sensitivity of the optimal value to the row's rhs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBreakdown

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-9        # eligibility threshold for ratio-test denominators
BREAKDOWN_TOL = 1e-11   # chosen pivot below this aborts the solve
FEAS_TOL = 1e-7         # phase-1 optimum above this means infeasible
COST_TOL = 1e-9         # reduced-cost threshold for optimality

_SENSES = ("<=", "=", ">=")


@dataclass(frozen=True)
class Row:
    coefs: dict[int, float]
    sense: str
    rhs: float


@dataclass
class LinearProgram:
    """Sparse-row LP in natural (bounded-variable) form."""

    n_vars: int
    objective: np.ndarray
    rows: list[Row] = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.n_vars,):
            raise ValueError("objective length != n_vars")
        if self.lower is None:
            self.lower = np.zeros(self.n_vars)
        if self.upper is None:
            self.upper = np.full(self.n_vars, math.inf)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)

    def add_row(self, coefs: dict[int, float], sense: str, rhs: float) -> None:
        if sense not in _SENSES:
            raise ValueError(f"bad sense {sense!r}")
        for j in coefs:
            if not 0 <= j < self.n_vars:
                raise ValueError(f"column {j} out of range")
        if not math.isfinite(rhs):
            raise ValueError("rhs must be finite")
        self.rows.append(Row(dict(coefs), sense, float(rhs)))


@dataclass
class LpSolution:
    status: str
    objective_value: float
    primal: np.ndarray | None
    duals: np.ndarray | None
    # Set only when status == INFEASIBLE: phase-1 duals on the user rows
    # (subgradient of the infeasibility measure w.r.t. the rhs vector) and
    # the phase-1 optimum itself. Together they give Benders feasibility
    # cuts without exposing internal bound rows.
    farkas: np.ndarray | None = None
    phase1_value: float | None = None


# Column-mapping modes for the standard-form rewrite.
_SHIFT, _NEG, _SPLIT = 0, 1, 2


def _standardize(lp: LinearProgram):
    """Rewrite to min c'y, A y (sense) b, y >= 0.

    Returns (c, dense rows A, b, senses, col_map, const, n_user_rows,
    bound_rows) where col_map reconstructs original variables and finite
    upper bounds become extra <= rows appended after the user rows.
    """
    cols = []       # (mode, orig j, constant, sign)
    col_of = {}     # orig j -> (mode, data...)
    c_parts = []
    for j in range(lp.n_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo > hi:
            raise ValueError(f"variable {j} has lower > upper")
        if math.isfinite(lo):
            col_of[j] = (_SHIFT, len(cols), lo, math.isfinite(hi))
            cols.append((j, 1.0, lo))
            c_parts.append(lp.objective[j])
        elif math.isfinite(hi):
            col_of[j] = (_NEG, len(cols), hi, False)
            cols.append((j, -1.0, hi))
            c_parts.append(-lp.objective[j])
        else:
            col_of[j] = (_SPLIT, len(cols), 0.0, False)
            cols.append((j, 1.0, 0.0))
            cols.append((j, -1.0, 0.0))
            c_parts.append(lp.objective[j])
            c_parts.append(-lp.objective[j])

    n = len(cols)
    user_rows = []
    for row in lp.rows:
        dense = np.zeros(n)
        rhs = row.rhs
        for j, a in row.coefs.items():
            mode, k, const, _ = col_of[j]
            rhs -= a * const
            if mode == _SHIFT:
                dense[k] += a
            elif mode == _NEG:
                dense[k] -= a
            else:
                dense[k] += a
                dense[k + 1] -= a
        user_rows.append((dense, row.sense, rhs))

    bound_rows = []
    for j in range(lp.n_vars):
        mode, k, const, has_ub = col_of[j]
        if mode == _SHIFT and has_ub:
            dense = np.zeros(n)
            dense[k] = 1.0
            bound_rows.append((dense, "<=", lp.upper[j] - lp.lower[j]))

    all_rows = user_rows + bound_rows
    const = sum(lp.objective[j] * col_of[j][2] for j in range(lp.n_vars)
                if col_of[j][0] in (_SHIFT, _NEG))
    return (np.array(c_parts), all_rows, col_of, const, len(user_rows))


def _pivot(tab, obj, basis, r, j):
    piv = tab[r, j]
    if abs(piv) < BREAKDOWN_TOL:
        raise NumericalBreakdown(f"pivot magnitude {abs(piv):.3e}")
    pivrow = tab[r] / piv
    colvals = tab[:, j].copy()
    colvals[r] = 0.0
    tab -= np.outer(colvals, pivrow)
    tab[r] = pivrow
    tab[:, j] = 0.0
    tab[r, j] = 1.0
    obj -= obj[j] * pivrow
    obj[j] = 0.0
    basis[r] = j


def _choose_leaving(tab, basis, j):
    col = tab[:, j]
    ok = col > PIVOT_TOL
    if not ok.any():
        return -1
    ratios = np.full(len(basis), math.inf)
    ratios[ok] = tab[ok, -1] / col[ok]
    rmin = ratios.min()
    ties = np.flatnonzero(ratios <= rmin + 1e-12 * (1.0 + abs(rmin)))
    # among minimal ratios take the row whose basic variable has the
    # lowest index: deterministic, and it is Bland's leaving rule
    return int(min(ties, key=lambda r: basis[r]))


def _run_simplex(tab, obj, basis, allowed, bland_after):
    it = 0
    bland = False
    while True:
        red = obj[:-1]
        if bland:
            cand = np.flatnonzero((red < -COST_TOL) & allowed)
            if cand.size == 0:
                return OPTIMAL
            j = int(cand[0])
        else:
            masked = np.where(allowed, red, 0.0)
            j = int(np.argmin(masked))
            if masked[j] >= -COST_TOL:
                return OPTIMAL
        r = _choose_leaving(tab, basis, j)
        if r < 0:
            return UNBOUNDED
        _pivot(tab, obj, basis, r, j)
        it += 1
        if it >= bland_after:
            bland = True
        if it > 200000:
            raise NumericalBreakdown("simplex iteration limit")


def _box_only_solution(lp, c, col_of, const):
    # no rows at all: minimize over the nonnegative orthant of y
    if (c < -COST_TOL).any():
        return LpSolution(UNBOUNDED, -math.inf, None, None)
    x = np.zeros(lp.n_vars)
    for j in range(lp.n_vars):
        mode, k, cst, _ = col_of[j]
        x[j] = cst
    return LpSolution(OPTIMAL, float(lp.objective @ x), x, np.zeros(0))


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve the LP; see module docstring for conventions."""
    c, all_rows, col_of, const, n_user = _standardize(lp)
    m = len(all_rows)
    n = len(c)
    if m == 0:
        return _box_only_solution(lp, c, col_of, const)

    # orient every row to a nonnegative rhs, then attach slack/surplus and
    # artificial columns; slacks of <= rows start basic, the rest artificial
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = []
    row_sign = np.ones(m)
    for i, (dense, sense, rhs) in enumerate(all_rows):
        if rhs < 0:
            dense = -dense
            rhs = -rhs
            sense = {"<=": ">=", ">=": "<=", "=": "="}[sense]
            row_sign[i] = -1.0
        A[i] = dense
        b[i] = rhs
        senses.append(sense)

    slack_of = {}
    art_of = {}
    extra = []
    for i, s in enumerate(senses):
        if s == "<=":
            col = np.zeros(m)
            col[i] = 1.0
            slack_of[i] = n + len(extra)
            extra.append(col)
        elif s == ">=":
            col = np.zeros(m)
            col[i] = -1.0
            slack_of[i] = n + len(extra)
            extra.append(col)
    for i, s in enumerate(senses):
        if s != "<=":
            col = np.zeros(m)
            col[i] = 1.0
            art_of[i] = n + len(extra)
            extra.append(col)
    full = np.hstack([A] + [e.reshape(m, 1) for e in extra]) if extra else A.copy()
    ncols = full.shape[1]
    art_cols = np.zeros(ncols, dtype=bool)
    for j in art_of.values():
        art_cols[j] = True

    tab = np.hstack([full, b.reshape(m, 1)])
    basis = [art_of.get(i, slack_of.get(i)) for i in range(m)]

    bland_after = 10 * (m + ncols)

    # phase 1: minimize the artificial mass
    c1 = np.zeros(ncols)
    c1[art_cols] = 1.0
    obj = np.zeros(ncols + 1)
    obj[:-1] = c1
    for i, bcol in enumerate(basis):
        if c1[bcol] != 0.0:
            obj -= c1[bcol] * tab[i]
    allowed = np.ones(ncols, dtype=bool)
    status = _run_simplex(tab, obj, basis, allowed, bland_after)
    phase1_val = -obj[-1]
    if status != OPTIMAL or phase1_val > FEAS_TOL:
        # phase-1 duals certify infeasibility
        B = full[:, basis]
        y = np.linalg.solve(B.T, c1[basis])
        farkas = (row_sign * y)[:n_user]
        return LpSolution(INFEASIBLE, math.inf, None, None,
                          farkas=farkas, phase1_value=float(phase1_val))

    # drive leftover artificials out of the basis where possible
    for i in range(m):
        if art_cols[basis[i]]:
            row = tab[i, :-1]
            cand = np.flatnonzero((np.abs(row) > PIVOT_TOL) & ~art_cols)
            if cand.size:
                _pivot(tab, obj, basis, i, int(cand[0]))

    # phase 2: original costs, artificial columns locked out
    c2 = np.zeros(ncols)
    c2[:n] = c
    obj = np.zeros(ncols + 1)
    obj[:-1] = c2
    for i, bcol in enumerate(basis):
        if c2[bcol] != 0.0:
            obj -= c2[bcol] * tab[i]
    allowed = ~art_cols
    status = _run_simplex(tab, obj, basis, allowed, bland_after)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, -math.inf, None, None)

    y_std = np.zeros(ncols)
    y_std[basis] = tab[:, -1]
    x = np.zeros(lp.n_vars)
    for j in range(lp.n_vars):
        mode, k, cst, _ = col_of[j]
        if mode == _SHIFT:
            x[j] = cst + y_std[k]
        elif mode == _NEG:
            x[j] = cst - y_std[k]
        else:
            x[j] = y_std[k] - y_std[k + 1]

    B = full[:, basis]
    duals = np.linalg.solve(B.T, c2[basis])
    duals = (row_sign * duals)[:n_user]
    return LpSolution(OPTIMAL, float(lp.objective @ x), x, duals)


def residuals(lp: LinearProgram, x: np.ndarray) -> np.ndarray:
    """Signed constraint violations, one entry per row (0 when satisfied)."""
    out = np.zeros(len(lp.rows))
    for i, row in enumerate(lp.rows):
        lhs = sum(a * x[j] for j, a in row.coefs.items())
        if row.sense == "<=":
            out[i] = max(0.0, lhs - row.rhs)
        elif row.sense == ">=":
            out[i] = max(0.0, row.rhs - lhs)
        else:
            out[i] = abs(lhs - row.rhs)
    return out


def duality_report(lp: LinearProgram, sol: LpSolution) -> dict:
    """Feasibility, complementary slackness and gap diagnostics at a solution.

    The gap is computed against the Lagrangian bound b'y + sum of bound
    contributions from the reduced costs, which equals c'x at an exact
    vertex optimum.
    """
    x, y = sol.primal, sol.duals
    feas = float(residuals(lp, x).max()) if lp.rows else 0.0
    lo_ok = float(np.max(np.maximum(0.0, lp.lower - x), initial=0.0))
    hi_ok = float(np.max(np.maximum(0.0, x - lp.upper), initial=0.0))
    # reduced costs of the original variables
    red = lp.objective.astype(float).copy()
    for i, row in enumerate(lp.rows):
        for j, a in row.coefs.items():
            red[j] -= y[i] * a
    comp = 0.0
    bound_term = 0.0
    for j in range(lp.n_vars):
        if math.isfinite(lp.lower[j]) and red[j] > 0:
            comp = max(comp, red[j] * abs(x[j] - lp.lower[j]))
            bound_term += red[j] * lp.lower[j]
        elif math.isfinite(lp.upper[j]) and red[j] < 0:
            comp = max(comp, -red[j] * abs(lp.upper[j] - x[j]))
            bound_term += red[j] * lp.upper[j]
    slack_comp = 0.0
    for i, row in enumerate(lp.rows):
        lhs = sum(a * x[j] for j, a in row.coefs.items())
        slack_comp = max(slack_comp, abs(y[i] * (lhs - row.rhs)))
    dual_obj = float(np.dot(y, [r.rhs for r in lp.rows]) + bound_term)
    gap = abs(sol.objective_value - dual_obj)
    return {
        "feasibility": max(feas, lo_ok, hi_ok),
        "complementarity": max(comp, slack_comp),
        "gap": gap,
    }


def write_cplex_lp(lp: LinearProgram, names: list[str] | None = None) -> str:
    """Render the LP in CPLEX LP text format (debugging aid)."""
    if names is None:
        names = [f"x{j}" for j in range(lp.n_vars)]

    def linear(pairs):
        out = []
        for j, a in pairs:
            if not out:
                out.append(f"{'- ' if a < 0 else ''}{abs(a):.17g} {names[j]}")
            else:
                out.append(f"{'-' if a < 0 else '+'} {abs(a):.17g} {names[j]}")
        return " ".join(out) if out else "0 " + names[0]

    lines = ["Minimize",
             " obj: " + linear([(j, a) for j, a in enumerate(lp.objective)
                                if a != 0.0])]
    lines.append("Subject To")
    for i, row in enumerate(lp.rows):
        body = linear(sorted(row.coefs.items()))
        lines.append(f" c{i}: {body} {row.sense} {row.rhs:.17g}")
    lines.append("Bounds")
    for j in range(lp.n_vars):
        lo, hi = lp.lower[j], lp.upper[j]
        if lo == 0.0 and math.isinf(hi):
            continue
        lo_s = "-inf" if math.isinf(lo) else f"{lo:.17g}"
        hi_s = "+inf" if math.isinf(hi) else f"{hi:.17g}"
        lines.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    lines.append("End")
    return "\n".join(lines) + "\n"
