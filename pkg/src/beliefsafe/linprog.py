"""Small dense linear-programming solver and maximin (safe) strategies.

The solver is a two-phase primal simplex on the standard-form tableau with
Bland's anti-cycling rule. Instances in this package are tiny (a handful of
variables and constraints), so the implementation favors robustness and
deterministic pivoting over speed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .normal_form import HypothesisSet, MixedStrategy, PayoffMatrix

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
CERT_TOL = 1e-8
DEFAULT_MAX_PIVOTS = 10_000


class LpError(Exception):
    """Base class for solver failures."""


class LpInfeasibleError(LpError):
    """The constraint set is empty."""


class LpUnboundedError(LpError):
    """The objective is unbounded above on the feasible set."""


class LpIterationLimitError(LpError):
    """Pivot budget exhausted before reaching optimality."""


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective . x subject to linear constraints and variable bounds.

    constraints: tuples (coefficients, relation, bound) with relation one of
    "<=", ">=", "==". bounds: per-variable (lower, upper), None for unbounded;
    defaults to (0, None) for every variable when omitted.
    """

    objective: Tuple[float, ...]
    constraints: Tuple[Tuple[Tuple[float, ...], str, float], ...]
    bounds: Optional[Tuple[Tuple[Optional[float], Optional[float]], ...]] = None

    def __post_init__(self):
        n = len(self.objective)
        if not all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")
        for coeffs, rel, bound in self.constraints:
            if len(coeffs) != n:
                raise ValueError("constraint dimension mismatch")
            if rel not in ("<=", ">=", "==", "="):
                raise ValueError(f"unknown relation {rel!r}")
            if not (all(np.isfinite(coeffs)) and np.isfinite(bound)):
                raise ValueError("constraint coefficients must be finite")
        if self.bounds is not None and len(self.bounds) != n:
            raise ValueError("bounds dimension mismatch")

    def var_bounds(self) -> Tuple[Tuple[Optional[float], Optional[float]], ...]:
        if self.bounds is None:
            return tuple((0.0, None) for _ in self.objective)
        return self.bounds


@dataclass(frozen=True)
class LpSolution:
    x: Tuple[float, ...]
    value: float
    pivots: int


@dataclass(frozen=True)
class MaximinResult:
    """Safe strategy x̄ with its guaranteed payoff against every member of Θ."""

    strategy: MixedStrategy
    value: float
    tight_set: Tuple[int, ...]


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row and tab[i, col] != 0.0:
            tab[i] -= tab[i, col] * tab[row]
    basis[row] = col


def _simplex_phase(tab, basis, cost, max_pivots, pivots_used, allow_cols):
    """Run primal simplex (maximization) with Bland's rule.

    allow_cols marks columns eligible to enter (artificials are barred in
    phase 2). Returns the pivot count; raises on unboundedness or when the
    pivot budget runs out.
    """
    m, ncols = tab.shape
    n = ncols - 1
    pivots = pivots_used
    while True:
        cb = cost[basis]
        reduced = cb @ tab[:, :n] - cost[:n]
        entering = -1
        for j in range(n):
            if allow_cols[j] and reduced[j] < -OPT_TOL:
                entering = j
                break
        if entering < 0:
            return pivots
        ratios_row = -1
        best_ratio = np.inf
        best_basis_idx = None
        for i in range(m):
            aij = tab[i, entering]
            if aij > FEAS_TOL:
                ratio = tab[i, -1] / aij
                # Bland tie-break: smallest basis variable index leaves.
                if ratio < best_ratio - 1e-12 or (
                    abs(ratio - best_ratio) <= 1e-12
                    and (best_basis_idx is None or basis[i] < best_basis_idx)
                ):
                    best_ratio = ratio
                    ratios_row = i
                    best_basis_idx = basis[i]
        if ratios_row < 0:
            raise LpUnboundedError("objective unbounded above")
        _pivot(tab, basis, ratios_row, entering)
        pivots += 1
        if pivots > max_pivots:
            raise LpIterationLimitError(f"exceeded {max_pivots} pivots")


def solve_lp(lp: LinearProgram, max_pivots: int = DEFAULT_MAX_PIVOTS) -> LpSolution:
    """Solve the LP, returning an optimal solution with a re-checked certificate.

    Raises LpInfeasibleError, LpUnboundedError or LpIterationLimitError;
    the three failure modes are reported distinctly.
    """
    n_orig = len(lp.objective)
    c_orig = np.asarray(lp.objective, dtype=float)
    bounds = lp.var_bounds()

    # Substitute each variable by nonnegative ones: x = lo + u, x = hi - u,
    # or x = u+ - u- for a free variable. Finite double bounds add a row.
    col_maps = []  # per original var: (kind, u-columns, offset)
    extra_rows = []  # (u-space coeff dict, rel, bound)
    n_u = 0
    for j, (lo, hi) in enumerate(bounds):
        if lo is not None:
            col_maps.append(("shift", (n_u,), float(lo)))
            if hi is not None:
                if hi < lo:
                    raise LpInfeasibleError(f"variable {j} has empty bound interval")
                extra_rows.append(({n_u: 1.0}, "<=", float(hi) - float(lo)))
            n_u += 1
        elif hi is not None:
            col_maps.append(("mirror", (n_u,), float(hi)))
            n_u += 1
        else:
            col_maps.append(("free", (n_u, n_u + 1), 0.0))
            n_u += 2

    def to_u_row(coeffs):
        row = np.zeros(n_u)
        shift = 0.0
        for j, a in enumerate(coeffs):
            if a == 0.0:
                continue
            kind, ucols, off = col_maps[j]
            if kind == "shift":
                row[ucols[0]] += a
                shift += a * off
            elif kind == "mirror":
                row[ucols[0]] -= a
                shift += a * off
            else:
                row[ucols[0]] += a
                row[ucols[1]] -= a
        return row, shift

    rows = []
    rels = []
    rhs = []
    for coeffs, rel, bound in lp.constraints:
        row, shift = to_u_row(coeffs)
        rows.append(row)
        rels.append("==" if rel == "=" else rel)
        rhs.append(float(bound) - shift)
    for cmap, rel, bound in extra_rows:
        row = np.zeros(n_u)
        for k, v in cmap.items():
            row[k] = v
        rows.append(row)
        rels.append(rel)
        rhs.append(bound)

    c_u, obj_shift = to_u_row(c_orig)

    m = len(rows)
    A = np.array(rows, dtype=float).reshape(m, n_u)
    b = np.array(rhs, dtype=float)
    # Normalize to b >= 0 so slacks/artificials start feasible.
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            rels[i] = {"<=": ">=", ">=": "<=", "==": "=="}[rels[i]]

    slack_cols = []
    art_cols = []
    blocks = [A]
    for i, rel in enumerate(rels):
        if rel == "<=":
            col = np.zeros((m, 1))
            col[i, 0] = 1.0
            blocks.append(col)
            slack_cols.append((i, "slack"))
        elif rel == ">=":
            col = np.zeros((m, 1))
            col[i, 0] = -1.0
            blocks.append(col)
            slack_cols.append((i, "surplus"))
    n_slack = len(slack_cols)
    for i, rel in enumerate(rels):
        if rel in (">=", "=="):
            col = np.zeros((m, 1))
            col[i, 0] = 1.0
            blocks.append(col)
            art_cols.append(i)
    n_art = len(art_cols)
    n_total = n_u + n_slack + n_art

    tab = np.hstack(blocks + [b.reshape(m, 1)]) if m else np.zeros((0, n_total + 1))
    basis = np.zeros(m, dtype=int)
    art_start = n_u + n_slack
    slack_of_row = {}
    for k, (i, kind) in enumerate(slack_cols):
        if kind == "slack":
            slack_of_row[i] = n_u + k
    for k, i in enumerate(art_cols):
        slack_of_row[i] = art_start + k
    for i in range(m):
        basis[i] = slack_of_row[i]

    pivots = 0
    is_art = np.zeros(n_total, dtype=bool)
    is_art[art_start:] = True

    if n_art:
        cost1 = np.zeros(n_total)
        cost1[art_start:] = -1.0
        allow = np.ones(n_total, dtype=bool)
        pivots = _simplex_phase(tab, basis, cost1, max_pivots, pivots, allow)
        phase1_val = -(cost1[basis] @ tab[:, -1])
        if phase1_val > 1e-7:
            raise LpInfeasibleError(f"phase-1 residual {phase1_val:.3e}")
        # Drive any residual artificial out of the basis; a row with no
        # eligible pivot is redundant and can stay (its rhs is ~0).
        for i in range(m):
            if is_art[basis[i]]:
                for j in range(art_start):
                    if abs(tab[i, j]) > FEAS_TOL:
                        _pivot(tab, basis, i, j)
                        pivots += 1
                        break

    cost2 = np.zeros(n_total)
    cost2[:n_u] = c_u
    allow = ~is_art
    pivots = _simplex_phase(tab, basis, cost2, max_pivots, pivots, allow)

    u = np.zeros(n_total)
    for i in range(m):
        u[basis[i]] = tab[i, -1]
    x = np.zeros(n_orig)
    for j, (kind, ucols, off) in enumerate(col_maps):
        if kind == "shift":
            x[j] = off + u[ucols[0]]
        elif kind == "mirror":
            x[j] = off - u[ucols[0]]
        else:
            x[j] = u[ucols[0]] - u[ucols[1]]
    value = float(c_orig @ x)

    _certify(lp, x, value)
    return LpSolution(x=tuple(float(v) for v in x), value=value, pivots=pivots)


def _certify(lp: LinearProgram, x: np.ndarray, value: float) -> None:
    """Re-check the reported solution by direct substitution."""
    if abs(float(np.dot(lp.objective, x)) - value) > CERT_TOL:
        raise LpError("certificate failure: objective mismatch")
    for coeffs, rel, bound in lp.constraints:
        lhs = float(np.dot(coeffs, x))
        if rel == "<=" and lhs > bound + CERT_TOL:
            raise LpError(f"certificate failure: {lhs} <= {bound} violated")
        if rel == ">=" and lhs < bound - CERT_TOL:
            raise LpError(f"certificate failure: {lhs} >= {bound} violated")
        if rel in ("==", "=") and abs(lhs - bound) > CERT_TOL:
            raise LpError(f"certificate failure: {lhs} == {bound} violated")
    for xj, (lo, hi) in zip(x, lp.var_bounds()):
        if lo is not None and xj < lo - CERT_TOL:
            raise LpError("certificate failure: lower bound violated")
        if hi is not None and xj > hi + CERT_TOL:
            raise LpError("certificate failure: upper bound violated")


def maximin_strategy(A: PayoffMatrix, theta: HypothesisSet) -> MaximinResult:
    """Solve max_x min_{y in Θ} x^T A y over the row-player simplex.

    For a full-simplex hypothesis set the constraints range over the pure
    columns of A, which is equivalent to constraining against every mixed
    strategy. The result's value is re-checked against min_y x̄^T A y.
    """
    a, b = A.shape
    if theta.full_simplex:
        cols = [np.eye(b)[j] for j in range(b)]
    else:
        cols = [m.probs for m in theta.members]
        if len(cols) and cols[0].shape[0] != b:
            raise ValueError("hypothesis set dimension does not match payoff matrix")

    # Variables: x_1..x_a >= 0, v free; maximize v.
    n = a + 1
    objective = tuple([0.0] * a + [1.0])
    constraints = [(tuple([1.0] * a + [0.0]), "==", 1.0)]
    for y in cols:
        payoff = A.entries @ y
        constraints.append((tuple(list(payoff) + [-1.0]), ">=", 0.0))
    lp = LinearProgram(
        objective=objective,
        constraints=tuple(constraints),
        bounds=tuple([(0.0, None)] * a + [(None, None)]),
    )
    sol = solve_lp(lp)
    raw = np.array(sol.x[:a])
    if raw.min() < -FEAS_TOL:
        raise LpError(f"maximin returned negative probability {raw.min()}")
    raw = np.clip(raw, 0.0, None)
    strategy = MixedStrategy(raw / raw.sum())
    value = float(sol.value)

    guarantees = [float(strategy.probs @ A.entries @ m.probs) for m in theta.members]
    if theta.full_simplex:
        guarantees.extend(
            float(strategy.probs @ A.entries[:, j]) for j in range(b)
        )
    worst = min(guarantees[: len(theta.members)]) if not theta.full_simplex else min(guarantees)
    if abs(worst - value) > CERT_TOL:
        raise LpError(
            f"maximin certificate failure: value {value} vs realized min {worst}"
        )
    tight = tuple(
        i
        for i, g in enumerate(
            float(strategy.probs @ A.entries @ m.probs) for m in theta.members
        )
        if g <= value + CERT_TOL
    )
    return MaximinResult(strategy=strategy, value=value, tight_set=tight)
