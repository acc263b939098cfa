"""Normal-form Bayesian games: payoff matrices, mixed strategies, hypothesis
sets, their summary statistics, and exact opportunity/risk gap evaluation.

All types are immutable after construction and all operations are pure, so
everything here is safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

SUM_TOL = 1e-12
TIE_TOL = 1e-9


class TypeIntensityUndefinedError(ValueError):
    """Raised when an operation needs the type intensity but no ordered pair
    of hypothesis members satisfies its feasibility constraint."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PayoffMatrix:
    """Player 1's a x b payoff table. Entries are unitless utilities."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if e.ndim != 2 or e.shape[0] < 1 or e.shape[1] < 1:
            raise ValueError("payoff matrix must be 2-D and nonempty")
        if not np.all(np.isfinite(e)):
            raise ValueError("payoff entries must be finite")
        object.__setattr__(self, "entries", _readonly(e))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    @property
    def max_norm(self) -> float:
        """Element-wise max norm, the alpha bound on any expected payoff."""
        return float(np.abs(self.entries).max())


@dataclass(frozen=True)
class MixedStrategy:
    """A probability vector over actions."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if p.size < 1:
            raise ValueError("strategy must have at least one action")
        if not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite")
        if np.any(p < -SUM_TOL):
            raise ValueError(f"negative probability in {p}")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")
        object.__setattr__(self, "probs", _readonly(p))

    def __len__(self) -> int:
        return self.probs.shape[0]

    @staticmethod
    def pure(index: int, n: int) -> "MixedStrategy":
        v = np.zeros(n)
        v[index] = 1.0
        return MixedStrategy(v)


@dataclass(frozen=True)
class HypothesisSet:
    """A finite ordered set of candidate opponent strategies.

    The full simplex P_b is represented by its b vertex strategies plus the
    full_simplex flag; summary statistics over P_b are then computed by
    vertex/LP arguments rather than enumeration (they are attained at
    vertices or at the game-value point).
    """

    members: Tuple[MixedStrategy, ...]
    full_simplex: bool = False

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("hypothesis set must be nonempty")
        n = len(members[0])
        for m in members:
            if len(m) != n:
                raise ValueError("hypothesis members must share a dimension")
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                if float(np.abs(members[i].probs - members[j].probs).sum()) <= SUM_TOL:
                    raise ValueError(f"duplicate hypothesis members at {i} and {j}")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def dim(self) -> int:
        return len(self.members[0])

    @staticmethod
    def of(vectors: Iterable[Sequence[float]], full_simplex: bool = False) -> "HypothesisSet":
        return HypothesisSet(tuple(MixedStrategy(v) for v in vectors), full_simplex)

    @staticmethod
    def simplex_vertices(b: int) -> "HypothesisSet":
        """The full simplex P_b, stored as its b vertices."""
        return HypothesisSet(
            tuple(MixedStrategy.pure(j, b) for j in range(b)), full_simplex=True
        )


@dataclass(frozen=True)
class Belief:
    """A probability distribution over the members of a hypothesis set."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size < 1:
            raise ValueError("belief must weigh at least one hypothesis")
        if not np.all(np.isfinite(w)):
            raise ValueError("belief weights must be finite")
        if np.any(w < -SUM_TOL):
            raise ValueError("belief weights must be nonnegative")
        w = np.clip(w, 0.0, None)
        if abs(w.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"belief weights sum to {w.sum()}, not 1")
        object.__setattr__(self, "weights", _readonly(w))

    @staticmethod
    def point(index: int, n: int) -> "Belief":
        v = np.zeros(n)
        v[index] = 1.0
        return Belief(v)

    def mean_strategy(self, theta: HypothesisSet) -> np.ndarray:
        if len(self.weights) != len(theta):
            raise ValueError("belief length does not match hypothesis set")
        return self.weights @ np.stack([m.probs for m in theta.members])


@dataclass(frozen=True)
class GameStats:
    """Summary statistics of a hypothesis set against a payoff matrix.

    kappa is None when no ordered member pair satisfies the type-intensity
    feasibility constraint (e.g. a singleton set)."""

    eta: float
    kappa: Optional[float]
    mu: float
    nu: float

    @property
    def kappa_defined(self) -> bool:
        return self.kappa is not None

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {"eta": self.eta, "kappa": self.kappa, "mu": self.mu, "nu": self.nu}


@dataclass(frozen=True)
class GapPoint:
    """A single evaluated payoff-gap value with its attaining witness."""

    eps: float
    gap: float
    witness_rho: Belief
    witness_ystar: int


@dataclass(frozen=True)
class GapReport:
    """Opportunity and risk of a strategy map, with the sampled gap curve."""

    opportunity: float
    risk: float
    curve: Tuple[Tuple[float, float], ...]
    witness: Dict[str, GapPoint]
    search: Dict[str, object]


def expected_payoff(x: MixedStrategy, A: PayoffMatrix, y: MixedStrategy) -> float:
    """Exact expected payoff x^T A y (no sampling)."""
    if len(x) != A.rows or len(y) != A.cols:
        raise ValueError(
            f"dimension mismatch: x has {len(x)}, A is {A.shape}, y has {len(y)}"
        )
    return float(x.probs @ A.entries @ y.probs)


def _argmax_lowest(scores: np.ndarray, tol: float = TIE_TOL) -> int:
    """Lowest index among entries within tol of the maximum."""
    top = float(scores.max())
    for i, s in enumerate(scores):
        if s >= top - tol:
            return i
    return int(scores.argmax())


def best_response_to_mean(A: PayoffMatrix, mean: np.ndarray) -> MixedStrategy:
    """Pure best response against a known opponent mixed strategy."""
    if mean.shape[0] != A.cols:
        raise ValueError("dimension mismatch between strategy and payoff matrix")
    scores = A.entries @ mean
    return MixedStrategy.pure(_argmax_lowest(scores), A.rows)


def best_response(A: PayoffMatrix, rho: Belief, theta: HypothesisSet) -> MixedStrategy:
    """Pure best response to the belief's expected opponent strategy.

    Ties are broken toward the lowest-index row (detected within 1e-9)."""
    return best_response_to_mean(A, rho.mean_strategy(theta))


def _l1(y: Sequence[float], z: Sequence[float]) -> float:
    total = 0.0
    for yi, zi in zip(y, z):
        total += abs(yi - zi)
    return total


def _row_dot(row: Sequence[float], y: Sequence[float]) -> float:
    total = 0.0
    for r, yi in zip(row, y):
        total += r * yi
    return total


def _kappa_with_pair(
    members: Sequence[Sequence[float]],
) -> Tuple[Optional[float], Optional[Tuple[int, int]]]:
    """Max over ordered pairs (y, z) of sum_{i: y_i<=z_i} z_i - sum_{i: y_i>z_i} z_i
    subject to sum_{i: y_i<=z_i} y_i < sum_{i: y_i>z_i} y_i.

    Returns (None, None) when no pair is feasible. Ties keep the first pair
    in enumeration order. Plain sequential sums keep the arithmetic identical
    to a brute-force enumerator."""
    best: Optional[float] = None
    pair: Optional[Tuple[int, int]] = None
    for i, y in enumerate(members):
        for j, z in enumerate(members):
            if i == j:
                continue
            y_le = 0.0
            y_gt = 0.0
            z_le = 0.0
            z_gt = 0.0
            for yi, zi in zip(y, z):
                if yi <= zi:
                    y_le += yi
                    z_le += zi
                else:
                    y_gt += yi
                    z_gt += zi
            if y_le < y_gt:
                obj = z_le - z_gt
                if best is None or obj > best:
                    best = obj
                    pair = (i, j)
    return best, pair


def kappa_attaining_pair(theta: HypothesisSet) -> Tuple[int, int]:
    """Indices of the ordered member pair attaining the type intensity."""
    _, pair = _kappa_with_pair([list(map(float, m.probs)) for m in theta.members])
    if pair is None:
        raise TypeIntensityUndefinedError(
            "no ordered pair of hypothesis members is feasible for the type intensity"
        )
    return pair


def theta_stats(theta: HypothesisSet, A: PayoffMatrix) -> GameStats:
    """Diameter, type intensity, maximum and value of the game over Θ.

    The inner maximization over the agent's simplex is attained at a pure
    row because the objective is linear (and |.| of it convex), so pure-row
    enumeration suffices for mu and nu on finite sets. For the full simplex,
    mu is the max-norm of A, eta = 2 and kappa = 1 for b >= 2, and nu is the
    zero-sum game value computed by the LP solver."""
    if theta.dim != A.cols:
        raise ValueError("hypothesis set dimension does not match payoff matrix")
    if theta.full_simplex:
        b = theta.dim
        if b >= 2:
            eta, kappa = 2.0, 1.0
        else:
            eta, kappa = 0.0, None
        mu = A.max_norm
        from .linprog import maximin_strategy  # deferred: linprog imports this module

        res = maximin_strategy(
            PayoffMatrix(-A.entries.T), HypothesisSet.simplex_vertices(A.rows)
        )
        return GameStats(eta=eta, kappa=kappa, mu=mu, nu=-res.value)

    members = [list(map(float, m.probs)) for m in theta.members]
    rows = [list(map(float, r)) for r in A.entries]

    eta = 0.0
    for i in range(len(members)):
        for j in range(i + 1, len(members)):
            d = _l1(members[i], members[j])
            if d > eta:
                eta = d
    kappa, _ = _kappa_with_pair(members)

    mu = -np.inf
    nu = np.inf
    for y in members:
        payoffs = [_row_dot(r, y) for r in rows]
        best = max(payoffs)
        best_abs = max(abs(p) for p in payoffs)
        if best_abs > mu:
            mu = best_abs
        if best < nu:
            nu = best
    return GameStats(eta=eta, kappa=kappa, mu=float(mu), nu=float(nu))


@dataclass(frozen=True)
class LambdaPolicy:
    """The blend lambda * best_response(rho) + (1 - lambda) * safe_strategy.

    At lambda = 1 this is the exploitative best response; at lambda = 0 it
    plays the maximin strategy regardless of the belief."""

    A: PayoffMatrix
    theta: HypothesisSet
    lam: float
    safe_strategy: MixedStrategy
    safe_value: float

    def __call__(self, rho: Belief) -> MixedStrategy:
        br = best_response(self.A, rho, self.theta)
        mix = self.lam * br.probs + (1.0 - self.lam) * self.safe_strategy.probs
        return MixedStrategy(mix)


def lambda_policy(A: PayoffMatrix, theta: HypothesisSet, lam: float) -> LambdaPolicy:
    """Build the trust-blended strategy map for a given trust level."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    from .linprog import maximin_strategy  # deferred: linprog imports this module

    res = maximin_strategy(A, theta)
    return LambdaPolicy(
        A=A, theta=theta, lam=float(lam), safe_strategy=res.strategy, safe_value=res.value
    )


PolicyMap = Callable[[Belief], MixedStrategy]


def _candidate_beliefs(theta: HypothesisSet, mix_step: float) -> np.ndarray:
    """Belief candidates whose means cover the extreme points the gap search
    needs at desk scale: point masses plus pairwise mixtures on a grid."""
    k = len(theta)
    cands = [np.eye(k)[i] for i in range(k)]
    ts = np.arange(mix_step, 1.0 - mix_step / 2.0, mix_step)
    for i in range(k):
        for j in range(i + 1, k):
            for t in ts:
                w = np.zeros(k)
                w[i] = 1.0 - t
                w[j] = t
                cands.append(w)
    return np.array(cands)


def _boundary_beliefs(theta: HypothesisSet, eps_values: Sequence[float]) -> np.ndarray:
    """For each (y*, z) pair, the mixture from y* toward z that sits on the
    belief-error boundary for each requested eps."""
    k = len(theta)
    Y = np.stack([m.probs for m in theta.members])
    out = []
    for eps in eps_values:
        for t in range(k):
            for j in range(k):
                if j == t:
                    continue
                d = float(np.abs(Y[j] - Y[t]).sum())
                tt = min(1.0, eps / d) if d > 0 else 0.0
                w = np.zeros(k)
                w[t] = 1.0 - tt
                w[j] = tt
                out.append(w)
    return np.array(out) if out else np.zeros((0, k))


def _gap_search(
    A: PayoffMatrix,
    theta: HypothesisSet,
    pi: PolicyMap,
    eps_values: Sequence[float],
    mix_step: float,
) -> Dict[float, GapPoint]:
    """Evaluate the payoff gap at each eps with one shared candidate pool.

    The maximizer over beliefs only matters through the mean strategy, and
    the objective is linear in that mean over the feasible polytope, so the
    maximum is attained at an extreme point; point masses, pairwise grid
    mixtures, and per-eps boundary mixtures cover those at desk scale."""
    Y = np.stack([m.probs for m in theta.members])  # (k, b)
    AY = A.entries @ Y.T  # (a, k)
    opts = AY.max(axis=0)  # best reply payoff against each y*

    weights = np.vstack([_candidate_beliefs(theta, mix_step), _boundary_beliefs(theta, eps_values)])
    means = weights @ Y  # (ncand, b)
    xs = np.stack([pi(Belief(w)).probs for w in weights])  # (ncand, a)
    pays = xs @ AY  # (ncand, k)
    gaps = opts[None, :] - pays
    dists = np.abs(means[:, None, :] - Y[None, :, :]).sum(axis=2)  # (ncand, k)

    results: Dict[float, GapPoint] = {}
    for eps in eps_values:
        feasible = dists <= eps + 1e-12
        if not feasible.any():
            raise ValueError(f"no feasible belief at eps={eps}")
        masked = np.where(feasible, gaps, -np.inf)
        flat = int(masked.argmax())
        ci, ti = divmod(flat, len(theta))
        results[eps] = GapPoint(
            eps=float(eps),
            gap=float(masked[ci, ti]),
            witness_rho=Belief(weights[ci]),
            witness_ystar=ti,
        )
    return results


def payoff_gap_nfg(
    A: PayoffMatrix,
    theta: HypothesisSet,
    pi: PolicyMap,
    eps: float,
    mix_step: float = 0.01,
) -> GapPoint:
    """Worst-case payoff gap at belief error at most eps.

    Maximizes max_x x^T A y* - pi(rho)^T A y* over y* in Θ and beliefs rho
    with ||E_rho[y] - y*||_1 <= eps."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return _gap_search(A, theta, pi, [float(eps)], mix_step)[float(eps)]


def opportunity_risk_nfg(
    A: PayoffMatrix,
    theta: HypothesisSet,
    pi: PolicyMap,
    eps_grid: Sequence[float],
    mix_step: float = 0.01,
) -> GapReport:
    """Full gap curve over an eps grid; opportunity at eps = 0, risk the max.

    The grid must include 0 and the diameter of Θ so both endpoints of the
    curve are represented."""
    eps_values = sorted(set(float(e) for e in eps_grid))
    if eps_values and eps_values[0] < 0:
        raise ValueError("eps grid values must be nonnegative")
    stats = theta_stats(theta, A)
    if not any(abs(e) <= 1e-15 for e in eps_values):
        raise ValueError("eps grid must include 0")
    if not any(e >= stats.eta - 1e-12 for e in eps_values):
        raise ValueError("eps grid must include the diameter of the hypothesis set")

    points = _gap_search(A, theta, pi, eps_values, mix_step)
    curve = tuple((e, points[e].gap) for e in eps_values)
    opportunity = points[eps_values[0]].gap
    risk_eps = max(eps_values, key=lambda e: points[e].gap)
    risk = points[risk_eps].gap

    if opportunity < -1e-9:
        raise AssertionError(f"opportunity {opportunity} < 0; search is inconsistent")
    for (e0, g0), (e1, g1) in zip(curve, curve[1:]):
        if g1 < g0 - 1e-9:
            raise AssertionError(f"gap curve decreased from {g0} at {e0} to {g1} at {e1}")

    return GapReport(
        opportunity=max(0.0, opportunity),
        risk=risk,
        curve=curve,
        witness={"opportunity": points[eps_values[0]], "risk": points[risk_eps]},
        search={
            "scheme": "point-masses + pairwise-grid + eps-boundary mixtures",
            "mix_step": mix_step,
            "eps_grid": tuple(eps_values),
        },
    )


def full_simplex_for_game(A: PayoffMatrix) -> HypothesisSet:
    """Full-simplex hypothesis set for A: the b vertices plus the game-value
    point (the opponent strategy attaining nu), which the gap search needs
    as an explicit candidate."""
    from .linprog import maximin_strategy  # deferred: linprog imports this module

    b = A.cols
    vertices = [MixedStrategy.pure(j, b) for j in range(b)]
    res = maximin_strategy(PayoffMatrix(-A.entries.T), HypothesisSet.simplex_vertices(A.rows))
    value_point = res.strategy
    for v in vertices:
        if float(np.abs(v.probs - value_point.probs).sum()) <= SUM_TOL:
            return HypothesisSet(tuple(vertices), full_simplex=True)
    return HypothesisSet(tuple(vertices) + (value_point,), full_simplex=True)


def save_nfg_game(path, A: PayoffMatrix, theta: HypothesisSet) -> None:
    payload = {
        "rows": A.rows,
        "cols": A.cols,
        "payoffs": [[float(v) for v in row] for row in A.entries],
        "theta": "full_simplex"
        if theta.full_simplex
        else [[float(v) for v in m.probs] for m in theta.members],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_nfg_game(path) -> Tuple[PayoffMatrix, HypothesisSet]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    A = PayoffMatrix(np.array(payload["payoffs"], dtype=float))
    if A.shape != (payload["rows"], payload["cols"]):
        raise ValueError("declared shape does not match payoff table")
    if payload["theta"] == "full_simplex":
        theta = full_simplex_for_game(A)
    else:
        theta = HypothesisSet.of(payload["theta"])
    return A, theta
