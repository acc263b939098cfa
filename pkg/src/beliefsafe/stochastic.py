"""Discounted stochastic Bayesian games: the game model, value computation,
the value-based safe-exploit policy, the game value, payoff-gap evaluation,
and seeded episode simulation.

Opponents' stationary strategies are parameterized by a type drawn from a
finite set; the agent receives a (possibly wrong) type belief and plays a
stationary policy built from it. Value computations iterate to a fixed
sup-norm residual and assert the geometric contraction per sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import json

import numpy as np

from .normal_form import HypothesisSet, PayoffMatrix, _argmax_lowest

RESIDUAL = 1e-10
MAX_SWEEPS = 100_000
SUM_TOL = 1e-12


class ConvergenceError(RuntimeError):
    """Raised when a value computation hits the sweep cap before its
    residual target; never returned silently."""


def _dist_rows_valid(table: np.ndarray, what: str) -> None:
    if np.any(table < -SUM_TOL):
        raise ValueError(f"{what} has negative probabilities")
    sums = table.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise ValueError(f"{what} rows must sum to 1 (max error {np.abs(sums-1).max()})")


@dataclass(frozen=True)
class StochasticGame:
    """Tuple of states, both players' action sets, transition kernel,
    bounded reward table and discount."""

    states: Tuple[str, ...]
    agent_actions: Tuple[str, ...]
    opponent_actions: Tuple[str, ...]
    reward: np.ndarray  # (S, A, B)
    transition: np.ndarray  # (S, A, B, S)
    gamma: float
    r_max: float

    def __post_init__(self):
        S, A, B = len(self.states), len(self.agent_actions), len(self.opponent_actions)
        r = np.asarray(self.reward, dtype=float)
        p = np.asarray(self.transition, dtype=float)
        if r.shape != (S, A, B):
            raise ValueError(f"reward shape {r.shape} != {(S, A, B)}")
        if p.shape != (S, A, B, S):
            raise ValueError(f"transition shape {p.shape} != {(S, A, B, S)}")
        if not np.all(np.isfinite(r)):
            raise ValueError("rewards must be finite")
        if np.abs(r).max() > self.r_max + SUM_TOL:
            raise ValueError(f"|r| exceeds r_max={self.r_max}")
        if np.any(p < -SUM_TOL):
            raise ValueError("negative transition probability")
        if np.any(np.abs(p.sum(axis=-1) - 1.0) > SUM_TOL):
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        for name, arr in (("reward", r), ("transition", p)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def value_cap(self) -> float:
        return self.r_max / (1.0 - self.gamma)


@dataclass(frozen=True)
class StrategyKernel:
    """Per-type, per-state opponent action distributions."""

    type_names: Tuple[str, ...]
    table: np.ndarray  # (T, S, B)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 3 or t.shape[0] != len(self.type_names):
            raise ValueError("kernel table must be (types, states, actions)")
        _dist_rows_valid(t, "strategy kernel")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def sigma(self, type_name: str) -> np.ndarray:
        return self.table[self.index(type_name)]

    def index(self, type_name: str) -> int:
        try:
            return self.type_names.index(type_name)
        except ValueError:
            raise ValueError(f"unknown type {type_name!r}; kernel has {self.type_names}")

    def distance(self, t1: str, t2: str) -> float:
        """max over states of the l1 distance between the two types' rows."""
        d = np.abs(self.sigma(t1) - self.sigma(t2)).sum(axis=1)
        return float(d.max())

    @staticmethod
    def of(mapping: Dict[str, Sequence[Sequence[float]]]) -> "StrategyKernel":
        names = tuple(mapping)
        return StrategyKernel(names, np.stack([np.asarray(mapping[n], float) for n in names]))


@dataclass(frozen=True)
class AgentPolicy:
    """Stationary agent policy: one action distribution per state."""

    probs: np.ndarray  # (S, A)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValueError("policy must be (states, actions)")
        _dist_rows_valid(p, "agent policy")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @staticmethod
    def deterministic(actions: Sequence[int], n_actions: int) -> "AgentPolicy":
        m = np.zeros((len(actions), n_actions))
        for s, a in enumerate(actions):
            m[s, a] = 1.0
        return AgentPolicy(m)


def _iterate(update, v0: np.ndarray, gamma: float, scale: float, what: str) -> np.ndarray:
    """Fixed-point iteration with per-sweep geometric-decay check."""
    V = v0
    prev_res = None
    slack = 1e-9 * max(1.0, scale)
    for _ in range(MAX_SWEEPS):
        V_new = update(V)
        res = float(np.abs(V_new - V).max())
        if prev_res is not None and res > gamma * prev_res + slack:
            raise AssertionError(
                f"{what}: residual {res} exceeds contraction from {prev_res}"
            )
        V = V_new
        if res <= RESIDUAL:
            return V
        prev_res = res
    raise ConvergenceError(f"{what} did not reach residual {RESIDUAL} in {MAX_SWEEPS} sweeps")


def policy_evaluation(game: StochasticGame, pi: AgentPolicy, sigma: np.ndarray) -> np.ndarray:
    """Value of a fixed policy pair: the Bellman fixed point, iterated from 0."""
    sigma = np.asarray(sigma, dtype=float)
    r_pi = np.einsum("sa,sb,sab->s", pi.probs, sigma, game.reward)
    p_pi = np.einsum("sa,sb,sabt->st", pi.probs, sigma, game.transition)

    V = _iterate(
        lambda V: r_pi + game.gamma * (p_pi @ V),
        np.zeros(game.n_states),
        game.gamma,
        game.value_cap(),
        "policy evaluation",
    )
    if np.abs(V).max() > game.value_cap() + 1e-6:
        raise AssertionError("value function exceeds r_max / (1 - gamma)")
    return V


def optimal_value(
    game: StochasticGame, sigma: np.ndarray
) -> Tuple[np.ndarray, AgentPolicy]:
    """Best-response value against a fixed opponent strategy, with the greedy
    deterministic policy (lowest-index tie-break)."""
    sigma = np.asarray(sigma, dtype=float)
    r_sig = np.einsum("sb,sab->sa", sigma, game.reward)
    p_sig = np.einsum("sb,sabt->sat", sigma, game.transition)

    def q_of(V):
        return r_sig + game.gamma * (p_sig @ V)

    V = _iterate(
        lambda V: q_of(V).max(axis=1),
        np.zeros(game.n_states),
        game.gamma,
        game.value_cap(),
        "value iteration",
    )
    if np.abs(V).max() > game.value_cap() + 1e-6:
        raise AssertionError("value function exceeds r_max / (1 - gamma)")
    Q = q_of(V)
    greedy = [_argmax_lowest(Q[s]) for s in range(game.n_states)]
    return V, AgentPolicy.deterministic(greedy, len(game.agent_actions))


def r_matrix(game: StochasticGame, V: np.ndarray, s: int) -> np.ndarray:
    """One-step lookahead payoff matrix at state s: r + gamma * E_p[V]."""
    V = np.asarray(V, dtype=float)
    if V.shape != (game.n_states,):
        raise ValueError("value function must assign one value per state")
    return game.reward[s] + game.gamma * (game.transition[s] @ V)


@dataclass(frozen=True)
class GameValueResult:
    """Per-step minimax value of the game against the worst type.

    values solves the Shapley-style recursion where the adversarial type may
    change per step; this lower-bounds the fixed-type game value, which is
    reported alongside as fixed_type_values / nu_fixed_type (the maximin
    policy evaluated with the type held fixed for the whole episode)."""

    values: np.ndarray  # (S,)
    nu: float
    sigma_bar: np.ndarray  # (S, B)
    theta_bar: Tuple[str, ...]  # minimizing type per state
    pi_bar: AgentPolicy  # per-state maximin mixed strategy
    fixed_type_values: Dict[str, np.ndarray]
    nu_fixed_type: float


def game_value_sbg(
    game: StochasticGame,
    kernel: StrategyKernel,
    type_names: Optional[Sequence[str]] = None,
) -> GameValueResult:
    """Minimax value iteration: V(s) <- max_x min_theta x^T R_V(s) sigma(s;theta).

    Each state's inner problem is a maximin over the type-induced payoff
    columns, solved by the LP. The per-state minimizing type (first in order
    on ties) defines the safe opponent response sigma_bar."""
    from .linprog import maximin_strategy  # deferred: linprog imports normal_form

    names = tuple(type_names) if type_names is not None else kernel.type_names
    sigmas = [kernel.sigma(n) for n in names]
    S, A = game.n_states, len(game.agent_actions)
    cap = game.value_cap()

    def sweep(V):
        out = np.empty(S)
        for s in range(S):
            Rv = r_matrix(game, V, s)
            cols = np.stack([Rv @ sig[s] for sig in sigmas], axis=1)  # (A, T)
            res = maximin_strategy(
                PayoffMatrix(cols), HypothesisSet.simplex_vertices(len(names))
            )
            out[s] = res.value
        return out

    # Minimax iteration contracts with modulus gamma; LP round-off gets a
    # slightly larger slack than the pure numpy iterations.
    V = np.zeros(S)
    prev_res = None
    slack = 1e-7 * max(1.0, cap)
    for _ in range(MAX_SWEEPS):
        V_new = sweep(V)
        res = float(np.abs(V_new - V).max())
        if prev_res is not None and res > game.gamma * prev_res + slack:
            raise AssertionError("minimax value iteration lost contraction")
        V = V_new
        if res <= RESIDUAL:
            break
        prev_res = res
    else:
        raise ConvergenceError(f"minimax value iteration exceeded {MAX_SWEEPS} sweeps")

    pi_rows = np.empty((S, A))
    sigma_bar = np.empty((S, len(game.opponent_actions)))
    theta_bar: List[str] = []
    for s in range(S):
        Rv = r_matrix(game, V, s)
        cols = np.stack([Rv @ sig[s] for sig in sigmas], axis=1)
        res = maximin_strategy(
            PayoffMatrix(cols), HypothesisSet.simplex_vertices(len(names))
        )
        pi_rows[s] = res.strategy.probs
        scores = res.strategy.probs @ cols
        t_min = int(np.flatnonzero(scores <= scores.min() + 1e-9)[0])
        theta_bar.append(names[t_min])
        sigma_bar[s] = sigmas[t_min][s]

    pi_bar = AgentPolicy(pi_rows)
    fixed = {n: policy_evaluation(game, pi_bar, kernel.sigma(n)) for n in names}
    nu_fixed = min(float(v.min()) for v in fixed.values())
    return GameValueResult(
        values=V,
        nu=float(V.min()),
        sigma_bar=sigma_bar,
        theta_bar=tuple(theta_bar),
        pi_bar=pi_bar,
        fixed_type_values=fixed,
        nu_fixed_type=nu_fixed,
    )


def safe_exploit_policy(
    game: StochasticGame,
    kernel: StrategyKernel,
    type_names: Sequence[str],
    belief: str,
    lam: float,
    game_value: Optional[GameValueResult] = None,
    tilde_value: Optional[np.ndarray] = None,
) -> AgentPolicy:
    """Value-based blend: per state, the deterministic argmax of
    lam * R_V~(s) sigma~(s) + (1 - lam) * R_Vbar(s) sigma_bar(s).

    At lam = 1 this is the greedy best response to the believed type; at
    lam = 0 the greedy response to the safe opponent model. The argmax over
    mixed actions is attained at a vertex since the score is linear, so the
    returned policy is deterministic (lowest-index tie-break)."""
    if belief not in type_names:
        raise ValueError(f"belief type {belief!r} not in the type set {tuple(type_names)}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    sig_tilde = kernel.sigma(belief)
    if tilde_value is None:
        tilde_value, _ = optimal_value(game, sig_tilde)
    gv = game_value if game_value is not None else game_value_sbg(game, kernel, type_names)

    actions = []
    for s in range(game.n_states):
        score = lam * (r_matrix(game, tilde_value, s) @ sig_tilde[s]) + (1.0 - lam) * (
            r_matrix(game, gv.values, s) @ gv.sigma_bar[s]
        )
        actions.append(_argmax_lowest(score))
    return AgentPolicy.deterministic(actions, len(game.agent_actions))


def blend_policy(
    game: StochasticGame,
    kernel: StrategyKernel,
    type_names: Sequence[str],
    belief: str,
    lam: float,
    game_value: Optional[GameValueResult] = None,
    tilde_value: Optional[np.ndarray] = None,
) -> AgentPolicy:
    """Mixture blend: lam * greedy-vs-belief + (1 - lam) * per-state maximin
    mixed strategy. The stochastic analogue of the normal-form trust blend;
    in a single-state game it reduces to it exactly."""
    if belief not in type_names:
        raise ValueError(f"belief type {belief!r} not in the type set {tuple(type_names)}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    gv = game_value if game_value is not None else game_value_sbg(game, kernel, type_names)
    if tilde_value is None:
        _, greedy = optimal_value(game, kernel.sigma(belief))
    else:
        sig = kernel.sigma(belief)
        acts = [
            _argmax_lowest(r_matrix(game, tilde_value, s) @ sig[s])
            for s in range(game.n_states)
        ]
        greedy = AgentPolicy.deterministic(acts, len(game.agent_actions))
    return AgentPolicy(lam * greedy.probs + (1.0 - lam) * gv.pi_bar.probs)


PolicyBuilder = Callable[[str, float], AgentPolicy]


@dataclass(frozen=True)
class SbgGapPoint:
    eps: float
    gap: float
    theta: str
    theta_star: str
    state: int


@dataclass(frozen=True)
class SbgGapReport:
    """Opportunity (beta) and risk (delta) of a policy family, with the full
    per-(believed, true) type pair table."""

    beta: float
    delta: float
    per_pair: Tuple[Tuple[str, str, float, float], ...]  # (theta, theta*, d, gap)
    witness: Dict[str, SbgGapPoint]


def payoff_gap_sbg(
    game: StochasticGame,
    kernel: StrategyKernel,
    type_names: Sequence[str],
    policy_builder: PolicyBuilder,
    lam: float,
    eps: float,
) -> SbgGapPoint:
    """Worst value shortfall over ordered type pairs within kernel distance
    eps: max over (theta, theta*) and initial states of
    V*(s; sigma(theta*)) - V^{pi(theta)}(s; sigma(theta*))."""
    if not 0.0 <= eps <= 2.0 + 1e-12:
        raise ValueError("eps must lie in [0, 2]")
    names = tuple(type_names)
    best: Optional[SbgGapPoint] = None
    opt_cache: Dict[str, np.ndarray] = {}
    pol_cache: Dict[str, AgentPolicy] = {}
    for theta in names:
        for theta_star in names:
            d = kernel.distance(theta, theta_star)
            if d > eps + 1e-12:
                continue
            if theta_star not in opt_cache:
                opt_cache[theta_star] = optimal_value(game, kernel.sigma(theta_star))[0]
            if theta not in pol_cache:
                pol_cache[theta] = policy_builder(theta, lam)
            v_pi = policy_evaluation(game, pol_cache[theta], kernel.sigma(theta_star))
            diff = opt_cache[theta_star] - v_pi
            s = int(diff.argmax())
            if best is None or diff[s] > best.gap:
                best = SbgGapPoint(eps, float(diff[s]), theta, theta_star, s)
    if best is None:
        raise ValueError(f"no type pair within distance {eps}")
    return best


def opportunity_risk_sbg(
    game: StochasticGame,
    kernel: StrategyKernel,
    type_names: Sequence[str],
    lam: float,
    policy_builder: Optional[PolicyBuilder] = None,
) -> SbgGapReport:
    """beta = gap with correct beliefs (eps = 0); delta = worst gap over any
    pair (eps = 2, the largest possible kernel distance)."""
    names = tuple(type_names)
    if policy_builder is None:
        gv = game_value_sbg(game, kernel, names)

        def policy_builder(theta, l):
            return safe_exploit_policy(game, kernel, names, theta, l, game_value=gv)

    opt_cache = {n: optimal_value(game, kernel.sigma(n))[0] for n in names}
    pol_cache = {n: policy_builder(n, lam) for n in names}
    rows = []
    beta_pt: Optional[SbgGapPoint] = None
    delta_pt: Optional[SbgGapPoint] = None
    for theta in names:
        for theta_star in names:
            d = kernel.distance(theta, theta_star)
            v_pi = policy_evaluation(game, pol_cache[theta], kernel.sigma(theta_star))
            diff = opt_cache[theta_star] - v_pi
            s = int(diff.argmax())
            gap = float(diff[s])
            rows.append((theta, theta_star, d, gap))
            pt = SbgGapPoint(d, gap, theta, theta_star, s)
            if d <= 1e-12 and (beta_pt is None or gap > beta_pt.gap):
                beta_pt = SbgGapPoint(0.0, gap, theta, theta_star, s)
            if delta_pt is None or gap > delta_pt.gap:
                delta_pt = SbgGapPoint(2.0, gap, theta, theta_star, s)
    assert beta_pt is not None and delta_pt is not None
    beta = max(0.0, beta_pt.gap)
    delta = delta_pt.gap
    if delta < beta - 1e-9:
        raise AssertionError(f"risk {delta} below opportunity {beta}")
    return SbgGapReport(
        beta=beta,
        delta=delta,
        per_pair=tuple(rows),
        witness={"opportunity": beta_pt, "risk": delta_pt},
    )


def draw_index(rng: np.random.Generator, cum_row: np.ndarray) -> int:
    """Inverse-CDF draw from a precomputed cumulative row; much faster than
    Generator.choice for tight simulation loops."""
    i = int(np.searchsorted(cum_row, rng.random(), side="right"))
    return min(i, cum_row.shape[0] - 1)


class SimAgent:
    """Minimal stateful agent interface for episode simulation. Instances
    are single-threaded; distinct instances may run concurrently."""

    def reset(self, rng: np.random.Generator) -> None:
        self._rng = rng

    def act(self, state: int) -> int:
        raise NotImplementedError

    def observe(self, state: int, own_action: int, other_action: int) -> None:
        pass


class StationaryAgent(SimAgent):
    """Samples from a fixed per-state action distribution."""

    def __init__(self, table: np.ndarray):
        table = np.asarray(table, dtype=float)
        _dist_rows_valid(table, "stationary agent")
        self.table = table
        self._cum = table.cumsum(axis=1)

    def act(self, state: int) -> int:
        return draw_index(self._rng, self._cum[state])


@dataclass(frozen=True)
class EpisodeResult:
    states: Tuple[int, ...]
    agent_actions: Tuple[int, ...]
    opponent_actions: Tuple[int, ...]
    rewards: Tuple[float, ...]
    discounted_return: float


def simulate_episode(
    game: StochasticGame,
    agent,
    opponent,
    horizon: int,
    seed,
    init: Optional[Sequence[float]] = None,
) -> EpisodeResult:
    """Roll out one episode with a private seeded RNG; reproducible per seed.

    agent may be an AgentPolicy or any SimAgent; opponent any SimAgent.
    init is the initial state distribution (uniform when omitted)."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    rng = np.random.default_rng(seed)
    if isinstance(agent, AgentPolicy):
        agent = StationaryAgent(agent.probs)
    agent.reset(rng)
    opponent.reset(rng)

    S = game.n_states
    p0 = np.full(S, 1.0 / S) if init is None else np.asarray(init, dtype=float)
    if abs(p0.sum() - 1.0) > 1e-9 or np.any(p0 < -SUM_TOL):
        raise ValueError("initial distribution invalid")

    states, acts_a, acts_b, rewards = [], [], [], []
    ret = 0.0
    disc = 1.0
    cum_p = game.transition.cumsum(axis=-1)
    s = draw_index(rng, p0.cumsum())
    for _ in range(horizon):
        states.append(s)
        a = agent.act(s)
        b = opponent.act(s)
        r = float(game.reward[s, a, b])
        acts_a.append(a)
        acts_b.append(b)
        rewards.append(r)
        ret += disc * r
        disc *= game.gamma
        agent.observe(s, a, b)
        opponent.observe(s, b, a)
        s = draw_index(rng, cum_p[s, a, b])
    return EpisodeResult(
        states=tuple(states),
        agent_actions=tuple(acts_a),
        opponent_actions=tuple(acts_b),
        rewards=tuple(rewards),
        discounted_return=ret,
    )


def single_state_game(
    payoffs: np.ndarray, gamma: float, r_max: Optional[float] = None
) -> StochasticGame:
    """The one-state game whose per-step payoff table is the given matrix;
    reduces every quantity here to 1/(1-gamma) times its normal-form twin."""
    payoffs = np.asarray(payoffs, dtype=float)
    a, b = payoffs.shape
    return StochasticGame(
        states=("s0",),
        agent_actions=tuple(f"a{i}" for i in range(a)),
        opponent_actions=tuple(f"b{j}" for j in range(b)),
        reward=payoffs[None, :, :],
        transition=np.ones((1, a, b, 1)),
        gamma=gamma,
        r_max=float(np.abs(payoffs).max()) if r_max is None else r_max,
    )


def save_sbg_game(path, game: StochasticGame, kernel: Optional[StrategyKernel] = None) -> None:
    payload = {
        "states": list(game.states),
        "agent_actions": list(game.agent_actions),
        "opponent_actions": list(game.opponent_actions),
        "reward": game.reward.tolist(),
        "transition": game.transition.tolist(),
        "gamma": game.gamma,
        "r_max": game.r_max,
    }
    if kernel is not None:
        payload["kernel"] = {
            name: kernel.sigma(name).tolist() for name in kernel.type_names
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_sbg_game(path) -> Tuple[StochasticGame, Optional[StrategyKernel]]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    game = StochasticGame(
        states=tuple(payload["states"]),
        agent_actions=tuple(payload["agent_actions"]),
        opponent_actions=tuple(payload["opponent_actions"]),
        reward=np.array(payload["reward"], dtype=float),
        transition=np.array(payload["transition"], dtype=float),
        gamma=float(payload["gamma"]),
        r_max=float(payload["r_max"]),
    )
    kernel = None
    if "kernel" in payload:
        kernel = StrategyKernel.of(
            {name: np.array(rows, dtype=float) for name, rows in payload["kernel"].items()}
        )
    return game, kernel
